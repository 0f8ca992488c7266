import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ultrapar.errors import BadLambda, DegenerateLadder, GeometryOutOfDomain, UnknownCheck
from ultrapar.grid import GridFunction
from ultrapar.harness import (Fields, Geometry, SuiteConfig, build_member, caccioppoli_sides, check_caccioppoli,
                              check_decay, check_dirichlet_estimates, check_morrey, check_poincare_type,
                              check_reverse_holder, check_sobolev_type, decay_ladder, fit_radius, fit_slope,
                              morrey_sides, poincare_sides, reports_csv, reports_json, reverse_holder_sides,
                              run_suite, sobolev_exponent, validate_checks, write_reports)
from ultrapar.structure import GroupBall, prototype, three_block

S = prototype()
LO, HI = (-1.0, -1.0, 0.0), (1.0, 1.0, 1.0)
Z0 = np.array([0.0, 0.0, 0.5])


def fields(fn, n=17, name="u"):
    return Fields(S, GridFunction.from_function(LO, HI, (n,) * 3, fn), name)


CONST = lambda P: 2.0 + 0 * P[..., 0]
ZERO = lambda P: 0 * P[..., 0]
X1 = lambda P: P[..., 0]
QUAD = lambda P: P[..., 0] ** 2 + 2 * P[..., 2] + P[..., 1] + P[..., 2] * P[..., 0]
R = fit_radius(S, Z0, LO, HI)
GEOM = Geometry(Z0, R, R / 2)


def test_fit_radius_keeps_ball_inside():
    assert GroupBall(Z0, R).bbox(S)[1][2] <= 1.0 + 1e-9
    with pytest.raises(GeometryOutOfDomain):
        fit_radius(S, [0, 0, 5.0], LO, HI)


def test_constant_has_zero_energy():
    rep = check_caccioppoli(fields(CONST), GEOM)
    assert rep.lhs == 0 and rep.ratio == 0 and rep.rhs > 0


def test_zero_solution_is_degenerate_everywhere():
    F = fields(ZERO)
    for rep in (check_caccioppoli(F, GEOM), check_sobolev_type(F, GEOM), check_poincare_type(F, GEOM),
                check_reverse_holder(F, Geometry(Z0, R / 2), 2.2),
                check_dirichlet_estimates(F, Geometry(Z0, R / 4))):
        assert rep.lhs == 0 and rep.rhs == 0 and rep.verdict == "degenerate"


def test_caloric_x1_energy_is_ball_volume():
    lhs, rhs = caccioppoli_sides(fields(X1), GEOM)
    assert lhs == pytest.approx(GroupBall(Z0, R / 2).volume(S), rel=1e-10)
    assert 0 < rhs < math.inf


def test_sobolev_exponent():
    assert sobolev_exponent(S) == 1.5
    assert sobolev_exponent(three_block()) == pytest.approx(24 / 14)


def test_refinement_verdicts_on_caloric():
    lv = [fields(QUAD, n) for n in (17, 33)]
    for rep in (check_caccioppoli(lv, GEOM), check_sobolev_type(lv, GEOM), check_poincare_type(lv, GEOM)):
        assert rep.verdict == "stable" and len(rep.refinement) == 2 and rep.ratio >= 0


@pytest.mark.parametrize("sides", [caccioppoli_sides, poincare_sides])
def test_rhs_scales_with_inverse_square_gap(sides):
    F = fields(QUAD)
    r1 = 0.5 * R
    r2 = R - 0.5 * (R - r1)
    _, a = sides(F, Geometry(Z0, R, r1))
    _, b = sides(F, Geometry(Z0, R, r2))
    assert b / a == pytest.approx(4.0, rel=1e-12)


@settings(max_examples=30)
@given(st.floats(2.0, 4.0), st.floats(0.0, 2.0))
def test_power_means_nondecreasing(p, dp):
    F = fields(QUAD)
    g = Geometry(Z0, R / 2)
    assert reverse_holder_sides(F, g, p)[0] <= reverse_holder_sides(F, g, p + dp)[0] * (1 + 1e-12)


def test_reverse_holder_rejects_small_p():
    with pytest.raises(ValueError):
        check_reverse_holder(fields(QUAD), Geometry(Z0, R / 2), 1.5)


def test_geometry_out_of_domain():
    with pytest.raises(GeometryOutOfDomain):
        check_caccioppoli(fields(QUAD), Geometry(Z0, 3 * R, R))
    with pytest.raises(GeometryOutOfDomain):
        check_caccioppoli(fields(QUAD), Geometry(Z0, R, R))


def test_poincare_degenerate_for_constants():
    rep = check_poincare_type(fields(CONST), GEOM)
    assert rep.lhs > 0 and rep.rhs == 0 and rep.verdict == "degenerate" and rep.ratio == math.inf


def test_decay_slopes_on_monomials():
    lad = decay_ladder(R, R / 8)
    const = {r.check: r for r in check_decay(fields(CONST), Geometry(Z0, R, None, lad))}
    assert const["decay_l2"].lhs == pytest.approx(6.0, abs=0.1)
    assert const["decay_grad_l2"].verdict == "degenerate"
    x1 = {r.check: r for r in check_decay(fields(X1), Geometry(Z0, R, None, lad))}
    assert x1["decay_grad_l2"].lhs == pytest.approx(6.0, abs=0.1)
    assert x1["decay_grad_l2"].verdict == "stable"
    assert x1["decay_l2"].lhs == pytest.approx(8.0, abs=0.1)


def test_fit_slope_exact_power():
    rho = np.geomspace(0.1, 1, 6)
    assert fit_slope(rho, 3 * rho ** 4.5) == pytest.approx(4.5, abs=1e-12)
    assert math.isnan(fit_slope(rho, 0 * rho))


def test_decay_needs_three_radii():
    with pytest.raises(DegenerateLadder):
        check_decay(fields(X1), Geometry(Z0, R, None, np.array([R, R / 2])))


def test_decay_rejects_mu_outside_range():
    with pytest.raises(ValueError):
        check_decay(fields(X1), Geometry(Z0, R, None, decay_ladder(R, R / 8)), mu=10.0)


def test_morrey_lambda_range():
    for lam in (0.0, 6.0, -1.0):
        with pytest.raises(BadLambda):
            check_morrey(fields(QUAD), None, 2.2, lam)


def test_morrey_constant_has_zero_lhs():
    rep = check_morrey(fields(CONST), None, 2.2, 1.0)
    assert rep.lhs == 0 and rep.ratio == 0


def test_morrey_small_lambda_limit():
    cfg = SuiteConfig(levels=(17,))
    F = build_member("sinusoid", cfg, 17)
    a, b = morrey_sides(F, 2.2, 1e-3), morrey_sides(F, 2.2, 0.0)
    assert a[0] == pytest.approx(b[0], rel=0.05) and a[1] == pytest.approx(b[1], rel=0.05)


def test_morrey_local_table():
    lv = [fields(QUAD, n) for n in (17, 33)]
    R4 = fit_radius(S, Z0, LO, HI, 4.0)
    rep = check_morrey(lv, Geometry(Z0, R4, None, decay_ladder(R4, R4 / 4)), 2.2, 1.0)
    assert len(rep.table) == 5 and all(r["lhs"] >= 0 and r["rhs"] >= 0 for r in rep.table)


def test_unknown_check_and_empty_suite():
    with pytest.raises(UnknownCheck):
        validate_checks(["holder-continuity"])
    assert run_suite(SuiteConfig(checks=())) == []


def test_unknown_member():
    with pytest.raises(KeyError):
        run_suite(SuiteConfig(members=("nope",), checks=("caccioppoli",)))


SMALL = dict(levels=(17, 33), members=("caloric_x1", "frozen_bump", "sinusoid", "homog_pole"))


@pytest.fixture(scope="module")
def small_reports():
    return run_suite(SuiteConfig(**SMALL))


def test_small_suite_reports(small_reports):
    checks = {r.check for r in small_reports}
    assert {"caccioppoli", "sobolev", "poincare", "reverse_holder", "dirichlet", "dirichlet_lp",
            "morrey", "decay_sup", "decay_l2"} <= checks
    for r in small_reports:
        assert r.verdict in ("stable", "unstable", "degenerate")
        if r.verdict != "degenerate" and not r.check.startswith("decay_"):
            assert np.isfinite(r.ratio) and r.ratio >= 0 and r.rhs >= 0


def test_suite_is_thread_independent(small_reports):
    again = run_suite(SuiteConfig(**SMALL, threads=2))
    assert reports_json(again) == reports_json(small_reports)


def test_failures_are_recorded_and_suite_continues():
    reps = run_suite(SuiteConfig(levels=(17, 33), members=("caloric_x1",), checks=("caccioppoli", "morrey"),
                                 morrey=((2.2, 9.0),)))
    assert [r.verdict for r in reps][-1] == "failed" and "BadLambda" in reps[-1].notes
    assert reps[0].check == "caccioppoli" and reps[0].verdict != "failed"


def test_report_outputs(small_reports, tmp_path):
    doc = json.loads(reports_json(small_reports, {"config": {"seed": 0}}))
    assert len(doc["reports"]) == len(small_reports) and doc["config"]["seed"] == 0
    lines = reports_csv(small_reports).strip().splitlines()
    assert lines[0].startswith("check,member,z0,R,rho,p,lambda,lhs,rhs,ratio,verdict")
    assert len(lines) == len(small_reports) + 1
    paths = write_reports(small_reports, tmp_path)
    assert any(p.name.startswith("ladder_homog_pole_decay_") for p in paths)
    assert all(p.exists() for p in paths)


def test_suite_residuals_small():
    from ultrapar.harness import build_suite
    suite = build_suite(SuiteConfig(levels=(33,), members=("sinusoid", "homog_vmo")))
    res = suite.compute_residuals()
    assert all(v[0] < 0.05 for v in res.values())
