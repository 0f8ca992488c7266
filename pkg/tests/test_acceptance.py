"""Acceptance criteria 1-8, each at its stated tolerance.

Every test prints one line ``CRITERION k: PASS|FAIL`` followed by the measured
quantities, then asserts.  Run alone with

    pytest tests/test_acceptance.py -v -s
    python tests/test_acceptance.py
"""

import json
import math
import sys
import time

import numpy as np
import pytest
import sympy as sp

from oracles import bmo_oracle, bump, lp_oracle, morrey_table_oracle
from ultrapar import diagnostics
from ultrapar.cli import run
from ultrapar.coefficients import PRESETS, CoefficientField, gaussian_bump, make_coefficient
from ultrapar.grid import GridFunction
from ultrapar.harness import (Fields, Geometry, SuiteConfig, check_decay, decay_ladder, fit_radius,
                              run_suite)
from ultrapar.kernel import FrozenKernel, covariance, gamma0
from ultrapar.solver import ProblemSpec, solve_forward, solve_frozen_convolution
from ultrapar.spaces import (bmo_eta, default_ladder, default_morrey_params, eta_curve, lattice_centers,
                             lp_norm, morrey_table)
from ultrapar.structure import GroupBall, prototype, three_block

LO, HI = np.array([-1.0, -1.0, 0.0]), np.array([1.0, 1.0, 1.0])


def verdict(capsys, k, items, t0=None):
    """Print the criterion line; ``items`` is a list of (label, value, ok)."""
    ok = all(bool(i[2]) for i in items)
    parts = [f"{lab}={val:.3g}" if isinstance(val, float) else f"{lab}={val}" for lab, val, _ in items]
    bad = [lab for lab, _, good in items if not good]
    if t0 is not None:
        parts.append(f"time={time.perf_counter() - t0:.1f}s")
    line = f"CRITERION {k}: {'PASS' if ok else 'FAIL'} " + " ".join(parts)
    if bad:
        line += " failing: " + ", ".join(bad)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


def test_criterion_1_group_geometry(capsys):
    t0 = time.perf_counter()
    items = []
    for name, s, q2 in (("proto", prototype(), 6.0), ("tri", three_block(), 12.0)):
        ax = diagnostics.group_axioms(s, n=10_000, seed=1)
        worst = max(ax.values())
        items.append((f"{name}_axioms_max", worst, worst <= 1e-12))
        d = diagnostics.doubling_exponent(s)
        items.append((f"{name}_doubling", d, abs(d - q2) <= 1e-9))
    dt = time.perf_counter() - t0
    items.append(("runtime_s", dt, dt < 10))
    verdict(capsys, 1, items)


def test_criterion_2_covariance(capsys):
    k, kt = FrozenKernel(prototype()), FrozenKernel(three_block())
    C1 = covariance(k, 1.0).C
    exact = np.array([[1.0, -0.5], [-0.5, 1.0 / 3.0]])
    e1 = float(np.abs(C1 - exact).max())
    cp, ct = diagnostics.covariance_check(k, n=100, seed=2), diagnostics.covariance_check(kt, n=100, seed=2)
    items = [("C1_err", e1, e1 <= 1e-12),
             ("vanloan_abs_proto", cp["vanloan_max_abs_diff"], cp["vanloan_max_abs_diff"] <= 1e-12),
             ("vanloan_rel_tri", ct["vanloan_max_rel_diff"], ct["vanloan_max_rel_diff"] <= 1e-12),
             ("spd_proto", cp["spd"], cp["spd"]), ("spd_tri", ct["spd"], ct["spd"])]
    verdict(capsys, 2, items)


def test_criterion_3_kernel(capsys):
    t0 = time.perf_counter()
    k = FrozenKernel(prototype())
    g = float(gamma0(k, [0, 0, 1], [0, 0, 0]))
    items = [("gamma0_err", abs(g - math.sqrt(3) / (2 * math.pi)), abs(g - math.sqrt(3) / (2 * math.pi)) <= 1e-12)]
    for t in (0.25, 1.0, 4.0):
        m = diagnostics.mass(k, t)
        items.append((f"mass_t{t}", abs(m - 1), abs(m - 1) <= 1e-6))
    h = diagnostics.homogeneity(k)
    items.append(("homogeneity", max(h.values()), max(h.values()) <= 1e-10))
    ck = diagnostics.chapman_kolmogorov(k)
    items.append(("chapman_kolmogorov", ck, ck <= 1e-4))
    fd = diagnostics.gradient_fd(k, h=1e-4, order=2)
    items.append(("grad_fd", fd, fd <= 1e-6))
    dt = time.perf_counter() - t0
    items.append(("runtime_s", dt, dt < 60))
    verdict(capsys, 3, items)


def test_criterion_4_monte_carlo(capsys):
    t0 = time.perf_counter()
    res = diagnostics.monte_carlo(FrozenKernel(prototype()), horizon=1.0, n_paths=100_000, n_steps=1000, seed=4)
    dt = time.perf_counter() - t0
    items = [("mean_ok", res["mean_ok"], res["mean_ok"]), ("cov_ok", res["cov_ok"], res["cov_ok"]),
             ("max_mean_z", res["max_mean_z"], True), ("max_cov_z", res["max_cov_z"], True),
             ("runtime_s", dt, dt < 60)]
    verdict(capsys, 4, items)


def _orders(errs):
    return [float(o) for o in np.log2(np.array(errs[:-1]) / np.array(errs[1:]))]


def _quartic(P):
    x1, x2, t = P[..., 0], P[..., 1], P[..., 2]
    return x1 ** 4 + 12 * x1 ** 2 * t + 12 * t ** 2 + (x2 + t * x1) ** 2 + 2 / 3 * t ** 3


def _manufactured():
    x1, x2, t = sp.symbols("x1 x2 t")
    u = sp.sin(x1) * x2 * sp.exp(-t)
    a = 1 + sp.sin(x1) / 2
    Lu = sp.diff(a * sp.diff(u, x1), x1) + x1 * sp.diff(u, x2) - sp.diff(u, t)
    gf, uf = sp.lambdify((x1, x2, t), Lu, "numpy"), sp.lambdify((x1, x2, t), u, "numpy")
    G = lambda P: gf(P[..., 0], P[..., 1], P[..., 2])
    U = lambda P: uf(P[..., 0], P[..., 1], P[..., 2])
    af = CoefficientField("manufactured", 1, scalar=lambda P: 1 + 0.5 * np.sin(P[..., 0]))
    return U, G, af


def _cross_gap(s, n):
    g = gaussian_bump([0.1, -0.1, 0.3], [0.25, 0.25, 0.1], 1.0)
    f1 = gaussian_bump([-0.2, 0.1, 0.5], [0.25, 0.25, 0.1], 0.5)
    G = GridFunction.from_function(LO, HI, (n,) * 3, g)
    F = GridFunction.from_function(LO, HI, (n,) * 3, f1)
    uc = solve_frozen_convolution(FrozenKernel(s), G, [F])
    ps = ProblemSpec(s, LO, HI, (n,) * 3, g=g, f=[f1], data=lambda P: uc(P, method="cubic"))
    uf = solve_forward(ps)
    w = uf.weights
    return float(np.sqrt(np.sum(w * (uf.values - uc.values) ** 2) / np.sum(w * uc.values ** 2)))


def test_criterion_5_solver(capsys):
    s = prototype()
    levels = (17, 33, 65)
    errs = []
    for n in levels:
        u = solve_forward(ProblemSpec(s, LO, HI, (n,) * 3, data=_quartic))
        errs.append(float(np.abs(u.values - _quartic(u.points())).max()))
    oc = _orders(errs)
    U, G, af = _manufactured()
    errs = []
    for n in levels:
        u = solve_forward(ProblemSpec(s, LO, HI, (n,) * 3, a_field=af, g=G, data=U))
        errs.append(float(np.abs(u.values - U(u.points())).max()))
    om = _orders(errs)
    gap49 = _cross_gap(s, 49)
    t0 = time.perf_counter()
    gap97 = _cross_gap(s, 97)
    dt = time.perf_counter() - t0
    items = [("caloric_order_min", min(oc), min(oc) >= 0.9),
             ("manufactured_order_min", min(om), min(om) >= 0.9),
             ("gap_49", gap49, gap49 <= 0.05), ("gap_97", gap97, gap97 < gap49),
             ("runtime_97_s", dt, dt < 300)]
    verdict(capsys, 5, items)


def test_criterion_6_spaces(capsys):
    s = prototype()
    fn = lambda P: bump(P, [0.0, 0.0, 0.5], [0.6, 0.5, 0.3])
    items = []
    u = GridFunction.from_function(LO, HI, (65,) * 3, fn)
    for lab, region in (("lp_box", None), ("lp_ball", GroupBall([0, 0, 0.5], 1.2))):
        ref = lp_oracle(fn, 2.2, s, region, LO, HI) if region is not None else lp_oracle(fn, 2.2, lower=LO, upper=HI)
        e = abs(lp_norm(u, 2.2, region, s) / ref - 1)
        items.append((lab, e, e <= 0.01))
    u33 = GridFunction.from_function(LO, HI, (33,) * 3, fn)
    worst = 0.0
    for lam in (0.0, 1.0, 3.0):
        mp = default_morrey_params(s, u33, 2.2, lam, n_centers=3)
        tab = morrey_table(u33, mp, s)
        ref = morrey_table_oracle(fn, s, 2.2, lam, mp.centers, mp.radii, LO, HI, n=2 ** 16)
        ok = ref > 0.05 * np.nanmax(ref)
        worst = max(worst, float(np.nanmax(np.abs(tab[ok] / ref[ok] - 1))))
    items.append(("morrey_table", worst, worst <= 0.05))
    sq = lambda P: 0.3 * np.sign(np.sin(8 * np.pi * P[..., 0]))
    a = GridFunction.from_function(LO, HI, (65,) * 3, sq)
    c = lattice_centers(LO, HI, 3)
    lad = default_ladder(s, a)
    worst = 0.0
    for R in (lad[0], lad[4]):
        worst = max(worst, abs(bmo_eta(a, R, c, s, lad) / bmo_oracle(sq, s, R, c, lad, LO, HI) - 1))
    items.append(("bmo_eta", worst, worst <= 0.05))
    const = GridFunction.from_function(LO, HI, (17,) * 3, lambda P: 1.7 + 0 * P[..., 0])
    e0 = bmo_eta(const, 2.0, c, s)
    items.append(("eta_constant", e0, e0 == 0.0))
    mono = True
    for name in sorted(PRESETS):
        af = make_coefficient(name, 1)
        g = GridFunction.from_function(LO, HI, (33,) * 3, lambda P: af.scalar_values(P))
        _, eta = eta_curve(g, c, s)
        mono &= bool(np.all(np.diff(eta) >= 0))
    items.append(("eta_monotone_presets", mono, mono))
    verdict(capsys, 6, items)


def test_criterion_7_harness(capsys):
    t0 = time.perf_counter()
    s = prototype()
    z0 = np.array([0.0, 0.0, 0.5])
    R = fit_radius(s, z0, LO, HI)
    lad = decay_ladder(R, R / 8)
    mono = {}
    for lab, fn, key, exact in (("const_l2", lambda P: 2 + 0 * P[..., 0], "decay_l2", 6.0),
                                ("x1_grad_l2", lambda P: P[..., 0], "decay_grad_l2", 6.0),
                                ("x1_l2", lambda P: P[..., 0], "decay_l2", 8.0)):
        F = Fields(s, GridFunction.from_function(LO, HI, (65,) * 3, fn), lab)
        rep = {r.check: r for r in check_decay(F, Geometry(z0, R, None, lad))}[key]
        mono[lab] = (rep.lhs, abs(rep.lhs - exact) <= 0.1)
    cfg = SuiteConfig()
    reports = run_suite(cfg)
    dt = time.perf_counter() - t0
    core = [r for r in reports if not r.check.startswith("decay_")]
    core_checks = {"caccioppoli", "sobolev", "poincare", "reverse_holder", "dirichlet", "dirichlet_lp", "morrey"}
    nondeg = [r for r in core if r.verdict != "degenerate"]
    bad = [f"{r.check}/{r.member}" for r in nondeg
           if r.verdict != "stable" or not all(math.isfinite(x) for x in r.refinement)]
    covered = {r.check for r in nondeg} >= core_checks
    members = {r.member for r in nondeg if r.check == "dirichlet"}
    rh22 = [r for r in core if r.check == "reverse_holder" and abs(r.params["p"] - 2.2) < 1e-12]
    homog = [r for r in reports if r.check == "decay_grad_l2" and r.member.startswith("homog")]
    min_slope = min(min(r.params["slopes"]) for r in homog)
    Q = s.Q
    items = [("members", len({r.member for r in reports}), len({r.member for r in reports}) >= 5),
             ("nonhomogeneous_members", len(members), len(members) >= 3),
             ("all_checks_present", covered, covered),
             ("reverse_holder_p2.2", len(rh22), len(rh22) >= 5),
             ("unstable_or_nonfinite", len(bad), not bad)]
    items += [(f"slope_{k}", v, ok) for k, (v, ok) in mono.items()]
    items += [("homog_grad_slope_min", min_slope, min_slope >= Q - 0.5), ("runtime_s", dt, dt < 900)]
    if bad:
        items.append(("bad_cases", " ".join(bad), False))
    verdict(capsys, 7, items)


def test_criterion_8_determinism(capsys, tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"grid": {"levels": [17, 33]}}))
    outs = [tmp_path / "a", tmp_path / "b", tmp_path / "c"]
    codes = [run(["verify", "--config", str(cfg), "--out", str(o), "--threads", th])
             for o, th in zip(outs, ("1", "1", "2"))]
    blobs = [(o / "reports.json").read_bytes() for o in outs]
    hashes = [json.loads((o / "manifest.json").read_text())["files"] for o in outs]
    items = [("exit_codes", codes, codes == [0, 0, 0]),
             ("repeat_identical", blobs[0] == blobs[1], blobs[0] == blobs[1]),
             ("threads_identical", blobs[0] == blobs[2], blobs[0] == blobs[2]),
             ("manifest_hashes_equal", hashes[0] == hashes[1] == hashes[2], hashes[0] == hashes[1] == hashes[2])]
    verdict(capsys, 8, items)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s"]))
