"""Empirical inequality checks on generated solutions.

Every check evaluates a left side and a right side functional (the unknown
constant left out) on one suite member, at every grid level, and reports the
ratio lhs / rhs.  Ball and box integrals use the exact region rules of
:mod:`ultrapar.quadrature` applied to the linear interpolants of u and of its
central-difference D0 u; g and f are evaluated analytically.

Verdicts:  ``degenerate`` when the right side vanishes, ``stable`` when the
ratio changes by at most a factor 2 between consecutive levels, ``unstable``
otherwise, and ``failed`` when the case raised.  Decay checks compare a
fitted log-log slope against the exponent of the corresponding decay
estimate instead.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .coefficients import CoefficientField, constant, gaussian_bump, make_coefficient
from .errors import BadLambda, DegenerateLadder, GeometryOutOfDomain, UltraparError, UnknownCheck
from .grid import GridFunction, derivatives
from .kernel import FrozenKernel, gamma0_grid
from .quadrature import ball_rule, box_rule, inside_box
from .solver import CutoffSpec, ProblemSpec, SolverConfig, solve_forward, solve_frozen_convolution, weak_residual
from .spaces import default_morrey_params, lp_norm, morrey_norm, morrey_norms
from .structure import GroupBall, KolmogorovStructure, homogeneous_box, prototype

CHECKS = ("caccioppoli", "sobolev", "poincare", "reverse_holder", "dirichlet", "morrey", "decay")
STABLE_FACTOR = 2.0
SLOPE_TOL = 0.5


# ---------------------------------------------------------------- reports

@dataclass
class Geometry:
    z0: np.ndarray
    R: float
    rho: float | None = None
    ladder: np.ndarray | None = None

    def to_dict(self) -> dict:
        d = {"z0": [float(c) for c in np.ravel(self.z0)], "R": float(self.R)}
        if self.rho is not None:
            d["rho"] = float(self.rho)
        if self.ladder is not None:
            d["ladder"] = [float(r) for r in self.ladder]
        return d


def _num(x):
    x = float(x)
    return x if math.isfinite(x) else None


@dataclass
class CheckReport:
    check: str
    member: str
    geometry: dict
    params: dict
    lhs: float
    rhs: float
    ratio: float
    refinement: list = field(default_factory=list)
    verdict: str = "stable"
    table: list | None = None
    notes: str = ""

    def to_dict(self) -> dict:
        d = {"check": self.check, "member": self.member, "geometry": self.geometry,
             "params": self.params, "lhs": _num(self.lhs), "rhs": _num(self.rhs),
             "ratio": _num(self.ratio), "refinement": [_num(r) for r in self.refinement],
             "verdict": self.verdict, "notes": self.notes}
        if self.table is not None:
            d["table"] = self.table
        return d


def _ratio(lhs: float, rhs: float) -> float:
    if rhs > 0:
        return lhs / rhs
    return 0.0 if lhs == 0 else math.inf


def _verdict(lhs: Sequence[float], rhs: Sequence[float]) -> str:
    if any(r <= 0 for r in rhs):
        return "degenerate"
    rat = [a / b for a, b in zip(lhs, rhs)]
    if not all(math.isfinite(r) for r in rat):
        return "unstable"
    for a, b in zip(rat[:-1], rat[1:]):
        if a == b == 0:
            continue
        if min(a, b) <= 0 or max(a, b) / min(a, b) > STABLE_FACTOR:
            return "unstable"
    return "stable"


def _report(check, fields, geom, params, sides, notes="", table=None) -> CheckReport:
    lhs = [float(a) for a, _ in sides]
    rhs = [float(b) for _, b in sides]
    return CheckReport(check, fields[-1].name, geom.to_dict(), params, lhs[-1], rhs[-1],
                       _ratio(lhs[-1], rhs[-1]), [_ratio(a, b) for a, b in zip(lhs, rhs)],
                       _verdict(lhs, rhs), table, notes)


# ---------------------------------------------------------------- fields

@dataclass(eq=False)
class Fields:
    """One solution on one grid level: u on the grid, g and f as callables."""

    structure: KolmogorovStructure
    u: GridFunction
    name: str
    g: Callable | None = None
    f: Sequence[Callable] | None = None
    a: CoefficientField | None = None
    homogeneous: bool = False

    def __post_init__(self):
        if self.a is None:
            self.a = constant(self.structure.m0, self.structure.A0)
        self.d0 = derivatives(self.structure, self.u, "central").d0

    @property
    def lower(self):
        return self.u.lower

    @property
    def upper(self):
        return self.u.upper

    def problem(self) -> ProblemSpec:
        return ProblemSpec(self.structure, self.lower, self.upper, self.u.shape, self.a, self.g, self.f,
                           name=self.name)

    def u_at(self, Z) -> np.ndarray:
        return self.u(Z)

    def d0_at(self, Z) -> np.ndarray:
        """|D0 u| at the points."""
        return np.sqrt(sum(c(Z) ** 2 for c in self.d0))

    def g_at(self, Z) -> np.ndarray:
        return np.zeros(Z.shape[:-1]) if self.g is None else np.asarray(self.g(Z), float)

    def f_at(self, Z) -> np.ndarray:
        """|f| at the points."""
        if not self.f:
            return np.zeros(Z.shape[:-1])
        return np.sqrt(sum(np.asarray(fi(Z), float) ** 2 for fi in self.f))

    def src_sq(self, Z) -> np.ndarray:
        return self.g_at(Z) ** 2 + self.f_at(Z) ** 2

    def relative_residual(self) -> float:
        """Relative weak-form residual against a smooth cutoff filling the interior of the box."""
        c = 0.5 * (self.lower + self.upper)
        half = 0.5 * (self.upper - self.lower)
        psi = CutoffSpec(tuple(c), 0.4, 0.9, scale=tuple(half))
        return weak_residual(self.problem(), self.u, psi, relative=True)


@dataclass
class SolutionSuite:
    """Suite members per grid level (coarse first); ``residuals`` holds the relative weak residuals."""

    levels: list
    residuals: dict = field(default_factory=dict)

    def names(self) -> list:
        return [m.name for m in self.levels[0]]

    def member(self, name: str) -> list:
        return [next(m for m in lvl if m.name == name) for lvl in self.levels]

    def compute_residuals(self) -> dict:
        self.residuals = {m.name: [lvl[i].relative_residual() for lvl in self.levels]
                          for i, m in enumerate(self.levels[0])}
        return self.residuals


# ---------------------------------------------------------------- integration helpers

def _ball(F: Fields, z0, r, fn, n):
    s = F.structure
    if not inside_box(s, GroupBall(z0, r), F.lower, F.upper):
        raise GeometryOutOfDomain(f"ball of radius {r} around {list(np.ravel(z0))} leaves the grid box")
    Z, W = ball_rule(s, z0, r, n)
    return float(W @ fn(Z)), Z, W


def _box(F: Fields, box, fn, n):
    if np.any(box.lower < F.lower - 1e-12) or np.any(box.upper > F.upper + 1e-12):
        raise GeometryOutOfDomain("box leaves the grid box")
    Z, W = box_rule(box.lower, box.upper, n)
    return float(W @ fn(Z))


def fit_radius(s: KolmogorovStructure, z0, lower, upper, factor: float = 1.0, margin=0.0) -> float:
    """Largest R (bisection) with B(z0, factor R) inside the box shrunk by ``margin``."""
    lo_b = np.asarray(lower, float) + margin
    hi_b = np.asarray(upper, float) - margin
    a, b = 0.0, float(np.max(np.asarray(upper) - np.asarray(lower))) + 1.0
    if not inside_box(s, GroupBall(z0, 1e-6), lo_b, hi_b):
        raise GeometryOutOfDomain("center lies outside the domain")
    for _ in range(50):
        m = 0.5 * (a + b)
        if m > 0 and inside_box(s, GroupBall(z0, factor * m), lo_b, hi_b):
            a = m
        else:
            b = m
    return a


def _levels(fields) -> list:
    return [fields] if isinstance(fields, Fields) else list(fields)


def _need(geom: Geometry):
    if geom.rho is None or not 0 < geom.rho < geom.R:
        raise GeometryOutOfDomain(f"need 0 < rho < R, got rho={geom.rho}, R={geom.R}")


# ---------------------------------------------------------------- checks

def caccioppoli_sides(F: Fields, geom: Geometry, n: int = 8):
    _need(geom)
    R, rho = geom.R, geom.rho
    lhs = _ball(F, geom.z0, rho, lambda Z: F.d0_at(Z) ** 2, n)[0]
    uu = _ball(F, geom.z0, R, lambda Z: F.u_at(Z) ** 2, n)[0]
    src = _ball(F, geom.z0, R, F.src_sq, n)[0]
    return lhs, (R - rho) ** -2 * uu + src


def check_caccioppoli(fields, geom: Geometry, n: int = 8) -> CheckReport:
    """int_{B_rho} |D0 u|^2  against  (R - rho)^{-2} int_{B_R} u^2 + int_{B_R} (g^2 + |f|^2)."""
    lv = _levels(fields)
    return _report("caccioppoli", lv, geom, {}, [caccioppoli_sides(F, geom, n) for F in lv])


def sobolev_exponent(s: KolmogorovStructure) -> float:
    Q2 = s.homogeneous_dimension
    return 2.0 * Q2 / (Q2 + 2)


def sobolev_sides(F: Fields, geom: Geometry, n: int = 8):
    _need(geom)
    q = sobolev_exponent(F.structure)
    R, rho = geom.R, geom.rho
    lhs = math.sqrt(_ball(F, geom.z0, rho, lambda Z: F.u_at(Z) ** 2, n)[0])
    norms = [_ball(F, geom.z0, R, lambda Z, fn=fn: np.abs(fn(Z)) ** q, n)[0] ** (1 / q)
             for fn in (F.u_at, F.d0_at, F.g_at, F.f_at)]
    return lhs, sum(norms) / (R - rho)


def check_sobolev_type(fields, geom: Geometry, n: int = 8) -> CheckReport:
    """||u||_{L^2(B_rho)}  against  (R - rho)^{-1} (||u|| + ||D0 u|| + ||g|| + ||f||)_{L^q(B_R)}, q = 2(Q+2)/(Q+4)."""
    lv = _levels(fields)
    q = sobolev_exponent(lv[0].structure)
    return _report("sobolev", lv, geom, {"q": q}, [sobolev_sides(F, geom, n) for F in lv])


def poincare_sides(F: Fields, geom: Geometry, n: int = 8, time_factor: float = 0.5):
    _need(geom)
    s = F.structure
    R, rho = geom.R, geom.rho
    Qr = homogeneous_box(s, geom.z0, rho, time_factor)
    QR = homogeneous_box(s, geom.z0, R, time_factor)
    lhs = _box(F, Qr, lambda Z: F.u_at(Z) ** 2, n)
    grad = _box(F, QR, lambda Z: F.d0_at(Z) ** 2, n)
    src = _box(F, QR, F.src_sq, n)
    return lhs, R ** 4 / (R - rho) ** 2 * grad + R ** 2 * src


def check_poincare_type(fields, geom: Geometry, n: int = 8, time_factor: float = 0.5) -> CheckReport:
    """int_{Q_rho} u^2  against  R^4/(R - rho)^2 int_{Q_R} |D0 u|^2 + R^2 int_{Q_R} (g^2 + |f|^2).

    Q_r is the dilation-adapted box with half widths r^alpha_j in space and
    time_factor r^2 in time.  A nonzero constant has lhs > 0 and rhs = 0.
    """
    lv = _levels(fields)
    return _report("poincare", lv, geom, {"time_factor": time_factor, "region": "homogeneous_box"},
                   [poincare_sides(F, geom, n, time_factor) for F in lv])


def reverse_holder_sides(F: Fields, geom: Geometry, p: float, n: int = 8):
    R = geom.R
    s = F.structure
    vR = GroupBall(geom.z0, R).volume(s)
    v2 = GroupBall(geom.z0, 2 * R).volume(s)
    lhs = (_ball(F, geom.z0, R, lambda Z: F.d0_at(Z) ** p, n)[0] / vR) ** (1 / p)
    grad = (_ball(F, geom.z0, 2 * R, lambda Z: F.d0_at(Z) ** 2, n)[0] / v2) ** 0.5
    src = (_ball(F, geom.z0, 2 * R, lambda Z: F.src_sq(Z) ** (p / 2), n)[0] / v2) ** (1 / p)
    return lhs, grad + src


def check_reverse_holder(fields, geom: Geometry, p: float, n: int = 8) -> CheckReport:
    """Averaged L^p of D0 u on B_R against averaged L^2 of D0 u plus averaged L^p of (g, f) on B_2R."""
    if p < 2:
        raise ValueError(f"p must be >= 2, got {p}")
    lv = _levels(fields)
    sides = [reverse_holder_sides(F, geom, p, n) for F in lv]
    l2 = reverse_holder_sides(lv[-1], geom, 2.0, n)[0]
    return _report("reverse_holder", lv, geom, {"p": p, "gain": p - 2, "lhs_p2": l2}, sides)


def dirichlet_solution(F: Fields, geom: Geometry, cfg: SolverConfig | None = None) -> Fields:
    """w solving the member's equation with zero data on the grid box covering B_{4R}."""
    s = F.structure
    lo, hi = GroupBall(geom.z0, 4 * geom.R).bbox(s)
    h = F.u.spacing
    L = F.lower
    lo = L + np.floor((lo - L) / h - 1e-9) * h
    hi = L + np.ceil((hi - L) / h + 1e-9) * h
    if np.any(lo < F.lower - 1e-9) or np.any(hi > F.upper + 1e-9):
        raise GeometryOutOfDomain("B_4R does not fit the domain")
    shape = tuple(int(round(k)) + 1 for k in (hi - lo) / h)
    ps = ProblemSpec(s, lo, hi, shape, F.a, F.g, F.f, None, F.name + ":w")
    w = solve_forward(ps, cfg)
    return Fields(s, w, F.name, F.g, F.f, F.a)


def dirichlet_sides(W: Fields, geom: Geometry, p: float, n: int = 8):
    R = geom.R
    if p == 2:
        lhs = _ball(W, geom.z0, R, lambda Z: W.d0_at(Z) ** 2, n)[0]
        rhs = _ball(W, geom.z0, 2 * R, W.src_sq, n)[0]
    else:
        lhs = _ball(W, geom.z0, R, lambda Z: W.d0_at(Z) ** p, n)[0]
        rhs = _ball(W, geom.z0, 4 * R, lambda Z: W.g_at(Z) ** p + W.f_at(Z) ** p, n)[0]
    return lhs, rhs


def check_dirichlet_estimates(w_fields, geom: Geometry, p: float = 2.0, n: int = 8) -> CheckReport:
    """Zero-data solution w: int_{B_R} |D0 w|^2 vs int_{B_2R} (g^2 + |f|^2) at p = 2,
    int_{B_R} |D0 w|^p vs int_{B_4R} (|g|^p + |f|^p) otherwise."""
    lv = _levels(w_fields)
    name = "dirichlet" if p == 2 else "dirichlet_lp"
    return _report(name, lv, geom, {"p": p}, [dirichlet_sides(W, geom, p, n) for W in lv])


def nested_boxes(lower, upper, inner: float = 0.5, middle: float = 0.75):
    """Centered boxes Omega' and Omega'' scaled by ``inner`` and ``middle``."""
    lower, upper = np.asarray(lower, float), np.asarray(upper, float)
    c, half = 0.5 * (lower + upper), 0.5 * (upper - lower)
    return (c - inner * half, c + inner * half), (c - middle * half, c + middle * half)


def _sampled(F: Fields, fn) -> GridFunction:
    return GridFunction.from_function(F.lower, F.upper, F.u.shape, fn)


def data_morrey_norms(F: Fields, p: float, lam: float, n_centers: int = 5) -> tuple:
    """(||g||_{p,lam}, ||f||_{p,lam}) over the whole grid box; cached on the member."""
    cache = F.__dict__.setdefault("_data_morrey", {})
    key = (p, lam, n_centers)
    if key not in cache:
        s = F.structure
        g, f = _sampled(F, F.g_at), _sampled(F, F.f_at)
        cache[key] = tuple(morrey_norms([g, f], default_morrey_params(s, g, p, lam, n_centers), s))
    return cache[key]


def morrey_sides(F: Fields, p: float, lam: float, boxes=None, n_centers: int = 5):
    """(||D0 u||_{p,lam; Omega'}, ||D0 u||_{L^2(Omega'')} + ||g||_{p,lam} + ||f||_{p,lam}) on a finite family."""
    s = F.structure
    (lo1, hi1), (lo2, hi2) = boxes or nested_boxes(F.lower, F.upper)
    d0 = [c.restrict(lo1, hi1) for c in F.d0]
    lhs = morrey_norm(d0, default_morrey_params(s, d0[0], p, lam, n_centers), s)
    l2 = lp_norm([c.restrict(lo2, hi2) for c in F.d0], 2.0)
    return lhs, l2 + sum(data_morrey_norms(F, p, lam, n_centers))


def morrey_local_table(F: Fields, geom: Geometry, p: float, lam: float, gf_norms, n: int = 8) -> list:
    """Rows (rho, int_{B_rho} |D0 u|^p, (rho/R)^{Q+2-lam} int_{B_4R} |D0 u|^p + rho^{Q+2-lam} (||g||^p + ||f||^p))."""
    e = F.structure.homogeneous_dimension - lam
    R = geom.R
    big = _ball(F, geom.z0, 4 * R, lambda Z: F.d0_at(Z) ** p, n)[0]
    data = sum(v ** p for v in gf_norms)
    rows = []
    for rho in geom.ladder:
        lhs = _ball(F, geom.z0, rho, lambda Z: F.d0_at(Z) ** p, n)[0]
        rows.append({"rho": float(rho), "lhs": lhs, "rhs": (rho / R) ** e * big + rho ** e * data})
    return rows


def check_morrey(fields, geom: Geometry | None, p: float, lam: float, boxes=None, n: int = 8) -> CheckReport:
    """Morrey norm of D0 u on Omega' against ||D0 u||_{L^2(Omega'')} + ||g||_{p,lam} + ||f||_{p,lam}.

    With a geometry carrying a radius ladder (R such that B_4R fits), the
    per-radius local decay table is attached to the report.
    """
    lv = _levels(fields)
    Q2 = lv[0].structure.homogeneous_dimension
    if not 0 < lam < Q2:
        raise BadLambda(f"lambda must lie in (0, {Q2}), got {lam}")
    sides = [morrey_sides(F, p, lam, boxes) for F in lv]
    table = None
    if geom is not None and geom.ladder is not None:
        table = morrey_local_table(lv[-1], geom, p, lam, data_morrey_norms(lv[-1], p, lam), n)
    geom = geom or Geometry(np.zeros(lv[0].structure.dim), 0.0)
    return _report("morrey", lv, geom, {"p": p, "lambda": lam}, sides, table=table)


# ---------------------------------------------------------------- decay

def decay_ladder(R: float, rho_min: float, per_octave: int = 2) -> np.ndarray:
    k = np.arange(int(np.floor(per_octave * np.log2(R / rho_min))) + 1)
    return R * 2.0 ** (-k / per_octave)


def fit_slope(rho, vals) -> float:
    rho, vals = np.asarray(rho, float), np.asarray(vals, float)
    ok = vals > 0
    if ok.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(rho[ok]), np.log(vals[ok]), 1)[0])


def default_mu(s: KolmogorovStructure, p: float) -> float:
    Q2 = s.homogeneous_dimension
    return 0.5 * ((p - 2) * Q2 / p + s.Q)


def decay_exponents(s: KolmogorovStructure, p: float, mu: float) -> dict:
    Q, Q2 = s.Q, s.homogeneous_dimension
    return {"decay_l2": Q2, "decay_grad_l2": Q, "decay_grad_lp": Q2 - p,
            "decay_grad_mu": (2 * Q2 - p * (Q2 - mu)) / 2}


def decay_profiles(F: Fields, geom: Geometry, p: float, n: int = 8) -> dict:
    """Integrals over B_rho for every ladder radius: v^2, |D0 v|^2, |D0 v|^p."""
    out = {"v2": [], "grad2": [], "gradp": []}
    for rho in geom.ladder:
        out["v2"].append(_ball(F, geom.z0, rho, lambda Z: F.u_at(Z) ** 2, n)[0])
        out["grad2"].append(_ball(F, geom.z0, rho, lambda Z: F.d0_at(Z) ** 2, n)[0])
        out["gradp"].append(_ball(F, geom.z0, rho, lambda Z: F.d0_at(Z) ** p, n)[0])
    return out


def sup_bound_sides(F: Fields, geom: Geometry, n: int = 8):
    """sup_{B_{R/2}} v^2 (over quadrature nodes) against R^{-(Q+2)} int_{B_R} v^2."""
    R = geom.R
    _, Z, _ = _ball(F, geom.z0, R / 2, lambda Z: np.zeros(Z.shape[:-1]), n)
    sup = float(np.max(F.u_at(Z) ** 2))
    return sup, R ** -F.structure.homogeneous_dimension * _ball(F, geom.z0, R, lambda Z: F.u_at(Z) ** 2, n)[0]


def check_decay(fields, geom: Geometry, p: float = 2.2, mu: float | None = None, n: int = 8) -> list:
    """Decay checks for a homogeneous solution along the radius ladder of ``geom``.

    Returns one report for the sup bound (ratio refinement verdict) and one per
    decay exponent: lhs is the fitted log-log slope of the integral over B_rho,
    rhs the exponent, ratio the largest value over the ladder of
    int_{B_rho} / ((rho/R)^e int_{B_R}).  The verdict is ``stable`` when the
    slope is at least e - 0.5 on every level.
    """
    lv = _levels(fields)
    if geom.ladder is None or len(geom.ladder) < 3:
        raise DegenerateLadder("decay fits need at least 3 radii")
    s = lv[0].structure
    mu = default_mu(s, p) if mu is None else mu
    lo_mu, hi_mu = (p - 2) * s.homogeneous_dimension / p, s.Q
    if not lo_mu < mu < hi_mu:
        raise ValueError(f"mu must lie in ({lo_mu}, {hi_mu}), got {mu}")
    ladder = np.asarray(geom.ladder, float)
    if abs(ladder[0] - geom.R) > 1e-12 * geom.R:
        ladder = np.concatenate([[geom.R], ladder])
    geom = Geometry(geom.z0, geom.R, geom.rho, ladder)
    params = {"p": p, "mu": mu}
    reports = [_report("decay_sup", lv, geom, params, [sup_bound_sides(F, geom, n) for F in lv])]
    exps = decay_exponents(s, p, mu)
    prof = [decay_profiles(F, geom, p, n) for F in lv]
    key = {"decay_l2": "v2", "decay_grad_l2": "grad2", "decay_grad_lp": "gradp", "decay_grad_mu": "gradp"}
    for name, e in exps.items():
        slopes, consts = [], []
        for pr in prof:
            vals = np.asarray(pr[key[name]])
            slopes.append(fit_slope(ladder, vals))
            ref = (ladder / geom.R) ** e * vals[0]
            consts.append(float(np.max(vals / ref)) if vals[0] > 0 else math.nan)
        ok = all(math.isfinite(sl) and sl >= e - SLOPE_TOL for sl in slopes)
        all_zero = all(np.all(np.asarray(pr[key[name]]) == 0) for pr in prof)
        verdict = "degenerate" if all_zero else ("stable" if ok else "unstable")
        table = [{"rho": float(r), "lhs": float(v)} for r, v in zip(ladder, prof[-1][key[name]])]
        reports.append(CheckReport(name, lv[-1].name, geom.to_dict(), dict(params, exponent=e, slopes=slopes),
                                   slopes[-1], e, consts[-1], consts, verdict, table))
    return reports


# ---------------------------------------------------------------- suite

def _caloric_x1(P):
    return P[..., 0]


def _caloric_quadratic(P):
    x1, x2, t = P[..., 0], P[..., 1], P[..., -1]
    return x1 ** 2 + 2 * t + x2 + t * x1


def _data_affine(P):
    return 1.0 + P[..., 0] + 0.5 * (P[..., 1] + P[..., -1] * P[..., 0])


@dataclass
class SuiteConfig:
    structure: KolmogorovStructure = field(default_factory=prototype)
    lower: tuple = (-1.0, -1.0, 0.0)
    upper: tuple = (1.0, 1.0, 1.0)
    levels: tuple = (33, 65)
    z0: tuple = (0.0, 0.0, 0.5)
    members: tuple = ("caloric_x1", "caloric_quadratic", "frozen_bump", "vmo_loglog", "sinusoid",
                      "homog_pole", "homog_vmo")
    checks: tuple = CHECKS
    gains: tuple = (0.1, 0.2)
    morrey: tuple = ((2.2, 1.0),)
    decay_p: float = 2.2
    mu: float | None = None
    g: dict = field(default_factory=lambda: {"center": [0.1, -0.1, 0.45], "sigma": [0.25, 0.25, 0.08],
                                             "amplitude": 1.0})
    f: list = field(default_factory=lambda: [{"center": [-0.15, 0.1, 0.5], "sigma": [0.25, 0.25, 0.08],
                                              "amplitude": 0.5}])
    coefficients: dict = field(default_factory=lambda: {"vmo_loglog": {}, "sinusoid": {}})
    pole: tuple = (0.2, 0.0, -0.4)
    quad_n: int = 8
    solver: SolverConfig = field(default_factory=SolverConfig)
    threads: int = 1
    seed: int = 0


MEMBERS = ("caloric_x1", "caloric_quadratic", "frozen_bump", "vmo_loglog", "sinusoid", "homog_pole", "homog_vmo")


def _sources(cfg: SuiteConfig):
    g = gaussian_bump(**cfg.g) if cfg.g else None
    f = [gaussian_bump(**fi) for fi in cfg.f] if cfg.f else None
    return g, f


def build_member(name: str, cfg: SuiteConfig, n: int) -> Fields:
    s = cfg.structure
    shape = (n,) * s.dim
    lo, hi = np.asarray(cfg.lower, float), np.asarray(cfg.upper, float)
    g, f = _sources(cfg)
    if name in ("caloric_x1", "caloric_quadratic"):
        fn = _caloric_x1 if name == "caloric_x1" else _caloric_quadratic
        return Fields(s, GridFunction.from_function(lo, hi, shape, fn, name), name, homogeneous=True)
    if name == "frozen_bump":
        k = FrozenKernel(s)
        G = GridFunction.from_function(lo, hi, shape, g, "g")
        Fl = [GridFunction.from_function(lo, hi, shape, fi, f"f{i + 1}") for i, fi in enumerate(f)]
        u = solve_frozen_convolution(k, G, Fl)
        return Fields(s, u, name, g, f)
    if name in ("vmo_loglog", "sinusoid"):
        a = make_coefficient(name, s.m0, **cfg.coefficients.get(name, {}))
        u = solve_forward(ProblemSpec(s, lo, hi, shape, a, g, f, None, name), cfg.solver)
        return Fields(s, u, name, g, f, a)
    if name == "homog_pole":
        k = FrozenKernel(s)
        u = gamma0_grid(k, GridFunction(lo, hi, np.zeros(shape)), np.asarray(cfg.pole, float))
        return Fields(s, u.with_values(u.values, name=name), name, homogeneous=True)
    if name == "homog_vmo":
        a = make_coefficient("vmo_loglog", s.m0, **cfg.coefficients.get("vmo_loglog", {}))
        u = solve_forward(ProblemSpec(s, lo, hi, shape, a, None, None, _data_affine, name), cfg.solver)
        return Fields(s, u, name, a=a, homogeneous=True)
    raise KeyError(f"unknown suite member {name!r}; known: {list(MEMBERS)}")


def build_suite(cfg: SuiteConfig) -> SolutionSuite:
    unknown = [m for m in cfg.members if m not in MEMBERS]
    if unknown:
        raise KeyError(f"unknown suite members {unknown}; known: {list(MEMBERS)}")
    return SolutionSuite([[build_member(m, cfg, n) for m in cfg.members] for n in cfg.levels])


def validate_checks(names) -> None:
    for c in names:
        if c not in CHECKS:
            raise UnknownCheck(f"unknown check {c!r}; known: {list(CHECKS)}")


def suite_geometries(cfg: SuiteConfig) -> dict:
    """Radii fitted once on the coarse level: B_R, B_2R and B_4R inside the domain with a one-cell margin."""
    s = cfg.structure
    lo, hi = np.asarray(cfg.lower, float), np.asarray(cfg.upper, float)
    h = (hi - lo) / (min(cfg.levels) - 1)
    z0 = np.asarray(cfg.z0, float)
    R1 = fit_radius(s, z0, lo, hi, 1.0, h)
    R2 = fit_radius(s, z0, lo, hi, 2.0, h)
    R4 = fit_radius(s, z0, lo, hi, 4.0, h)
    rho_min = 2.0 * float(np.max(h[: s.m0]))
    return {
        "interior": Geometry(z0, R1, R1 / 2),
        "double": Geometry(z0, R2, R2 / 2),
        "quad": Geometry(z0, R4, R4 / 2, decay_ladder(R4, rho_min / 2)),
        "decay": Geometry(z0, R1, None, decay_ladder(R1, rho_min)),
    }


def _failed(check, member, err) -> CheckReport:
    return CheckReport(check, member, {}, {}, math.nan, math.nan, math.nan, [], "failed",
                       notes=f"{type(err).__name__}: {err}")


def _cases(cfg: SuiteConfig, suite: SolutionSuite, geo: dict) -> list:
    n = cfg.quad_n
    cases = []
    for name in suite.names():
        lv = suite.member(name)
        homog = lv[0].homogeneous
        for c in cfg.checks:
            if c == "caccioppoli":
                cases.append((c, name, lambda lv=lv: [check_caccioppoli(lv, geo["interior"], n)]))
            elif c == "sobolev":
                cases.append((c, name, lambda lv=lv: [check_sobolev_type(lv, geo["interior"], n)]))
            elif c == "poincare":
                cases.append((c, name, lambda lv=lv: [check_poincare_type(lv, geo["interior"], n)]))
            elif c == "reverse_holder":
                for gain in cfg.gains:
                    cases.append((c, name, lambda lv=lv, p=2 + gain: [check_reverse_holder(lv, geo["double"], p, n)]))
            elif c == "dirichlet":
                def run(lv=lv):
                    W = [dirichlet_solution(F, geo["quad"], cfg.solver) if F.g or F.f else
                         Fields(F.structure, F.u.with_values(np.zeros(F.u.shape)), F.name, homogeneous=True)
                         for F in lv]
                    return [check_dirichlet_estimates(W, geo["quad"], 2.0, n),
                            check_dirichlet_estimates(W, geo["quad"], 2.0 + cfg.gains[0], n)]
                cases.append((c, name, run))
            elif c == "morrey":
                for p, lam in cfg.morrey:
                    cases.append((c, name, lambda lv=lv, p=p, lam=lam: [check_morrey(lv, geo["quad"], p, lam, n=n)]))
            elif c == "decay" and homog:
                cases.append((c, name, lambda lv=lv: check_decay(lv, geo["decay"], cfg.decay_p, cfg.mu, n)))
    return cases


def run_suite(cfg: SuiteConfig | None = None, suite: SolutionSuite | None = None) -> list:
    """All configured checks on all suite members over the configured grid levels.

    Errors raised by one case are recorded as a ``failed`` report and the
    suite continues.  Cases run on ``cfg.threads`` workers; the report order
    is fixed by the configuration.
    """
    cfg = cfg or SuiteConfig()
    validate_checks(cfg.checks)
    if not cfg.checks:
        return []
    suite = suite or build_suite(cfg)
    geo = suite_geometries(cfg)
    cases = _cases(cfg, suite, geo)

    def run_one(case):
        check, member, fn = case
        try:
            return fn()
        except UltraparError as err:
            return [_failed(check, member, err)]

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as ex:
            results = list(ex.map(run_one, cases))
    else:
        results = [run_one(c) for c in cases]
    return [r for rs in results for r in rs]


# ---------------------------------------------------------------- output

CSV_FIELDS = ["check", "member", "z0", "R", "rho", "p", "lambda", "lhs", "rhs", "ratio", "verdict"]


def reports_json(reports, extra: dict | None = None) -> str:
    doc = {"reports": [r.to_dict() for r in reports]}
    if extra:
        doc.update(extra)
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def reports_csv(reports) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(CSV_FIELDS)
    for r in reports:
        g, pr = r.geometry, r.params
        wr.writerow([r.check, r.member, " ".join(repr(c) for c in g.get("z0", [])), g.get("R", ""),
                     g.get("rho", ""), pr.get("p", ""), pr.get("lambda", ""),
                     repr(r.lhs), repr(r.rhs), repr(r.ratio), r.verdict])
    return buf.getvalue()


def ladder_csv(report: CheckReport) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["rho", "lhs"])
    for row in report.table or []:
        wr.writerow([repr(row["rho"]), repr(row["lhs"])])
    return buf.getvalue()


def write_reports(reports, out, extra: dict | None = None) -> list:
    """reports.json, checks.csv and one (rho, lhs) CSV per decay report; returns the written paths."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "reports.json", out / "checks.csv"]
    paths[0].write_text(reports_json(reports, extra))
    paths[1].write_text(reports_csv(reports))
    for r in reports:
        if r.check.startswith("decay_") and r.table:
            p = out / f"ladder_{r.member}_{r.check}.csv"
            p.write_text(ladder_csv(r))
            paths.append(p)
    return paths
