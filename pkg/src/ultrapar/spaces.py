"""Lebesgue, Morrey and Sobolev-type norms and the BMO modulus on grid functions.

Region integrals use raster membership: a node belongs to a region when its
coordinates do, and it carries its trapezoid dual-cell volume.  A vector
valued argument (list of grid functions) is measured by its Euclidean length.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import EmptyFamily, GridTooSmall
from .grid import GridFunction, derivatives
from .quadrature import check_mask, clipped_ball_rule, distance_field, integrate, region_mask
from .structure import KolmogorovStructure, group_diameter


def magnitude(u) -> tuple:
    """(|u| values, template grid function) for a grid function or a list of them."""
    if isinstance(u, GridFunction):
        return np.abs(u.values), u
    u = list(u)
    if not u:
        raise ValueError("empty vector of grid functions")
    return np.sqrt(sum(c.values ** 2 for c in u)), u[0]


def lp_norm(u, p: float, region=None, s: KolmogorovStructure | None = None,
            method: str = "raster", n: int = 8, interp: str = "linear") -> float:
    """L^p norm of u over a GroupBall, GroupCube / box, or the whole grid box (region=None).

    ``method="quadrature"`` integrates the interpolant of u with the exact
    region rule instead of counting nodes; it needs the region inside the grid box.
    """
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    vals, g = magnitude(u)
    if method == "quadrature" and region is not None:
        comps = [u] if isinstance(u, GridFunction) else list(u)
        F = lambda Z: np.sqrt(sum(c(Z, method=interp) ** 2 for c in comps)) ** p
        return integrate(s, region, F, n) ** (1.0 / p)
    mask = region_mask(s, g, region)
    if region is not None:
        check_mask(mask)
    return float(np.sum(g.weights[mask] * vals[mask] ** p) ** (1.0 / p))


def region_measure(s: KolmogorovStructure, u: GridFunction, region=None) -> float:
    """Raster measure |Omega cap region| on the grid of u."""
    mask = region_mask(s, u, region)
    return float(np.sum(u.weights[mask]))


# ---------------------------------------------------------------- Morrey

@dataclass
class MorreyParams:
    p: float
    lam: float
    centers: np.ndarray
    radii: np.ndarray
    rho_max: float = field(default=np.inf)
    method: str = "quadrature"
    min_nodes: int = 3

    def __post_init__(self):
        self.centers = np.atleast_2d(np.asarray(self.centers, dtype=float))
        self.radii = np.atleast_1d(np.asarray(self.radii, dtype=float))
        if self.p < 1:
            raise ValueError(f"p must be >= 1, got {self.p}")
        if self.lam < 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if np.any(self.radii <= 0) or np.any(self.radii > self.rho_max * (1 + 1e-12)):
            raise ValueError("radii must lie in (0, rho_max]")
        if self.method not in ("quadrature", "raster"):
            raise ValueError(f"unknown Morrey method {self.method!r}")


def lattice_centers(lower, upper, n: int = 5) -> np.ndarray:
    """n^dim cell-centred lattice of points of the box."""
    lower, upper = np.asarray(lower, float), np.asarray(upper, float)
    f = (np.arange(n) + 0.5) / n
    axes = [a + (b - a) * f for a, b in zip(lower, upper)]
    return np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=-1)


def default_morrey_params(s: KolmogorovStructure, u: GridFunction, p: float, lam: float,
                          n_centers: int = 5, n_radii: int = 6, rho_max: float | None = None,
                          method: str = "quadrature") -> MorreyParams:
    """5^dim lattice of centers and dyadic radii rho_max 2^{-k}, capped at the group diameter."""
    if rho_max is None:
        rho_max = group_diameter(s, u.lower, u.upper)
    radii = rho_max * 2.0 ** -np.arange(n_radii)
    return MorreyParams(p, lam, lattice_centers(u.lower, u.upper, n_centers), radii, rho_max, method)


def _spans(m: np.ndarray) -> int:
    """Smallest number of distinct node indices the mask covers along any axis."""
    return min(np.count_nonzero(m.any(axis=tuple(i for i in range(m.ndim) if i != ax)))
               for ax in range(m.ndim))


def morrey_tables(us: Sequence, mp: MorreyParams, s: KolmogorovStructure) -> list:
    """Morrey tables of several functions on one grid.

    ``quadrature`` (default) integrates the linear interpolants over
    Omega cap B with :func:`clipped_ball_rule`.  ``raster`` counts grid nodes
    and leaves as nan the balls whose raster spans fewer than
    ``mp.min_nodes`` nodes along some axis.
    """
    mags = [magnitude(u) for u in us]
    g = mags[0][1]
    if not all(m[1].same_grid(g) for m in mags):
        raise ValueError("functions live on different grids")
    outs = [np.full((len(mp.centers), len(mp.radii)), np.nan) for _ in us]
    if mp.method == "quadrature":
        comps = [[u] if isinstance(u, GridFunction) else list(u) for u in us]
        for i, c in enumerate(mp.centers):
            for j, rho in enumerate(mp.radii):
                Z, W = clipped_ball_rule(s, c, rho, g.lower, g.upper)
                meas = W.sum()
                if meas <= 0:
                    continue
                for out, cs in zip(outs, comps):
                    v = np.sqrt(sum(ci(Z) ** 2 for ci in cs))
                    out[i, j] = (rho ** mp.lam / meas * (W @ v ** mp.p)) ** (1.0 / mp.p)
        return outs
    wps = [g.weights * v ** mp.p for v, _ in mags]
    for i, c in enumerate(mp.centers):
        d = distance_field(s, g, c)
        for j, rho in enumerate(mp.radii):
            m = d < rho
            meas = g.weights[m].sum()
            if meas > 0 and _spans(m) >= mp.min_nodes:
                for out, wp in zip(outs, wps):
                    out[i, j] = (rho ** mp.lam / meas * wp[m].sum()) ** (1.0 / mp.p)
    return outs


def morrey_table(u, mp: MorreyParams, s: KolmogorovStructure) -> np.ndarray:
    """(rho^lam / |Omega cap B_rho(z0)| int |u|^p)^{1/p} for every (center, radius) pair (nan if unresolved)."""
    return morrey_tables([u], mp, s)[0]


def morrey_norm(u, mp: MorreyParams, s: KolmogorovStructure) -> float:
    """Maximum of the Morrey functional over the finite center x radius family."""
    if len(mp.centers) == 0 or len(mp.radii) == 0:
        raise EmptyFamily("Morrey family has no centers or no radii")
    return morrey_norms([u], mp, s)[0]


def morrey_norms(us: Sequence, mp: MorreyParams, s: KolmogorovStructure) -> list:
    """morrey_norm of several functions on the same grid in one pass."""
    if len(mp.centers) == 0 or len(mp.radii) == 0:
        raise EmptyFamily("Morrey family has no centers or no radii")
    out = []
    for tab in morrey_tables(us, mp, s):
        if np.all(np.isnan(tab)):
            raise EmptyFamily("no ball of the family meets the grid in enough nodes")
        out.append(float(np.nanmax(tab)))
    return out


# ---------------------------------------------------------------- Sobolev

def sobolev_norm(s: KolmogorovStructure, u: GridFunction, p: float, region=None,
                 scheme: str = "central") -> float:
    """(||u||_p^p + sum_{i <= m0} ||d_{x_i} u||_p^p + ||Y u||_p^p)^{1/p}."""
    if min(u.shape) < 3:
        raise GridTooSmall(f"need at least 3 nodes per axis, got {u.shape}")
    db = derivatives(s, u, scheme)
    terms = [u] + list(db.d0) + [db.y]
    return float(sum(lp_norm(t, p, region, s) ** p for t in terms) ** (1.0 / p))


# ---------------------------------------------------------------- BMO

def radius_ladder(rho_max: float, rho_min: float, per_octave: int = 4) -> np.ndarray:
    """Fixed geometric ladder rho_max 2^{-k/per_octave} down to rho_min."""
    k = np.arange(int(np.floor(per_octave * np.log2(rho_max / rho_min))) + 1)
    return rho_max * 2.0 ** (-k / per_octave)


def mean_oscillation(vals: np.ndarray, w: np.ndarray) -> float:
    """(1/|E|) int_E |a - a_E| with a_E computed about a reference value (exactly 0 for constants)."""
    ref = vals[0]
    dev = vals - ref
    mean = np.sum(w * dev) / np.sum(w)
    return float(np.sum(w * np.abs(dev - mean)) / np.sum(w))


def oscillation_table(a: GridFunction, centers, ladder, s: KolmogorovStructure) -> np.ndarray:
    centers = np.atleast_2d(np.asarray(centers, float))
    out = np.full((len(centers), len(ladder)), np.nan)
    for i, c in enumerate(centers):
        d = distance_field(s, a, c)
        for j, rho in enumerate(ladder):
            m = d < rho
            if m.any():
                out[i, j] = mean_oscillation(a.values[m], a.weights[m])
    return out


def default_ladder(s: KolmogorovStructure, a: GridFunction) -> np.ndarray:
    rho_max = group_diameter(s, a.lower, a.upper)
    rho_min = 2.0 * float(np.min(a.spacing[: s.m0]))
    return radius_ladder(rho_max, rho_min)


def bmo_eta(a: GridFunction, R: float, centers, s: KolmogorovStructure, ladder=None) -> float:
    """eta_R(a): sup over centers and ladder radii rho <= R of the mean oscillation on Omega cap B_rho.

    The ladder is fixed independently of R, so eta_R is nondecreasing in R.
    """
    if not R > 0:
        raise ValueError(f"R must be positive, got {R}")
    if ladder is None:
        ladder = default_ladder(s, a)
    ladder = np.asarray(ladder, float)
    use = ladder[ladder <= R]
    centers = np.atleast_2d(np.asarray(centers, float))
    if centers.size == 0 or use.size == 0:
        raise EmptyFamily(f"no center or no ladder radius <= R = {R}")
    tab = oscillation_table(a, centers, use, s)
    if np.all(np.isnan(tab)):
        raise EmptyFamily("no ball of the family meets the grid")
    return float(np.nanmax(tab))


def eta_curve(a: GridFunction, centers, s: KolmogorovStructure, ladder=None):
    """(ladder, eta_R at each ladder radius); one pass over the family."""
    if ladder is None:
        ladder = default_ladder(s, a)
    ladder = np.sort(np.asarray(ladder, float))
    tab = oscillation_table(a, centers, ladder, s)
    return ladder, np.fmax.accumulate(np.nanmax(tab, axis=0))


def vmo_decay_exponent(a: GridFunction, centers, s: KolmogorovStructure, ladder=None) -> float:
    """Fitted slope of log eta_R against log R (VMO shows as eta_R -> 0, a positive slope)."""
    R, eta = eta_curve(a, centers, s, ladder)
    ok = eta > 0
    if ok.sum() < 2:
        return float("inf")
    return float(np.polyfit(np.log(R[ok]), np.log(eta[ok]), 1)[0])
