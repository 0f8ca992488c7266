"""Quadrature over group balls and boxes, and raster masks on node grids.

Ball rule.  Inversion and left translation preserve Lebesgue measure and
delta_rho scales it by rho^{Q+2}, so

    int_{B(z0, rho)} F = rho^{Q+2} int_{||w|| < 1} F(z0 o (delta_rho w)^{-1}) dw.

The unit norm ball {sum |w_i|^{1/beta_i} < 1} is split into orthants and
mapped from the simplex by |w_i| = a_i^{beta_i}; the simplex is mapped from
the unit cube by stick breaking.  The resulting weight is polynomial in the
cube variables, so volumes and monomial moments are integrated exactly.
"""

from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np

from .errors import EmptyIntersection, GridTooSmall
from .grid import GridFunction
from .structure import GroupBall, GroupCube, KolmogorovStructure, _Box, _coords, compose, dilate, invert, qdist


@lru_cache(maxsize=32)
def _unit_rule(beta: tuple, n: int):
    d = len(beta)
    beta = np.array(beta)
    x, w = np.polynomial.legendre.leggauss(n)
    x, w = 0.5 * (x + 1), 0.5 * w
    U = np.stack([g.ravel() for g in np.meshgrid(*[x] * d, indexing="ij")], axis=-1)
    W = np.prod(np.meshgrid(*[w] * d, indexing="ij"), axis=0).ravel()
    # stick breaking: a_i = u_i prod_{l<i} (1 - u_l)
    rest = np.cumprod(np.concatenate([np.ones((len(U), 1)), 1 - U[:, :-1]], axis=1), axis=1)
    a = U * rest
    jac = np.prod(rest, axis=1) * np.prod(beta * a ** (beta - 1), axis=1)
    base = a ** beta
    nodes, wts = [], []
    for sign in itertools.product((-1.0, 1.0), repeat=d):
        nodes.append(base * np.array(sign))
        wts.append(W * jac)
    return np.concatenate(nodes), np.concatenate(wts)


def unit_ball_rule(s: KolmogorovStructure, n: int = 8):
    """Nodes and weights for int over {||w|| < 1} (spatial coordinates first, time last)."""
    return _unit_rule(tuple(float(b) for b in s.exponents), int(n))


def ball_rule(s: KolmogorovStructure, center, radius: float, n: int = 8):
    """Nodes and weights for int over the group ball B(center, radius)."""
    w, W = unit_ball_rule(s, n)
    v = dilate(s, radius, w)
    z = compose(s, _coords(center), invert(s, v))
    return z, W * radius ** s.homogeneous_dimension


def box_rule(lower, upper, n: int = 8):
    lower, upper = np.asarray(lower, float), np.asarray(upper, float)
    x, w = np.polynomial.legendre.leggauss(n)
    axes = [0.5 * (a + b) + 0.5 * (b - a) * x for a, b in zip(lower, upper)]
    wts = [0.5 * (b - a) * w for a, b in zip(lower, upper)]
    Z = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=-1)
    W = np.prod(np.meshgrid(*wts, indexing="ij"), axis=0).ravel()
    return Z, W


def region_rule(s: KolmogorovStructure, region, n: int = 8):
    """Quadrature rule for a GroupBall, a homogeneous box, or a GroupCube with m0 = 1."""
    if isinstance(region, GroupBall):
        return ball_rule(s, region.center, region.radius, n)
    if isinstance(region, _Box) or (isinstance(region, GroupCube) and region.m0 == 1):
        return box_rule(region.lower, region.upper, n)
    raise NotImplementedError("no quadrature rule for this region; use the raster method")


def integrate(s: KolmogorovStructure, region, F, n: int = 8) -> float:
    """int_region F for a callable F on points with trailing coordinate axis."""
    Z, W = region_rule(s, region, n)
    return float(W @ np.asarray(F(Z), dtype=float))


def region_bbox(s: KolmogorovStructure, region):
    if isinstance(region, GroupBall):
        return region.bbox(s)
    return region.lower, region.upper


def inside_box(s, region, lower, upper, tol: float = 1e-12) -> bool:
    lo, hi = region_bbox(s, region)
    return bool(np.all(lo >= np.asarray(lower) - tol) and np.all(hi <= np.asarray(upper) + tol))


def clipped_ball_rule(s: KolmogorovStructure, center, radius: float, lower, upper, n: int = 8,
                      n_points: int = 6000, min_fraction: float = 0.25):
    """Nodes and weights for int over Omega cap B(center, radius), Omega the box [lower, upper].

    A ball inside Omega gets the exact ball rule.  A ball crossing the box
    boundary keeps the ball-rule nodes that fall in Omega, as long as they
    carry at least ``min_fraction`` of the ball volume.  Otherwise (Omega a
    small part of a large ball) a midpoint lattice of about ``n_points``
    nodes on bbox(B) cap Omega is masked by ball membership.
    """
    lower, upper = np.asarray(lower, float), np.asarray(upper, float)
    ball = GroupBall(center, radius)
    if inside_box(s, ball, lower, upper):
        return ball_rule(s, ball.center, radius, n)
    Z, W = ball_rule(s, ball.center, radius, n)
    keep = np.all((Z >= lower) & (Z <= upper), axis=-1)
    if W[keep].sum() >= min_fraction * W.sum():
        return Z[keep], W[keep]
    blo, bhi = ball.bbox(s)
    lo, hi = np.maximum(blo, lower), np.minimum(bhi, upper)
    if np.any(hi <= lo):
        return np.empty((0, s.dim)), np.empty(0)
    m = max(4, int(round(n_points ** (1.0 / s.dim))))
    f = (np.arange(m) + 0.5) / m
    axes = [a + (b - a) * f for a, b in zip(lo, hi)]
    Z = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=-1)
    keep = ball.contains(s, Z)
    return Z[keep], np.full(int(keep.sum()), float(np.prod((hi - lo) / m)))


# ---------------------------------------------------------------- raster masks

def _index_window(u: GridFunction, lo, hi):
    sl = []
    for ax, a, b in zip(u.axes, lo, hi):
        i0 = int(np.searchsorted(ax, a, side="left"))
        i1 = int(np.searchsorted(ax, b, side="right"))
        sl.append(slice(max(i0, 0), min(i1, len(ax))))
    return tuple(sl)


def region_mask(s: KolmogorovStructure, u: GridFunction, region=None) -> np.ndarray:
    """Boolean mask of grid nodes lying in ``region`` (None = whole box)."""
    if region is None:
        return np.ones(u.shape, dtype=bool)
    mask = np.zeros(u.shape, dtype=bool)
    lo, hi = region_bbox(s, region)
    win = _index_window(u, lo, hi)
    if any(w.stop <= w.start for w in win):
        return mask
    axes = [ax[w] for ax, w in zip(u.axes, win)]
    P = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    mask[win] = region.contains(s, P)
    return mask


def check_mask(mask: np.ndarray, min_nodes: int = 3):
    if not mask.any():
        raise EmptyIntersection("region does not contain any grid node")
    for ax in range(mask.ndim):
        other = tuple(i for i in range(mask.ndim) if i != ax)
        if np.count_nonzero(mask.any(axis=other)) < min_nodes:
            raise GridTooSmall(f"region spans fewer than {min_nodes} nodes along axis {ax}")


def distance_field(s: KolmogorovStructure, u: GridFunction, center) -> np.ndarray:
    """d(center, z) at every node; ball masks for any radius follow by thresholding."""
    return qdist(s, _coords(center), u.points())
