"""Block structure of the drift matrix and the associated Lie-group geometry.

Points of R^{N+1} are handled as float arrays whose last axis has length N+1
(spatial coordinates first, time last).  Every geometric operation is
vectorised over leading axes; :class:`SpaceTimePoint` is a thin immutable
wrapper for single points and is accepted anywhere an array is.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.stats import qmc

from .errors import (
    EllipticityViolation,
    NonIncreasingRanks,
    NonPositiveLambda,
    NonPositiveRadius,
    RankDeficientBlock,
    ShapeMismatch,
)


@dataclass(frozen=True)
class SpaceTimePoint:
    x: tuple
    t: float

    def __post_init__(self):
        x = tuple(float(v) for v in np.atleast_1d(self.x))
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "t", float(self.t))
        if not all(math.isfinite(v) for v in x + (self.t,)):
            raise ValueError("SpaceTimePoint components must be finite")

    @property
    def array(self) -> np.ndarray:
        return np.array(self.x + (self.t,))

    @classmethod
    def from_array(cls, z) -> "SpaceTimePoint":
        z = np.asarray(z, dtype=float)
        return cls(tuple(z[:-1]), float(z[-1]))


def _coords(z) -> np.ndarray:
    if isinstance(z, SpaceTimePoint):
        return z.array
    return np.asarray(z, dtype=float)


def _wrap(result: np.ndarray, *inputs):
    if any(isinstance(z, SpaceTimePoint) for z in inputs) and result.ndim == 1:
        return SpaceTimePoint.from_array(result)
    return result


@dataclass(frozen=True, eq=False)
class KolmogorovStructure:
    """Validated block drift structure (nilpotent B, full-rank blocks, elliptic A0).  Build it with :func:`build_structure`."""

    blocks: tuple
    B: np.ndarray
    A0: np.ndarray
    Lambda: float
    alpha: np.ndarray = field(repr=False)

    @property
    def N(self) -> int:
        return int(sum(self.blocks))

    @property
    def m0(self) -> int:
        return int(self.blocks[0])

    @property
    def r(self) -> int:
        return len(self.blocks) - 1

    @property
    def Q(self) -> int:
        return int(sum((2 * k + 1) * m for k, m in enumerate(self.blocks)))

    @property
    def homogeneous_dimension(self) -> int:
        """Q + 2, the volume-scaling exponent of space-time balls."""
        return self.Q + 2

    @property
    def dim(self) -> int:
        return self.N + 1

    @cached_property
    def exponents(self) -> np.ndarray:
        """Dilation exponents of all N+1 coordinates (time last)."""
        return np.append(self.alpha, 2.0)

    @cached_property
    def block_index(self) -> np.ndarray:
        return np.repeat(np.arange(len(self.blocks)), self.blocks)

    @cached_property
    def _bt_powers(self) -> list:
        # (B^T)^k / k! for k = 0..r; B^{r+1} = 0 so the series stops there
        out, P = [], np.eye(self.N)
        for k in range(self.r + 1):
            out.append(P / math.factorial(k))
            P = P @ self.B.T
        return out

    @cached_property
    def unit_ball_volume(self) -> float:
        return unit_ball_volume(self)

    def to_dict(self) -> dict:
        bl, offs = [], np.cumsum((0,) + self.blocks)
        for k in range(1, len(self.blocks)):
            bl.append(self.B[offs[k - 1]:offs[k], offs[k]:offs[k + 1]].tolist())
        return {"blocks": list(self.blocks), "B_blocks": bl, "A0": self.A0.tolist(),
                "Lambda": self.Lambda}


def build_structure(blocks: Sequence[int], B_blocks: Sequence, A0, Lambda: float) -> KolmogorovStructure:
    """Assemble and validate the drift matrix from its superdiagonal blocks.

    ``B_blocks[k-1]`` is the ``m_{k-1} x m_k`` block B_k.  Raises
    NonIncreasingRanks, RankDeficientBlock, EllipticityViolation or
    ShapeMismatch on invalid input.
    """
    blocks = tuple(int(m) for m in blocks)
    if not blocks or any(m < 1 for m in blocks):
        raise ShapeMismatch(f"blocks must be a nonempty list of positive integers, got {blocks}")
    for k in range(1, len(blocks)):
        if blocks[k] > blocks[k - 1]:
            raise NonIncreasingRanks(f"m_{k} = {blocks[k]} exceeds m_{k-1} = {blocks[k-1]}")
    if len(B_blocks) != len(blocks) - 1:
        raise ShapeMismatch(f"expected {len(blocks) - 1} drift blocks, got {len(B_blocks)}")

    N = sum(blocks)
    offs = np.cumsum((0,) + blocks)
    B = np.zeros((N, N))
    for k in range(1, len(blocks)):
        Bk = np.atleast_2d(np.asarray(B_blocks[k - 1], dtype=float))
        if Bk.shape != (blocks[k - 1], blocks[k]):
            raise ShapeMismatch(f"B_{k} has shape {Bk.shape}, expected {(blocks[k - 1], blocks[k])}")
        if np.linalg.matrix_rank(Bk) != blocks[k]:
            raise RankDeficientBlock(f"B_{k} must have rank {blocks[k]}")
        B[offs[k - 1]:offs[k], offs[k]:offs[k + 1]] = Bk

    A0 = np.atleast_2d(np.asarray(A0, dtype=float))
    if A0.shape != (blocks[0], blocks[0]):
        raise ShapeMismatch(f"A0 has shape {A0.shape}, expected {(blocks[0], blocks[0])}")
    if not np.allclose(A0, A0.T, rtol=0, atol=1e-14):
        raise EllipticityViolation("A0 must be symmetric")
    Lambda = float(Lambda)
    if not Lambda >= 1.0:
        raise EllipticityViolation(f"Lambda must be >= 1, got {Lambda}")
    check_ellipticity(A0, Lambda)

    alpha = np.repeat(2.0 * np.arange(len(blocks)) + 1.0, blocks)
    return KolmogorovStructure(blocks, B, A0, Lambda, alpha)


def check_ellipticity(A, Lambda: float, tol: float = 1e-12):
    """Raise EllipticityViolation unless every eigenvalue of A lies in [1/Lambda, Lambda]."""
    A = np.asarray(A, dtype=float)
    ev = np.linalg.eigvalsh(0.5 * (A + np.swapaxes(A, -1, -2)))
    lo, hi = ev.min(), ev.max()
    if lo < 1.0 / Lambda - tol or hi > Lambda + tol:
        raise EllipticityViolation(
            f"eigenvalues in [{lo:.6g}, {hi:.6g}] outside [{1.0 / Lambda:.6g}, {Lambda:.6g}]")


def structure_from_dict(d: dict) -> KolmogorovStructure:
    return build_structure(d["blocks"], d.get("B_blocks", []), d["A0"], d.get("Lambda", 2.0))


def prototype(Lambda: float = 2.0) -> KolmogorovStructure:
    """Blocks (1,1), B_1 = [1], A0 = [1]: the operator d_11 + x_1 d_2 - d_t."""
    return build_structure((1, 1), [[[1.0]]], [[1.0]], Lambda)


def three_block(Lambda: float = 2.0) -> KolmogorovStructure:
    """Blocks (2,1,1) with A0 = I."""
    return build_structure((2, 1, 1), [[[1.0], [0.0]], [[1.0]]], np.eye(2), Lambda)


# ---------------------------------------------------------------- group law

def exp_neg_BT(s: KolmogorovStructure, tau) -> np.ndarray:
    """E(tau) = exp(-tau B^T) from the finite nilpotent series; vectorised over tau."""
    tau = np.asarray(tau, dtype=float)
    out = np.zeros(tau.shape + (s.N, s.N))
    for k, P in enumerate(s._bt_powers):
        out += ((-tau) ** k)[..., None, None] * P
    return out


def _apply_E(s: KolmogorovStructure, tau: np.ndarray, x: np.ndarray) -> np.ndarray:
    # E(tau) x without materialising one matrix per point
    out = np.zeros(np.broadcast_shapes(tau.shape + (s.N,), x.shape))
    for k, P in enumerate(s._bt_powers):
        out = out + ((-tau) ** k)[..., None] * (x @ P.T)
    return out


def compose(s: KolmogorovStructure, z, zeta):
    """Group product (x,t) o (xi,tau) = (xi + E(tau) x, t + tau)."""
    a, b = _coords(z), _coords(zeta)
    x, t = a[..., :-1], a[..., -1]
    xi, tau = b[..., :-1], b[..., -1]
    res = np.concatenate([xi + _apply_E(s, tau, x), (t + tau)[..., None]], axis=-1)
    return _wrap(res, z, zeta)


def invert(s: KolmogorovStructure, z):
    """(x,t)^{-1} = (-E(-t) x, -t)."""
    a = _coords(z)
    x, t = a[..., :-1], a[..., -1]
    res = np.concatenate([-_apply_E(s, -t, x), (-t)[..., None]], axis=-1)
    return _wrap(res, z)


def dilate(s: KolmogorovStructure, lam, z):
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0):
        raise NonPositiveLambda(f"dilation factor must be positive, got {lam}")
    a = _coords(z)
    res = lam[..., None] ** s.exponents * a
    return _wrap(res, z)


def hnorm(s: KolmogorovStructure, z):
    """Homogeneous norm sum_j |x_j|^{1/alpha_j} + |t|^{1/2}."""
    a = np.abs(_coords(z))
    return np.sum(a ** (1.0 / s.exponents), axis=-1)


def qdist(s: KolmogorovStructure, z, zeta):
    """Quasidistance d(z, zeta) = ||zeta^{-1} o z||, with zeta^{-1} o z = (x - E(t - tau) xi, t - tau)."""
    a, b = _coords(z), _coords(zeta)
    lag = a[..., -1] - b[..., -1]
    w = a[..., :-1] - _apply_E(s, lag, b[..., :-1])
    return hnorm(s, np.concatenate([w, lag[..., None]], axis=-1))


def gauge_box(s: KolmogorovStructure, z):
    """Smallest r with z in the origin cube Q_r(0,0) = {|x_j| <= r^alpha_j, |t| <= r^2}."""
    a = np.abs(_coords(z))
    return np.max(a ** (1.0 / s.exponents), axis=-1)


# ---------------------------------------------------------------- balls

def unit_ball_volume(s: KolmogorovStructure) -> float:
    """|B(0,1)| in closed form.

    Inversion is measure preserving, so B(0,1) has the volume of the norm ball
    {sum |w_i|^{1/beta_i} < 1}, a Dirichlet integral:
    2^{N+1} prod Gamma(1+beta_i) / Gamma(1 + sum beta_i).
    """
    beta = s.exponents
    logv = (len(beta) * math.log(2.0) + sum(math.lgamma(1 + b) for b in beta)
            - math.lgamma(1 + beta.sum()))
    return math.exp(logv)


def estimate_unit_ball_volume(s: KolmogorovStructure, n_points: int = 2 ** 16, seed: int = 0) -> float:
    """Scrambled-Sobol estimate of |B(0,1)| by membership counting.

    The ball fills a tiny fraction of its bounding box once N > 2, so points
    are drawn as z = w^{-1} with w_i = +-a_i^{beta_i}, a uniform in the unit
    cube, and weighted by the Jacobian prod beta_i a_i^{beta_i - 1}.
    """
    beta = s.exponents
    sampler = qmc.Sobol(d=2 * s.dim, scramble=True, seed=seed)
    u = sampler.random(n_points)
    a, sign = u[:, :s.dim], np.where(u[:, s.dim:] < 0.5, -1.0, 1.0)
    w = sign * a ** beta
    jac = np.prod(beta * a ** (beta - 1), axis=-1)
    inside = qdist(s, np.zeros(s.dim), invert(s, w)) < 1.0
    return float(2.0 ** s.dim * np.mean(jac * inside))


def ball_volume(s: KolmogorovStructure, R: float) -> float:
    if not R > 0:
        raise NonPositiveRadius(f"radius must be positive, got {R}")
    return s.unit_ball_volume * R ** s.homogeneous_dimension


@dataclass(frozen=True, eq=False)
class GroupBall:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _coords(self.center).copy())
        if not self.radius > 0:
            raise NonPositiveRadius(f"radius must be positive, got {self.radius}")

    def contains(self, s: KolmogorovStructure, pts) -> np.ndarray:
        return qdist(s, self.center, pts) < self.radius

    def volume(self, s: KolmogorovStructure) -> float:
        return ball_volume(s, self.radius)

    def bbox(self, s: KolmogorovStructure, n_time: int = 401):
        """Axis-aligned bounding box (lower, upper) of the ball.

        B(z0, R) = {(E(-s)(x0 - y), t0 - s) : ||(y, s)|| < R}.  For fixed s a
        linear functional of y over {sum |y_j|^{1/alpha_j} < r} is extremal at
        the axis points y = +-r^{alpha_j} e_j, so scanning s suffices.
        """
        R = self.radius
        x0, t0 = self.center[:-1], self.center[-1]
        sv = np.linspace(-R * R, R * R, n_time)
        rad = np.maximum(R - np.sqrt(np.abs(sv)), 0.0)
        cand = [np.zeros((n_time, s.N))]
        for j in range(s.N):
            e = np.zeros(s.N)
            e[j] = 1.0
            amp = (rad ** s.alpha[j])[:, None] * e
            cand += [amp, -amp]
        E = exp_neg_BT(s, -sv)
        xs = np.stack([np.einsum("sij,sj->si", E, x0 - y) for y in cand])
        lo = np.append(xs.min(axis=(0, 1)), t0 - R * R)
        hi = np.append(xs.max(axis=(0, 1)), t0 + R * R)
        pad = 0.01 * (hi - lo) + 1e-12
        return lo - pad, hi + pad


@dataclass(frozen=True, eq=False)
class GroupCube:
    """Axis-aligned cube K_R x S_R x I_R around ``center``.

    ``halfwidth`` holds the per-axis half widths (spatial axes then time).
    Membership in the first block uses the Euclidean norm |x'| <= R.
    """

    center: np.ndarray
    R: float
    halfwidth: np.ndarray
    m0: int

    @property
    def lower(self) -> np.ndarray:
        return self.center - self.halfwidth

    @property
    def upper(self) -> np.ndarray:
        return self.center + self.halfwidth

    def bbox(self, s=None):
        return self.lower, self.upper

    def contains(self, s, pts) -> np.ndarray:
        d = _coords(pts) - self.center
        ok = np.linalg.norm(d[..., :self.m0], axis=-1) <= self.R
        ok &= np.all(np.abs(d[..., self.m0:]) <= self.halfwidth[self.m0:], axis=-1)
        return ok

    def volume(self, s=None) -> float:
        m0 = self.m0
        ball = math.pi ** (m0 / 2) / math.gamma(m0 / 2 + 1) * self.R ** m0
        return ball * float(np.prod(2 * self.halfwidth[m0:]))


def cube_bounds(s: KolmogorovStructure, center, R: float) -> GroupCube:
    """Cube with |x'| <= R, |x_j| <= (Lambda N^2 R)^{2k+1} in block k >= 1, |t - t0| <= R^2/2."""
    if not R > 0:
        raise NonPositiveRadius(f"radius must be positive, got {R}")
    c = _coords(center).copy()
    scale = s.Lambda * s.N ** 2 * R
    hw = np.where(s.block_index == 0, R, scale ** s.alpha)
    return GroupCube(c, float(R), np.append(hw, 0.5 * R * R), s.m0)


def homogeneous_box(s: KolmogorovStructure, center, R: float, time_factor: float = 1.0) -> GroupCube:
    """Dilation-adapted box {|x_j - x0_j| <= R^alpha_j, |t - t0| <= time_factor R^2}."""
    if not R > 0:
        raise NonPositiveRadius(f"radius must be positive, got {R}")
    c = _coords(center).copy()
    hw = R ** s.exponents
    hw[-1] *= time_factor
    return _Box(c, float(R), hw, s.m0)


class _Box(GroupCube):
    def contains(self, s, pts) -> np.ndarray:
        return np.all(np.abs(_coords(pts) - self.center) <= self.halfwidth, axis=-1)

    def volume(self, s=None) -> float:
        return float(np.prod(2 * self.halfwidth))


# ---------------------------------------------------------------- sampled constants

def _unit_norm_ball_samples(s: KolmogorovStructure, n: int, rng) -> np.ndarray:
    # uniform samples of {||w|| < 1}: with |w_i| = a_i^{beta_i} the density of a on the
    # simplex is prod a_i^{beta_i - 1}, i.e. Dirichlet(beta, 1) with the slack dropped
    beta = s.exponents
    a = rng.dirichlet(np.append(beta, 1.0), size=n)[:, :-1]
    w = rng.choice([-1.0, 1.0], size=a.shape) * a ** beta
    axes = np.concatenate([np.eye(s.dim), -np.eye(s.dim)]) * (1 - 1e-12)
    return np.concatenate([w, axes])


def measure_c0(s: KolmogorovStructure, n_samples: int = 20000, seed: int = 0) -> float:
    """Sampled constant with Q_{R/c0}(0,0) in B_R(0,0) in Q_{c0 R}(0,0).

    By homogeneity it suffices to take R = 1: c0 bounds both d(0, .) on the
    unit origin cube and the cube gauge on the unit ball.
    """
    rng = np.random.default_rng(seed)
    corners = np.array(np.meshgrid(*[[-1.0, 1.0]] * s.dim, indexing="ij")).reshape(s.dim, -1).T
    cube_pts = np.concatenate([rng.uniform(-1, 1, size=(n_samples, s.dim)), corners])
    c_inner = qdist(s, np.zeros(s.dim), cube_pts).max()
    ball_pts = invert(s, _unit_norm_ball_samples(s, n_samples, rng))
    c_outer = gauge_box(s, ball_pts).max()
    return float(max(c_inner, c_outer) * 1.001)


def quasi_symmetry_constant(s: KolmogorovStructure, n_pairs: int = 10000, seed: int = 0,
                            half_width: float = 1.0) -> float:
    """Sampled sup d(z,zeta)/d(zeta,z) over random pairs in a cube."""
    rng = np.random.default_rng(seed)
    z = rng.uniform(-half_width, half_width, size=(n_pairs, s.dim))
    w = rng.uniform(-half_width, half_width, size=(n_pairs, s.dim))
    return float(np.max(qdist(s, z, w) / qdist(s, w, z)))


def quasi_triangle_constant(s: KolmogorovStructure, n_triples: int = 10000, seed: int = 0,
                            half_width: float = 1.0) -> float:
    """Sampled sup d(z,zeta) / (d(z,z') + d(z',zeta)) over random triples."""
    rng = np.random.default_rng(seed)
    z, zp, w = (rng.uniform(-half_width, half_width, size=(n_triples, s.dim)) for _ in range(3))
    return float(np.max(qdist(s, z, w) / (qdist(s, z, zp) + qdist(s, zp, w))))


def group_diameter(s: KolmogorovStructure, lower, upper, n_samples: int = 4000, seed: int = 0) -> float:
    """Sampled sup of d over pairs of points of the box (corners always included)."""
    lower, upper = np.asarray(lower, float), np.asarray(upper, float)
    corners = np.array(np.meshgrid(*zip(lower, upper), indexing="ij")).reshape(s.dim, -1).T
    rng = np.random.default_rng(seed)
    pts = np.concatenate([corners, rng.uniform(lower, upper, size=(n_samples, s.dim))])
    a = pts[:, None, :] if len(pts) <= 600 else None
    if a is not None:
        return float(qdist(s, a, pts[None, :, :]).max())
    idx = rng.integers(0, len(pts), size=(200000, 2))
    d = qdist(s, pts[idx[:, 0]], pts[idx[:, 1]]).max()
    dc = qdist(s, corners[:, None, :], corners[None, :, :]).max()
    return float(max(d, dc))
