"""Frozen-coefficient kernel: covariance C(t), the Gaussian fundamental
solution Gamma_0, its D0 gradient, group convolutions and an SDE sampler.

For constant A0 the operator div(A0 D0 u) + <x, B D u> - d_t u has the
fundamental solution

    Gamma_0(z, zeta) = ((4 pi)^N det C(s))^{-1/2} exp(-<C(s)^{-1} w, w> / 4),
    (w, s) = zeta^{-1} o z,  s > 0,

with C(t) = int_0^t E(r) A E(r)^T dr.  As a function of x it is the density of
the linear SDE dX = -B^T X dt + sqrt(2 A) dW started at xi, which gives an
independent route for testing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import fft as sp_fft
from scipy import linalg, ndimage

from .errors import EmptyGrid, NonPositiveHorizon, NonPositiveTime, SingularCovariance
from .grid import GridFunction
from .structure import KolmogorovStructure, _coords, check_ellipticity, compose, exp_neg_BT, invert

VANLOAN_TOL = 1e-12


@dataclass(frozen=True)
class CovarianceResult:
    t: float
    C: np.ndarray
    detC: float
    Cinv: np.ndarray


@dataclass(frozen=True, eq=False)
class FrozenKernel:
    structure: KolmogorovStructure
    A0_frozen: np.ndarray = None
    Atilde: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        s = self.structure
        A = s.A0 if self.A0_frozen is None else np.atleast_2d(np.asarray(self.A0_frozen, dtype=float))
        if A.shape != (s.m0, s.m0):
            raise ValueError(f"frozen matrix must be {s.m0}x{s.m0}")
        check_ellipticity(A, s.Lambda)
        At = np.zeros((s.N, s.N))
        At[:s.m0, :s.m0] = A
        object.__setattr__(self, "A0_frozen", A)
        object.__setattr__(self, "Atilde", At)

    @cached_property
    def _unit(self) -> CovarianceResult:
        return covariance(self, 1.0)

    @cached_property
    def sqrtA(self) -> np.ndarray:
        return np.linalg.cholesky(self.A0_frozen)


def covariance_quadrature(k: FrozenKernel, t: float) -> np.ndarray:
    """C(t) by Gauss-Legendre; the integrand is a polynomial of degree 2r, so r+2 nodes are exact."""
    s = k.structure
    x, w = np.polynomial.legendre.leggauss(s.r + 2)
    r = 0.5 * t * (x + 1.0)
    E = exp_neg_BT(s, r)
    C = np.einsum("k,kij,jl,kml->im", 0.5 * t * w, E, k.Atilde, E)
    return 0.5 * (C + C.T)


def covariance_vanloan(k: FrozenKernel, t: float) -> np.ndarray:
    """C(t) = G1(t) exp(-t B), G1 the top-right block of exp(t [[-B^T, A], [0, B]])."""
    s = k.structure
    N = s.N
    M = np.zeros((2 * N, 2 * N))
    M[:N, :N] = -s.B.T
    M[:N, N:] = k.Atilde
    M[N:, N:] = s.B
    G1 = linalg.expm(t * M)[:N, N:]
    C = G1 @ exp_neg_BT(s, t).T
    return 0.5 * (C + C.T)


def covariance(k: FrozenKernel, t: float) -> CovarianceResult:
    """C(t) computed two ways; raises if they disagree or if C(t) is not SPD."""
    t = float(t)
    if not t > 0:
        raise NonPositiveTime(f"covariance needs t > 0, got {t}")
    C = covariance_quadrature(k, t)
    C2 = covariance_vanloan(k, t)
    scale = max(1.0, float(np.abs(C).max()))
    if np.abs(C - C2).max() > VANLOAN_TOL * scale * 100:
        raise SingularCovariance(f"covariance routes disagree at t={t}: {np.abs(C - C2).max():.3e}")
    try:
        L = np.linalg.cholesky(C)
    except np.linalg.LinAlgError as e:
        raise SingularCovariance(f"C({t}) is not positive definite") from e
    Linv = linalg.solve_triangular(L, np.eye(len(C)), lower=True)
    return CovarianceResult(t, C, float(np.prod(np.diag(L)) ** 2), Linv.T @ Linv)


def dilation_matrix(s: KolmogorovStructure, lam) -> np.ndarray:
    """Diagonal entries lam^{alpha_j} of D_lam, vectorised over lam."""
    return np.asarray(lam, dtype=float)[..., None] ** s.alpha


# ---------------------------------------------------------------- Gamma_0

def _translated(k: FrozenKernel, z, zeta):
    s = k.structure
    a, b = np.broadcast_arrays(_coords(z), _coords(zeta))
    w = compose(s, invert(s, b), a)
    return w[..., :-1], w[..., -1]


def _gauss(k: FrozenKernel, w: np.ndarray, tt: np.ndarray):
    """Gamma_0(w, tt) and C(tt)^{-1} w via the scaling C(tt) = D C(1) D, D = diag(tt^{alpha/2})."""
    s = k.structure
    u = k._unit
    pos = tt > 0
    ts = np.where(pos, tt, 1.0)
    d = dilation_matrix(s, np.sqrt(ts))
    with np.errstate(divide="ignore"):
        # d underflows only for tt ~ 1e-300, where the kernel is 0 off the pole
        y = w / d
    Ciy = y @ u.Cinv
    q = np.sum(y * Ciy, axis=-1)
    logc = -0.5 * (s.N * math.log(4 * math.pi) + math.log(u.detC) + s.Q * np.log(ts))
    g = np.where(pos, np.exp(logc - 0.25 * q), 0.0)
    return g, Ciy / d


def gamma0(k: FrozenKernel, z, zeta):
    """Fundamental solution Gamma_0(z, zeta); zero when t <= tau.  Vectorised over leading axes."""
    w, tt = _translated(k, z, zeta)
    g, _ = _gauss(k, w, tt)
    return float(g) if np.ndim(g) == 0 else g


def grad0_gamma0(k: FrozenKernel, z, zeta) -> np.ndarray:
    """Gradient of Gamma_0 in the first m0 components of x: -C^{-1} w Gamma_0 / 2."""
    w, tt = _translated(k, z, zeta)
    g, Ciw = _gauss(k, w, tt)
    return (-0.5 * Ciw * g[..., None])[..., :k.structure.m0]


def gamma0_grid(k: FrozenKernel, like: GridFunction, zeta) -> GridFunction:
    """Gamma_0(., zeta) sampled on the nodes of ``like``."""
    return like.with_values(gamma0(k, like.points(), zeta), name="Gamma0")


# ---------------------------------------------------------------- convolution

def _convolve_lags(k: FrozenKernel, v: np.ndarray, lower, h, pad: int):
    """Apply all lagged Gaussian-sheared convolutions to a stack of time slices.

    For lag s and source slice f(., tau) the spatial integral
    int G_s(x - E(s) xi) f(xi) dxi equals (G_s * f~)(x) with f~(eta) = f(E(-s) eta)
    because det E = 1.  The shear is applied by cubic interpolation and the
    Gaussian (covariance 2 C(s)) exactly in Fourier space on a zero-padded grid.
    """
    s = k.structure
    N = s.N
    nt = v.shape[-1]
    dt = h[-1]
    nsp = v.shape[:-1]
    npad = tuple(sp_fft.next_fast_len(n + 2 * pad, real=True) for n in nsp)
    # padded spatial node coordinates (pad nodes below, the rest above)
    axes = [lower[j] + h[j] * (np.arange(npad[j]) - pad) for j in range(N)]
    X = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    fr = [2 * np.pi * np.fft.fftfreq(npad[j], d=h[j]) for j in range(N - 1)]
    fr.append(2 * np.pi * np.fft.rfftfreq(npad[-1], d=h[N - 1]))
    K = np.stack(np.meshgrid(*fr, indexing="ij"), axis=-1)
    sax = tuple(range(N))
    live = np.array([np.any(v[..., j]) for j in range(nt)])
    coeffs = [ndimage.spline_filter(v[..., j], order=3, mode="constant") if live[j] else None
              for j in range(nt)]
    out = np.zeros(v.shape)
    out += _trap_weight(0, nt) * v
    core_sl = tuple(slice(pad, pad + n) for n in nsp)
    for lag in range(1, nt):
        # source slices j contribute to output slices j + lag
        js = [j for j in range(nt - lag) if live[j]]
        if not js:
            continue
        sl = lag * dt
        Y = X @ exp_neg_BT(s, -sl).T
        idx = np.stack([(Y[..., j] - lower[j]) / h[j] for j in range(N)])
        sheared = np.empty(npad + (len(js),))
        for c, j in enumerate(js):
            sheared[..., c] = ndimage.map_coordinates(coeffs[j], idx, order=3, mode="constant",
                                                      cval=0.0, prefilter=False)
        C = covariance(k, sl).C
        mult = np.exp(-np.einsum("...i,ij,...j->...", K, C, K))
        F = sp_fft.rfftn(sheared, axes=sax)
        conv = sp_fft.irfftn(F * mult[..., None], s=npad, axes=sax)
        w = _trap_weight(lag, nt)
        for c, j in enumerate(js):
            out[..., j + lag] += w[j] * conv[core_sl + (c,)]
    return out


def _trap_weight(lag: int, nt: int) -> np.ndarray:
    # trapezoid weight (in units of dt) of source slice i - lag when integrating up to slice i
    i = np.arange(lag, nt)
    w = np.where((lag == 0) | (lag == i), 0.5, 1.0)
    return np.where(i == 0, 0.0, w)


def gamma_convolve(k: FrozenKernel, f: GridFunction, mode: str = "plain", pad: int | None = None):
    """Group convolution Gamma_0(f)(z) = int Gamma_0(z, zeta) f(zeta) dzeta on the grid of f.

    ``mode="d0_of_argument"`` returns the list Gamma_0(d_{x_i} f), i = 1..m0,
    with the discrete central derivative applied to f first.
    """
    s = k.structure
    if f.values.size == 0:
        raise EmptyGrid("empty source grid")
    if f.ndim != s.dim:
        raise ValueError(f"source grid has {f.ndim} axes, structure needs {s.dim}")
    if mode not in ("plain", "d0_of_argument"):
        raise ValueError(f"unknown mode {mode!r}")
    if pad is None:
        pad = max(f.shape[:-1])
    h = f.spacing
    if mode == "plain":
        out = _convolve_lags(k, f.values, f.lower, h, pad) * h[-1]
        return f.with_values(out, name=f"Gamma0({f.name})")
    res = []
    for i in range(s.m0):
        df = np.gradient(f.values, h[i], axis=i, edge_order=1)
        out = _convolve_lags(k, df, f.lower, h, pad) * h[-1]
        res.append(f.with_values(out, name=f"Gamma0(d{i + 1} {f.name})"))
    return res


def young_ratio(k: FrozenKernel, f: GridFunction, conv: GridFunction | None = None) -> float:
    """||Gamma_0(f)||_{L^{q*}} / ||f||_{L^q} with q = 2(Q+2)/(Q+4), q* = 2(Q+2)/Q."""
    s = k.structure
    Q = s.Q
    q = 2.0 * (Q + 2) / (Q + 4)
    qs = 2.0 * (Q + 2) / Q
    if conv is None:
        conv = gamma_convolve(k, f)
    num = np.sum(f.weights * np.abs(conv.values) ** qs) ** (1 / qs)
    den = np.sum(f.weights * np.abs(f.values) ** q) ** (1 / q)
    return float(num / den) if den > 0 else 0.0


# ---------------------------------------------------------------- SDE paths

@dataclass(frozen=True)
class PathEnsemble:
    times: np.ndarray
    endpoints: np.ndarray
    paths: np.ndarray | None = None

    def mean(self) -> np.ndarray:
        return self.endpoints.mean(axis=0)

    def cov(self) -> np.ndarray:
        return np.cov(self.endpoints, rowvar=False)


PATH_CHUNK = 4096


def sample_paths(k: FrozenKernel, start, horizon: float, n_paths: int, n_steps: int,
                 seed: int = 0, keep_paths: bool = False) -> PathEnsemble:
    """Euler-Maruyama for dX = -B^T X dt + sqrt(2 A) dW on [0, horizon].

    Paths are simulated in fixed chunks of PATH_CHUNK; chunk c draws from
    ``default_rng([seed, c])`` so results do not depend on scheduling.
    """
    s = k.structure
    if not horizon > 0:
        raise NonPositiveHorizon(f"horizon must be positive, got {horizon}")
    if n_paths < 1 or n_steps < 1:
        raise ValueError("need n_paths >= 1 and n_steps >= 1")
    x0 = _coords(start)
    x0 = x0[:s.N] if x0.size == s.dim else x0
    dt = horizon / n_steps
    drift = -s.B.T
    sig = math.sqrt(2.0 * dt) * k.sqrtA
    ends = np.empty((n_paths, s.N))
    paths = np.empty((n_paths, n_steps + 1, s.N)) if keep_paths else None
    for c, lo in enumerate(range(0, n_paths, PATH_CHUNK)):
        hi = min(lo + PATH_CHUNK, n_paths)
        rng = np.random.default_rng([seed, c])
        X = np.tile(x0, (hi - lo, 1))
        if keep_paths:
            paths[lo:hi, 0] = X
        for n in range(n_steps):
            dW = rng.standard_normal((hi - lo, s.m0))
            Xn = X + dt * (X @ drift.T)
            Xn[:, :s.m0] += dW @ sig.T
            X = Xn
            if keep_paths:
                paths[lo:hi, n + 1] = X
        ends[lo:hi] = X
    return PathEnsemble(np.linspace(0.0, horizon, n_steps + 1), ends, paths)


def euler_moments(k: FrozenKernel, start, horizon: float, n_steps: int):
    """Exact mean and covariance of the Euler-Maruyama endpoint (the discrete-time bias reference)."""
    s = k.structure
    x0 = _coords(start)
    x0 = x0[:s.N] if x0.size == s.dim else x0
    dt = horizon / n_steps
    M = np.eye(s.N) - dt * s.B.T
    P = np.zeros((s.N, s.N))
    m = x0.copy()
    for _ in range(n_steps):
        m = M @ m
        P = M @ P @ M.T + 2 * dt * k.Atilde
    return m, P
