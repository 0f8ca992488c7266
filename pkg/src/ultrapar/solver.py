"""Finite-difference marcher and frozen-coefficient convolution solver for

    div(A D0 u) + <x, B D u> - d_t u = g + div f

on a space-time box, plus the weak-form residual and cutoff test functions.

The marcher advances d_t u = div(A D0 u) + <x, B D u> - g - div f from the
bottom time slice: backward Euler for the diffusion (m0 directions, sparse
LU), explicit first-order upwinding for the transport term, and g, div f
taken at the new time level.  Dirichlet data are imposed on every face of a
diffusion axis and on the inflow part of every transport face.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .coefficients import CoefficientField, constant
from .errors import CFLViolation, EllipticityViolation, ImplicitSolveDiverged, SupportViolation
from .grid import GridFunction, _upwind, derivatives
from .kernel import FrozenKernel, gamma_convolve
from .quadrature import check_mask, region_mask
from .structure import GroupCube, KolmogorovStructure


@dataclass(eq=False)
class ProblemSpec:
    structure: KolmogorovStructure
    lower: np.ndarray
    upper: np.ndarray
    shape: tuple
    a_field: CoefficientField | None = None
    g: Callable | None = None
    f: Sequence[Callable] | None = None
    data: Callable | None = None
    name: str = ""

    def __post_init__(self):
        s = self.structure
        self.lower = np.asarray(self.lower, float)
        self.upper = np.asarray(self.upper, float)
        self.shape = tuple(int(n) for n in self.shape)
        if len(self.shape) != s.dim or self.lower.size != s.dim:
            raise ValueError(f"box and shape need {s.dim} axes")
        if self.a_field is None:
            self.a_field = constant(s.m0, s.A0)
        if self.f is not None and len(self.f) != s.m0:
            raise ValueError(f"flux needs exactly m0 = {s.m0} components")

    @classmethod
    def on_cube(cls, structure, cube: GroupCube, shape, **kw) -> "ProblemSpec":
        return cls(structure, cube.lower, cube.upper, shape, **kw)

    def template(self) -> GridFunction:
        return GridFunction(self.lower, self.upper, np.zeros(self.shape), self.name)

    def g_values(self, pts) -> np.ndarray:
        return np.zeros(pts.shape[:-1]) if self.g is None else np.asarray(self.g(pts), float)

    def f_values(self, pts) -> list:
        if self.f is None:
            return [np.zeros(pts.shape[:-1]) for _ in range(self.structure.m0)]
        return [np.asarray(fi(pts), float) for fi in self.f]

    def data_values(self, pts) -> np.ndarray:
        return np.zeros(pts.shape[:-1]) if self.data is None else np.asarray(self.data(pts), float)


@dataclass
class SolverConfig:
    dt: float | None = None
    cfl_safety: float = 0.9
    scheme: str = "imex-upwind"
    tol: float = 1e-10


# ---------------------------------------------------------------- cutoffs

def _smoothstep(x: np.ndarray, order: int):
    """C^order step from 1 (x <= 0) to 0 (x >= 1) and its derivative."""
    x = np.clip(x, 0.0, 1.0)
    n = order
    # S(x) = x^{n+1} sum_k C(n+k, k) C(2n+1, n-k) (-x)^k
    S = np.zeros_like(x)
    dS = np.zeros_like(x)
    for k in range(n + 1):
        c = math.comb(n + k, k) * math.comb(2 * n + 1, n - k) * (-1) ** k
        S += c * x ** (n + k + 1)
        dS += c * (n + k + 1) * x ** (n + k)
    return 1.0 - S, -dS


@dataclass(frozen=True)
class CutoffSpec:
    """xi = 1 on the scaled Euclidean ball of radius rho, 0 outside radius R, |D xi| <= c / (R - rho)."""

    center: tuple
    rho: float
    R: float
    order: int = 2
    scale: tuple | None = None

    def __post_init__(self):
        if not 0 <= self.rho < self.R:
            raise ValueError("need 0 <= rho < R")

    def _r(self, pts):
        d = np.asarray(pts, float) - np.asarray(self.center, float)
        if self.scale is not None:
            d = d / np.asarray(self.scale, float)
        r = np.sqrt(np.sum(d * d, axis=-1))
        return d, r

    def value(self, pts) -> np.ndarray:
        _, r = self._r(pts)
        return _smoothstep((r - self.rho) / (self.R - self.rho), self.order)[0]

    __call__ = value

    def grad(self, pts) -> np.ndarray:
        d, r = self._r(pts)
        _, dS = _smoothstep((r - self.rho) / (self.R - self.rho), self.order)
        unit = d / np.maximum(r, 1e-300)[..., None]
        if self.scale is not None:
            unit = unit / np.asarray(self.scale, float)
        return (dS / (self.R - self.rho))[..., None] * unit

    def gradient_constant(self) -> float:
        """sup |xi'| of the profile, i.e. the c in |D xi| <= c / (R - rho) for unit scale."""
        x = np.linspace(0, 1, 20001)
        return float(np.max(np.abs(_smoothstep(x, self.order)[1])))


# ---------------------------------------------------------------- marcher

def _diff_1d(n: int, h: float):
    """Forward difference (faces x nodes) and central difference (nodes x nodes) matrices."""
    F = sp.diags([-np.ones(n - 1), np.ones(n - 1)], [0, 1], shape=(n - 1, n)) / h
    Cd = sp.diags([-np.ones(n - 1), np.ones(n - 1)], [-1, 1], shape=(n, n)).tolil() / (2 * h)
    return F.tocsr(), Cd.tocsr()


def _embed(op, axis: int, shape: tuple):
    out = sp.identity(1, format="csr")
    for j, n in enumerate(shape):
        out = sp.kron(out, op if j == axis else sp.identity(n, format="csr"), format="csr")
    return out


class _Marcher:
    def __init__(self, ps: ProblemSpec, cfg: SolverConfig):
        s = ps.structure
        self.ps, self.cfg, self.s = ps, cfg, s
        self.grid = ps.template()
        self.sshape = ps.shape[:-1]
        self.h = self.grid.spacing
        self.axes = self.grid.axes
        X = np.stack(np.meshgrid(*self.axes[:-1], indexing="ij"), axis=-1)
        self.X = X
        self.vel = X @ s.B
        self.transport_axes = [j for j in range(s.N) if s.block_index[j] >= 1]
        self.diff_axes = list(range(s.m0))
        self._dirichlet_mask()
        self._face_points()
        self.dt = self._time_step()

    def _dirichlet_mask(self):
        s, shp = self.s, self.sshape
        idx = np.indices(shp)
        m = np.zeros(shp, dtype=bool)
        for i in self.diff_axes:
            m |= (idx[i] == 0) | (idx[i] == shp[i] - 1)
        for j in self.transport_axes:
            v = self.vel[..., j]
            m |= (idx[j] == 0) & (v < 0)
            m |= (idx[j] == shp[j] - 1) & (v > 0)
        self.bmask = m
        self.I = np.flatnonzero(~m.ravel())
        self.B = np.flatnonzero(m.ravel())

    def _face_points(self):
        # spatial face midpoints along each diffusion axis
        self.faces = []
        for i in self.diff_axes:
            axes = list(self.axes[:-1])
            axes[i] = 0.5 * (axes[i][1:] + axes[i][:-1])
            self.faces.append(np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1))
        self.F1, self.C1 = [], []
        for i in range(self.s.N):
            F, C = _diff_1d(self.sshape[i], self.h[i])
            self.F1.append(F)
            self.C1.append(C)

    def _time_step(self):
        s, cfg = self.s, self.cfg
        dt_grid = self.h[-1]
        lim = np.inf
        for j in self.transport_axes:
            vmax = np.abs(self.vel[..., j]).max()
            if vmax > 0:
                lim = min(lim, self.h[j] / vmax)
        lim *= cfg.cfl_safety
        if cfg.dt is not None:
            if cfg.dt > lim:
                raise CFLViolation(f"dt = {cfg.dt:.4g} exceeds the transport limit {lim:.4g}")
            nsub = max(1, math.ceil(dt_grid / cfg.dt - 1e-9))
        else:
            nsub = max(1, math.ceil(dt_grid / lim - 1e-9))
        self.nsub = nsub
        return dt_grid / nsub

    def _with_time(self, P, t):
        return np.concatenate([P, np.full(P.shape[:-1] + (1,), t)], axis=-1)

    def diffusion_matrix(self, t: float):
        s, shp = self.s, self.sshape
        M = sp.csr_matrix((int(np.prod(shp)),) * 2)
        A_nodes = self.ps.a_field(self._with_time(self.X, t))
        for k, i in enumerate(self.diff_axes):
            a_face = self.ps.a_field(self._with_time(self.faces[k], t))[..., i, i]
            Fi = _embed(self.F1[i], i, shp)
            M = M - Fi.T @ sp.diags(a_face.ravel()) @ Fi
            for j in self.diff_axes:
                if j == i:
                    continue
                Ci = _embed(self.C1[i], i, shp)
                Cj = _embed(self.C1[j], j, shp)
                M = M + Ci @ sp.diags(A_nodes[..., i, j].ravel()) @ Cj
        self._check_ellipticity(A_nodes)
        return M.tocsr()

    def _check_ellipticity(self, A):
        ev = np.linalg.eigvalsh(0.5 * (A + np.swapaxes(A, -1, -2)))
        L = self.s.Lambda
        if ev.min() < 1 / L - 1e-12 or ev.max() > L + 1e-12:
            raise EllipticityViolation(
                f"coefficient eigenvalues in [{ev.min():.4g}, {ev.max():.4g}] outside [{1 / L:.4g}, {L:.4g}]")

    def transport(self, u: np.ndarray) -> np.ndarray:
        out = np.zeros_like(u)
        for j in self.transport_axes:
            v = self.vel[..., j]
            out += v * _upwind(u, self.h[j], j, v)
        return out

    def div_f(self, t: float) -> np.ndarray:
        ps = self.ps
        if ps.f is None:
            return np.zeros(self.sshape)
        out = np.zeros(self.sshape)
        for k, i in enumerate(self.diff_axes):
            fi = np.asarray(ps.f[i](self._with_time(self.faces[k], t)), float)
            d = np.diff(fi, axis=i) / self.h[i]
            pad = [(0, 0)] * len(self.sshape)
            pad[i] = (1, 1)
            out += np.pad(d, pad)
        return out

    def run(self) -> GridFunction:
        ps, s = self.ps, self.s
        nt = ps.shape[-1]
        times = self.axes[-1]
        U = np.empty(ps.shape)
        u = ps.data_values(self._with_time(self.X, times[0]))
        U[..., 0] = u
        I, Bn = self.I, self.B
        static = not ps.a_field.time_dependent
        lu = None
        t = times[0]
        for n in range(nt - 1):
            for k in range(self.nsub):
                t_new = times[n] + (k + 1) * (times[n + 1] - times[n]) / self.nsub
                if lu is None or not static:
                    D = self.diffusion_matrix(t_new)
                    D_II = D[I][:, I]
                    D_IB = D[I][:, Bn]
                    Mii = (sp.identity(len(I), format="csc") - self.dt * D_II).tocsc()
                    lu = splu(Mii)
                Pn = self._with_time(self.X, t_new)
                ub = ps.data_values(Pn[self.bmask])
                rhs = (u + self.dt * (self.transport(u) - ps.g_values(Pn) - self.div_f(t_new))).ravel()[I]
                rhs = rhs + self.dt * (D_IB @ ub)
                uI = lu.solve(rhs)
                if not np.all(np.isfinite(uI)):
                    raise ImplicitSolveDiverged(f"non-finite values at t = {t_new:.4g}")
                res = np.abs(Mii @ uI - rhs).max()
                if res > self.cfg.tol * max(1.0, np.abs(rhs).max()):
                    raise ImplicitSolveDiverged(f"implicit residual {res:.3e} at t = {t_new:.4g}")
                un = np.empty(u.size)
                un[I] = uI
                un[Bn] = ub
                u = un.reshape(self.sshape)
                t = t_new
            U[..., n + 1] = u
        prov = {"solver": "imex-upwind", "dt": self.dt, "substeps": self.nsub,
                "coefficient": ps.a_field.describe()}
        return GridFunction(ps.lower, ps.upper, U, ps.name or "u", prov)


def solve_forward(ps: ProblemSpec, cfg: SolverConfig | None = None) -> GridFunction:
    """Time-march the divergence-form problem from the bottom slice; see module docstring."""
    return _Marcher(ps, cfg or SolverConfig()).run()


# ---------------------------------------------------------------- frozen solver

def solve_frozen_convolution(k: FrozenKernel, g: GridFunction | None, f: Sequence[GridFunction] | None = None,
                             pad: int | None = None) -> GridFunction:
    """u = -Gamma_0(g) - Gamma_0(div f), the solution of L0 u = g + div f decaying at infinity.

    Gamma_0 is the fundamental solution (L0 Gamma_0(h) = -h); div f is the
    central-difference divergence applied before convolving.
    """
    if g is None and not f:
        raise ValueError("need g or f")
    tmpl = g if g is not None else f[0]
    total = np.zeros(tmpl.shape) if g is None else g.values.copy()
    if f:
        for i, fi in enumerate(f):
            total += np.gradient(fi.values, fi.spacing[i], axis=i, edge_order=1)
    src = tmpl.with_values(total, name="g + div f")
    out = gamma_convolve(k, src, pad=pad)
    return out.with_values(-out.values, name="u", solver="frozen-convolution")


# ---------------------------------------------------------------- weak form

def weak_residual(ps: ProblemSpec, u: GridFunction, psi: CutoffSpec, relative: bool = False) -> float:
    """-int <A D0 u, D0 psi> + int psi Y u - int (g psi - <f, D0 psi>) by trapezoid quadrature.

    With ``relative=True`` the residual is divided by the integral of the sum
    of the absolute values of the four terms (0 when all of them vanish).
    """
    s = ps.structure
    P = u.points()
    val = psi.value(P)
    tol = 1e-14
    faces = [np.take(val, [0, -1], axis=a) for a in range(u.ndim)]
    if max(np.abs(fc).max() for fc in faces) > tol:
        raise SupportViolation("test function does not vanish on the grid boundary")
    grad = psi.grad(P)[..., : s.m0]
    db = derivatives(s, u, "central")
    D0u = np.stack([c.values for c in db.d0], axis=-1)
    A = ps.a_field(P)
    flux = np.einsum("...ij,...j->...i", A, D0u)
    F = np.stack(ps.f_values(P), axis=-1)
    terms = [-np.sum(flux * grad, axis=-1), val * db.y.values,
             -ps.g_values(P) * val, np.sum(F * grad, axis=-1)]
    res = float(np.sum(u.weights * sum(terms)))
    if not relative:
        return res
    scale = float(np.sum(u.weights * sum(np.abs(x) for x in terms)))
    return abs(res) / scale if scale > 0 else 0.0


def coefficient_average(a_field, region, s: KolmogorovStructure, like: GridFunction) -> np.ndarray:
    """Cellwise mean of a_ij over the region, sampled on the nodes of ``like``."""
    mask = region_mask(s, like, region)
    check_mask(mask, min_nodes=1)
    P = like.points()[mask]
    w = like.weights[mask]
    A = a_field(P)
    return np.einsum("k,kij->ij", w, A) / w.sum()
