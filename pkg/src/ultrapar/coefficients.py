"""Coefficient presets a_ij(z) and smooth source presets for g and f.

A coefficient field maps points (trailing axis of length N+1) to symmetric
m0 x m0 matrices.  Scalar presets multiply the identity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


@dataclass(frozen=True, eq=False)
class CoefficientField:
    name: str
    m0: int
    scalar: Callable | None = None
    matrix: np.ndarray | None = None
    params: dict = field(default_factory=dict)
    time_dependent: bool = False
    vmo: bool = True

    def __call__(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        lead = pts.shape[:-1]
        if self.matrix is not None:
            return np.broadcast_to(self.matrix, lead + (self.m0, self.m0)).copy()
        a = np.broadcast_to(np.asarray(self.scalar(pts), dtype=float), lead)
        return a[..., None, None] * np.eye(self.m0)

    def scalar_values(self, pts) -> np.ndarray:
        """Trace / m0, the scalar factor for isotropic presets."""
        A = self(pts)
        return np.trace(A, axis1=-2, axis2=-1) / self.m0

    def describe(self) -> dict:
        return {"name": self.name, "params": self.params, "vmo": self.vmo}


def constant(m0: int, A=None) -> CoefficientField:
    A = np.eye(m0) if A is None else np.atleast_2d(np.asarray(A, dtype=float))
    return CoefficientField("constant", m0, matrix=A, params={"A": A.tolist()})


def sinusoid(m0: int, eps: float = 0.3, omega: float = 3.0) -> CoefficientField:
    """1 + eps sin(omega x1 + x2 + t): smooth, hence VMO."""
    fn = lambda p: 1.0 + eps * np.sin(omega * p[..., 0] + p[..., 1] + p[..., -1])
    return CoefficientField("sinusoid", m0, scalar=fn, params={"eps": eps, "omega": omega},
                            time_dependent=True)


def vmo_loglog(m0: int, eps: float = 0.3, omega: float = 4.0) -> CoefficientField:
    """1 + eps sin(omega log(1 + |log |x1||)): discontinuous-looking at x1 = 0 but VMO.

    The oscillation over a ball of radius r near x1 = 0 is of order
    eps / log(1/r), so it vanishes, slowly, as r -> 0.
    """
    def fn(p):
        ax = np.maximum(np.abs(p[..., 0]), 1e-300)
        return 1.0 + eps * np.sin(omega * np.log1p(np.abs(np.log(ax))))
    return CoefficientField("vmo_loglog", m0, scalar=fn, params={"eps": eps, "omega": omega})


def vmo_decay(m0: int, eps: float = 0.3, omega: float = 8.0, h: float = 1.0 / 32) -> CoefficientField:
    """1 + eps sin(omega x1) / (1 + |log h|): oscillation amplitude tied to a resolution scale h."""
    amp = eps / (1.0 + abs(np.log(h)))
    fn = lambda p: 1.0 + amp * np.sin(omega * p[..., 0])
    return CoefficientField("vmo_decay", m0, scalar=fn, params={"eps": eps, "omega": omega, "h": h})


def checkerboard(m0: int, eps: float = 0.3, k: float = 8.0) -> CoefficientField:
    """1 + eps sign(sin(k pi x1)): fixed-amplitude jumps, BMO but not VMO."""
    fn = lambda p: 1.0 + eps * np.sign(np.sin(k * np.pi * p[..., 0]))
    return CoefficientField("checkerboard", m0, scalar=fn, params={"eps": eps, "k": k}, vmo=False)


PRESETS = {
    "constant": constant,
    "sinusoid": sinusoid,
    "vmo_loglog": vmo_loglog,
    "vmo_decay": vmo_decay,
    "checkerboard": checkerboard,
}


def make_coefficient(name: str, m0: int, **params) -> CoefficientField:
    if name not in PRESETS:
        raise KeyError(f"unknown coefficient preset {name!r}; known: {sorted(PRESETS)}")
    return PRESETS[name](m0, **params)


# ---------------------------------------------------------------- sources

def smooth_bump(center, radius, amplitude: float = 1.0, power: int = 4) -> Callable:
    """amplitude (1 - |(z - c)/r|^2)^power, compactly supported in an axis-scaled ellipsoid."""
    c = np.asarray(center, float)
    r = np.asarray(radius, float)

    def fn(pts):
        d = (np.asarray(pts, float) - c) / r
        q = np.sum(d * d, axis=-1)
        return amplitude * np.where(q < 1, (1 - np.minimum(q, 1)) ** power, 0.0)
    return fn


def gaussian_bump(center, sigma, amplitude: float = 1.0) -> Callable:
    c = np.asarray(center, float)
    sg = np.asarray(sigma, float)

    def fn(pts):
        d = (np.asarray(pts, float) - c) / sg
        return amplitude * np.exp(-0.5 * np.sum(d * d, axis=-1))
    return fn


def zero(pts):
    return np.zeros(np.asarray(pts).shape[:-1])
