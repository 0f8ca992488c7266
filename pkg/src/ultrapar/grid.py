"""Node-based space-time grid functions, discrete D0 / D / Y and grid I/O.

A grid function stores values at the nodes of a uniform tensor grid over the
box prod_j [lower_j, upper_j] (spatial axes first, time last), endpoints
included.  Integrals use tensor trapezoid weights, so each node carries the
volume of its dual cell.
"""

from __future__ import annotations

import csv
import io
import json
import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import EmptyGrid, GridTooSmall

MAGIC = b"UGF1\n"


@dataclass(frozen=True, eq=False)
class GridFunction:
    lower: np.ndarray
    upper: np.ndarray
    values: np.ndarray
    name: str = ""
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        lo = np.asarray(self.lower, dtype=float).ravel()
        hi = np.asarray(self.upper, dtype=float).ravel()
        if v.size == 0:
            raise EmptyGrid("grid function has no values")
        if lo.shape != hi.shape or lo.size != v.ndim:
            raise ValueError(f"box of dimension {lo.size} does not match values of ndim {v.ndim}")
        if np.any(hi <= lo):
            raise EmptyGrid("grid box has an empty axis")
        if min(v.shape) < 2:
            raise EmptyGrid(f"every axis needs at least 2 nodes, got shape {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    # -- geometry
    @property
    def shape(self) -> tuple:
        return self.values.shape

    @property
    def ndim(self) -> int:
        return self.values.ndim

    @cached_property
    def spacing(self) -> np.ndarray:
        return (self.upper - self.lower) / (np.array(self.shape) - 1)

    @cached_property
    def axes(self) -> list:
        return [np.linspace(a, b, n) for a, b, n in zip(self.lower, self.upper, self.shape)]

    def points(self) -> np.ndarray:
        """Node coordinates, shape ``self.shape + (ndim,)``."""
        return np.stack(np.meshgrid(*self.axes, indexing="ij"), axis=-1)

    @cached_property
    def weights(self) -> np.ndarray:
        """Tensor trapezoid weights (dual-cell volumes) of every node."""
        w = np.ones(())
        for h, n in zip(self.spacing, self.shape):
            w1 = np.full(n, h)
            w1[[0, -1]] *= 0.5
            w = np.multiply.outer(w, w1)
        return w

    @property
    def box_volume(self) -> float:
        return float(np.prod(self.upper - self.lower))

    # -- construction
    @classmethod
    def from_function(cls, lower, upper, shape, fn: Callable, name: str = "", **prov) -> "GridFunction":
        """Sample ``fn(points)`` (points with trailing coordinate axis) on a node grid."""
        lower, upper = np.asarray(lower, float), np.asarray(upper, float)
        axes = [np.linspace(a, b, n) for a, b, n in zip(lower, upper, shape)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        vals = np.broadcast_to(np.asarray(fn(pts), dtype=float), tuple(shape)).copy()
        return cls(lower, upper, vals, name, dict(prov))

    def with_values(self, values, name: str | None = None, **prov) -> "GridFunction":
        p = dict(self.provenance)
        p.update(prov)
        return GridFunction(self.lower, self.upper, values, self.name if name is None else name, p)

    def same_grid(self, other: "GridFunction") -> bool:
        return (self.shape == other.shape and np.allclose(self.lower, other.lower)
                and np.allclose(self.upper, other.upper))

    def _other(self, other):
        if isinstance(other, GridFunction):
            if not self.same_grid(other):
                raise ValueError("grid functions live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return self.with_values(self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self.with_values(self.values - self._other(other))

    def __mul__(self, other):
        return self.with_values(self.values * self._other(other))

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_values(-self.values)

    # -- evaluation
    def interpolator(self, method: str = "linear") -> RegularGridInterpolator:
        cache = self.__dict__.setdefault("_interp", {})
        if method not in cache:
            cache[method] = RegularGridInterpolator(self.axes, self.values, method=method,
                                                    bounds_error=False, fill_value=0.0)
        return cache[method]

    def __call__(self, pts, method: str = "linear") -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        return self.interpolator(method)(pts.reshape(-1, self.ndim)).reshape(pts.shape[:-1])

    def integral(self, mask=None) -> float:
        w = self.weights if mask is None else self.weights * mask
        return float(np.sum(w * self.values))

    def restrict(self, lower, upper, tol: float = 1e-9) -> "GridFunction":
        """Sub-grid of the nodes lying in the box [lower, upper]."""
        sl = []
        for ax, h, a, b in zip(self.axes, self.spacing, lower, upper):
            i0 = int(np.searchsorted(ax, a - tol * h, side="left"))
            i1 = int(np.searchsorted(ax, b + tol * h, side="right"))
            if i1 - i0 < 2:
                raise EmptyGrid(f"box [{a}, {b}] holds fewer than 2 nodes along an axis")
            sl.append(slice(i0, i1))
        sl = tuple(sl)
        lo = [ax[w][0] for ax, w in zip(self.axes, sl)]
        hi = [ax[w][-1] for ax, w in zip(self.axes, sl)]
        return GridFunction(lo, hi, self.values[sl], self.name, dict(self.provenance))

    def slice_time(self, i: int) -> np.ndarray:
        return self.values[..., i]

    # -- I/O
    def header(self) -> dict:
        return {"format": "ugf", "version": 1, "name": self.name,
                "shape": list(self.shape), "lower": self.lower.tolist(), "upper": self.upper.tolist(),
                "spacing": self.spacing.tolist(), "order": "C", "dtype": "<f8",
                "axes": [f"x{j + 1}" for j in range(self.ndim - 1)] + ["t"],
                "provenance": self.provenance}

    def to_bytes(self) -> bytes:
        head = json.dumps(self.header(), sort_keys=True).encode()
        payload = np.ascontiguousarray(self.values, dtype="<f8").tobytes()
        return MAGIC + struct.pack("<Q", len(head)) + head + payload

    def save(self, path) -> Path:
        path = Path(path)
        path.write_bytes(self.to_bytes())
        return path

    @classmethod
    def from_bytes(cls, data: bytes) -> "GridFunction":
        if not data.startswith(MAGIC):
            raise ValueError("not a grid function file")
        off = len(MAGIC)
        (n,) = struct.unpack("<Q", data[off:off + 8])
        head = json.loads(data[off + 8:off + 8 + n])
        vals = np.frombuffer(data[off + 8 + n:], dtype="<f8").reshape(head["shape"]).copy()
        return cls(head["lower"], head["upper"], vals, head.get("name", ""), head.get("provenance", {}))

    @classmethod
    def load(cls, path) -> "GridFunction":
        return cls.from_bytes(Path(path).read_bytes())

    def to_csv(self, path=None) -> str:
        """Long-format CSV (one row per node); intended for small grids."""
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow([f"x{j + 1}" for j in range(self.ndim - 1)] + ["t", self.name or "value"])
        pts = self.points().reshape(-1, self.ndim)
        for p, v in zip(pts, self.values.ravel()):
            wr.writerow([repr(float(c)) for c in p] + [repr(float(v))])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def box_grid(lower, upper, shape) -> GridFunction:
    """Zero grid function, convenient as a template."""
    return GridFunction(lower, upper, np.zeros(tuple(shape)))


# ---------------------------------------------------------------- derivatives

@dataclass(frozen=True, eq=False)
class DerivativeBundle:
    d0: list
    dfull: list
    y: GridFunction

    def d0_sq(self) -> np.ndarray:
        """|D0 u|^2 at the nodes."""
        return sum(g.values ** 2 for g in self.d0)


def _central(v: np.ndarray, h: float, axis: int) -> np.ndarray:
    return np.gradient(v, h, axis=axis, edge_order=1)


def _upwind(v: np.ndarray, h: float, axis: int, vel: np.ndarray) -> np.ndarray:
    # u_t = vel u_x transports information against vel: forward difference for vel > 0
    fwd = np.empty_like(v)
    bwd = np.empty_like(v)
    d = np.diff(v, axis=axis) / h
    sl = [slice(None)] * v.ndim
    sl[axis] = slice(0, -1)
    fwd[tuple(sl)] = d
    sl[axis] = slice(1, None)
    bwd[tuple(sl)] = d
    sl[axis] = -1
    fwd[tuple(sl)] = np.take(d, -1, axis=axis)
    sl[axis] = 0
    bwd[tuple(sl)] = np.take(d, 0, axis=axis)
    return np.where(vel > 0, fwd, bwd)


def drift_velocity(s, pts: np.ndarray) -> np.ndarray:
    """Per-axis coefficient of D u in <x, B D u>, i.e. B^T x (spatial points, trailing axis N)."""
    return pts @ s.B


def derivatives(s, u: GridFunction, scheme: str = "central") -> DerivativeBundle:
    """Discrete D0 u, D u and Y u = <x, B D u> - d_t u.

    ``central`` uses second-order interior differences and first-order
    one-sided differences at faces.  ``upwind`` differences the transport
    axes (blocks >= 1) one-sidedly along the sign of the drift and uses a
    backward difference in time.
    """
    if scheme not in ("central", "upwind"):
        raise ValueError(f"unknown scheme {scheme!r}")
    if u.ndim != s.dim:
        raise ValueError(f"grid has {u.ndim} axes, structure needs {s.dim}")
    if min(u.shape) < 3:
        raise GridTooSmall(f"need at least 3 nodes per axis, got {u.shape}")
    v, h = u.values, u.spacing
    X = np.meshgrid(*u.axes[:-1], indexing="ij")
    xs = np.stack(X, axis=-1)[..., None, :]
    vel = np.broadcast_to((xs @ s.B)[..., 0, :][..., None, :], u.shape + (s.N,))

    dfull = []
    for j in range(s.N):
        if scheme == "upwind" and s.block_index[j] >= 1:
            dj = _upwind(v, h[j], j, vel[..., j])
        else:
            dj = _central(v, h[j], j)
        dfull.append(u.with_values(dj, name=f"d{j + 1}({u.name})"))
    if scheme == "upwind":
        dt = _upwind(v, h[-1], s.N, -np.ones_like(v))
    else:
        dt = _central(v, h[-1], s.N)
    yv = sum(vel[..., j] * dfull[j].values for j in range(s.N) if s.block_index[j] >= 1) - dt
    yv = np.broadcast_to(yv, u.shape)
    return DerivativeBundle(dfull[:s.m0], dfull, u.with_values(yv, name=f"Y({u.name})"))


def divergence0(s, f: Sequence[GridFunction]) -> GridFunction:
    """Central-difference divergence of a flux with m0 components."""
    if len(f) != s.m0:
        raise ValueError(f"flux needs {s.m0} components, got {len(f)}")
    out = sum(_central(fi.values, fi.spacing[i], i) for i, fi in enumerate(f))
    return f[0].with_values(out, name="div f")
