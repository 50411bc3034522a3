"""Tensor-product grids, compact fourth-order operators, sine-basis solves.

All fields live on interior nodes of a uniform tensor grid over a box, with
homogeneous Dirichlet data folded into the stencils (ghost values are zero).
The compact average A and the stiffness combination Lambda share the sine
eigenbasis of the 1-d second difference, so the implicit step reduces to a
forward transform, a diagonal divide and an inverse transform per axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

import numpy as np
import scipy.fft

__all__ = [
    "SpatialMesh",
    "StencilEigens",
    "build_eigens",
    "second_difference",
    "compact_average",
    "apply_A",
    "apply_Lambda",
    "apply_laplace",
    "sine_transform",
    "dst_solve",
    "NormReport",
    "norms",
    "energy_seminorm_sq",
]

# Below this many intervals a dense matmul beats the FFT path and doubles as
# an independent implementation for cross-checks.
_DST_DENSE_CUTOFF = 32


@dataclass(frozen=True)
class SpatialMesh:
    """Uniform tensor grid on a box, interior nodes only.

    Parameters
    ----------
    lo, hi : tuple of float
        Box corners, one entry per dimension.
    m : tuple of int
        Interval counts per dimension (so axis k holds m[k]-1 interior nodes).
    """

    lo: tuple
    hi: tuple
    m: tuple

    def __post_init__(self):
        lo, hi, m = map(tuple, (self.lo, self.hi, self.m))
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "m", m)
        if not (len(lo) == len(hi) == len(m) >= 1):
            raise ValueError("lo, hi, m must have one matching entry per dimension")
        if any(b <= a for a, b in zip(lo, hi)):
            raise ValueError(f"degenerate box {lo}..{hi}")
        if any(mk < 2 for mk in m):
            raise ValueError(f"need at least 2 intervals per axis, got {m}")

    @property
    def dim(self) -> int:
        return len(self.m)

    @property
    def dx(self) -> tuple:
        return tuple((b - a) / mk for a, b, mk in zip(self.lo, self.hi, self.m))

    @property
    def interior_shape(self) -> tuple:
        return tuple(mk - 1 for mk in self.m)

    def interior_grids(self):
        """Open (broadcastable) meshgrid of interior coordinates."""
        axes = [a + dxk * np.arange(1, mk)
                for a, dxk, mk in zip(self.lo, self.dx, self.m)]
        return np.meshgrid(*axes, indexing="ij", sparse=True)


def _neighbor_sum(v: np.ndarray, axis: int) -> np.ndarray:
    # u_{j-1} + u_{j+1} along one axis with zero Dirichlet closure
    out = np.zeros_like(v)
    left = [slice(None)] * v.ndim
    right = [slice(None)] * v.ndim
    left[axis] = slice(0, -1)
    right[axis] = slice(1, None)
    out[tuple(left)] += v[tuple(right)]
    out[tuple(right)] += v[tuple(left)]
    return out


def second_difference(v: np.ndarray, mesh: SpatialMesh, axis: int) -> np.ndarray:
    """Standard second difference along one axis, divided by dx^2."""
    return (_neighbor_sum(v, axis) - 2.0 * v) / mesh.dx[axis] ** 2


def compact_average(v: np.ndarray, axis: int) -> np.ndarray:
    """One-dimensional compact average (u_{j-1} + 10 u_j + u_{j+1})/12."""
    return (_neighbor_sum(v, axis) + 10.0 * v) / 12.0


def apply_A(v: np.ndarray, mesh: SpatialMesh) -> np.ndarray:
    """Product of the compact averages over all axes."""
    return reduce(lambda w, ax: compact_average(w, ax), range(mesh.dim), v)


def apply_Lambda(v: np.ndarray, mesh: SpatialMesh) -> np.ndarray:
    """Sum over axes of (averages on the other axes) * (second difference)."""
    out = np.zeros_like(v)
    for axis in range(mesh.dim):
        w = second_difference(v, mesh, axis)
        for other in range(mesh.dim):
            if other != axis:
                w = compact_average(w, other)
        out += w
    return out


def apply_laplace(v: np.ndarray, mesh: SpatialMesh) -> np.ndarray:
    """Plain second-order discrete Laplacian (sum of second differences)."""
    out = second_difference(v, mesh, 0)
    for axis in range(1, mesh.dim):
        out += second_difference(v, mesh, axis)
    return out


@dataclass(frozen=True)
class StencilEigens:
    """Eigenvalues of the 1-d stencils in the sine basis, plus tensor grids.

    avg[k][j-1] = (5 + cos(j pi / m_k)) / 6, in (2/3, 1]
    lap[k][j-1] = -(4/dx_k^2) sin^2(j pi / (2 m_k))
    avg_outer   = product of avg over axes (interior shape)
    lap_outer   = eigenvalues of Lambda: sum_k lap_k * prod_{l != k} avg_l
    """

    mesh: SpatialMesh
    avg: tuple
    lap: tuple
    avg_outer: np.ndarray
    lap_outer: np.ndarray


def build_eigens(mesh: SpatialMesh) -> StencilEigens:
    avg, lap = [], []
    for mk, dxk in zip(mesh.m, mesh.dx):
        j = np.arange(1, mk)
        avg.append((5.0 + np.cos(j * math.pi / mk)) / 6.0)
        lap.append(-(4.0 / dxk ** 2) * np.sin(j * math.pi / (2.0 * mk)) ** 2)
    nd = mesh.dim

    def _along(vec, axis):
        shape = [1] * nd
        shape[axis] = len(vec)
        return vec.reshape(shape)

    avg_outer = reduce(np.multiply, (_along(a, k) for k, a in enumerate(avg)))
    lap_outer = np.zeros(mesh.interior_shape)
    for k in range(nd):
        term = _along(lap[k], k)
        for l in range(nd):
            if l != k:
                term = term * _along(avg[l], l)
        lap_outer = lap_outer + term
    avg_outer = np.broadcast_to(avg_outer, mesh.interior_shape).copy()
    return StencilEigens(mesh=mesh, avg=tuple(avg), lap=tuple(lap),
                         avg_outer=avg_outer, lap_outer=lap_outer)


def sine_transform(v: np.ndarray, axis: int, force_dense: bool = False) -> np.ndarray:
    """Plain sine sum sum_j v_j sin(i j pi / m) along one axis.

    The transform is involutive up to the factor 2/m, which `dst_solve`
    applies once after the inverse pass.  Small axes use an explicit matrix;
    larger ones go through scipy's DST-I, which equals twice this sum.
    """
    n = v.shape[axis]
    if force_dense or n + 1 < _DST_DENSE_CUTOFF:
        j = np.arange(1, n + 1)
        s = np.sin(np.outer(j, j) * (math.pi / (n + 1)))
        return np.moveaxis(np.tensordot(s, v, axes=(1, axis)), 0, axis)
    return 0.5 * scipy.fft.dst(v, type=1, axis=axis)


def dst_solve(rhs: np.ndarray, c: float, sigma: float,
              eigens: StencilEigens) -> np.ndarray:
    """Solve (c*A - sigma*Lambda) u = rhs in the sine basis.

    Requires c > 0 and sigma >= 0 so the diagonal is bounded below by
    c*(2/3)^dim > 0 (Lambda's eigenvalues are nonpositive).
    """
    if c <= 0.0 or sigma < 0.0:
        raise ValueError(f"need c > 0 and sigma >= 0, got c={c}, sigma={sigma}")
    mesh = eigens.mesh
    vhat = rhs
    for axis in range(mesh.dim):
        vhat = sine_transform(vhat, axis)
    vhat = vhat / (c * eigens.avg_outer - sigma * eigens.lap_outer)
    for axis in range(mesh.dim):
        vhat = sine_transform(vhat, axis)
    scale = 1.0
    for mk in mesh.m:
        scale *= 2.0 / mk
    return vhat * scale


@dataclass(frozen=True)
class NormReport:
    """Discrete norms of one interior field."""

    max: float
    l2: float
    h1: float
    h1_compact: float


def _h1_sq(v: np.ndarray, mesh: SpatialMesh) -> float:
    vol = math.prod(mesh.dx)
    total = 0.0
    for axis, dxk in enumerate(mesh.dx):
        d = np.diff(v, axis=axis, prepend=0.0, append=0.0)
        total += vol / dxk ** 2 * float((d * d).sum())
    return total


def energy_seminorm_sq(v: np.ndarray, mesh: SpatialMesh) -> float:
    """Squared compact energy seminorm (A v, -laplace v)."""
    vol = math.prod(mesh.dx)
    return vol * float((apply_A(v, mesh) * (-apply_laplace(v, mesh))).sum())


def norms(v: np.ndarray, mesh: SpatialMesh) -> NormReport:
    """Max, L2, H1 seminorm and compact energy seminorm in one pass.

    The compact seminorm satisfies (2/3)^dim |v|_1^2 <= |v|_A^2 <= |v|_1^2,
    which is what makes the energy estimate of the implicit scheme carry
    over to the plain H1 seminorm.
    """
    v = np.asarray(v, float)
    if v.shape != mesh.interior_shape:
        raise ValueError(f"field shape {v.shape} != interior {mesh.interior_shape}")
    vol = math.prod(mesh.dx)
    return NormReport(
        max=float(np.abs(v).max()),
        l2=math.sqrt(vol * float((v * v).sum())),
        h1=math.sqrt(_h1_sq(v, mesh)),
        h1_compact=math.sqrt(max(energy_seminorm_sq(v, mesh), 0.0)),
    )
