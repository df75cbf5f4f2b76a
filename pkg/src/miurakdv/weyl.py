"""Titchmarsh-Weyl m-function of the half-line problem on (-inf, 0).

The Schroedinger equation with distributional potential ``q = Q'`` is written
as the first-order system ``Y' = A Y`` for ``Y = (y, Dy)``, ``Dy = y' - Q y``,
with ``A = [[Q, 1], [-z - Q**2, -Q]]``.  Since ``tr A = 0`` every transfer
matrix lies in SL(2, C).

The interval is split into cells, each carrying an exactly exponentiated
traceless generator (see :mod:`miurakdv.kernels`):

* on pieces where ``Q`` is constant (zero or rational ``r``) the cell is the
  exact exponential ``cos(l w) I + sin(l w)/w A``, ``w**2 = z``;
* on pieces with constant ``r = rho`` the equation ``y'' = (rho**2 - z) y``
  is solved exactly in ``(y, y')`` coordinates and converted back;
* on smooth pieces a fourth-order Magnus step with two Gauss points is used.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .profiles import MiuraProfile

__all__ = [
    "WeylError",
    "WeylPropagator",
    "WeylDisk",
    "MValue",
    "DEFAULT_MESH",
    "L_MAX",
    "build_cells",
    "propagate",
    "m_values",
    "m_function",
    "weyl_disk",
]

DEFAULT_MESH = 0.01
MAX_CELL = 1.0
L_MAX = 1e4
_GAUSS = 0.5 / math.sqrt(3.0)
_MAGNUS = math.sqrt(3.0) / 12.0


class WeylError(ArithmeticError):
    """Spectral parameter on the cut, or a truncation that fails to converge."""


@dataclass(frozen=True)
class WeylPropagator:
    """Transfer matrix of the quasi-derivative system over ``[x_left, x_right]``."""

    matrix: np.ndarray
    x_left: float
    x_right: float
    z: complex

    @property
    def a(self):
        return self.matrix[0, 0]

    @property
    def b(self):
        return self.matrix[0, 1]

    @property
    def c(self):
        return self.matrix[1, 0]

    @property
    def d(self):
        return self.matrix[1, 1]

    @property
    def det(self) -> complex:
        return self.a * self.d - self.b * self.c


@dataclass(frozen=True)
class WeylDisk:
    center: complex
    radius: float
    L: float
    dirichlet: complex

    def contains(self, m: complex, slack: float = 0.0) -> bool:
        return abs(m - self.center) <= self.radius * (1 + slack) + slack


@dataclass(frozen=True)
class MValue:
    z: complex
    m: complex
    mode: str
    disk_radius_bound: float
    L: float


# -- cells ----------------------------------------------------------------

def _const_q_cells(left, right, Qv):
    n = max(1, math.ceil((right - left) / MAX_CELL))
    ell = np.full(n, (right - left) / n)
    return np.column_stack([ell * Qv, ell, -ell * Qv * Qv, -ell, 0 * ell, 0 * ell])


def build_cells(profile: MiuraProfile, x_left: float, x_right: float = 0.0,
                mesh: float | None = None) -> np.ndarray:
    """Cell table ``(p, q0, s0, s1, alpha, beta)`` for ``[x_left, x_right]``.

    Parameters
    ----------
    profile : MiuraProfile
    x_left, x_right : float
        Interval with ``x_left <= x_right <= 0``.
    mesh : float, optional
        Maximal cell width on smooth pieces.
    """
    if not x_left <= x_right <= 0.0:
        raise ValueError("need x_left <= x_right <= 0")
    mesh = DEFAULT_MESH if mesh is None else float(mesh)
    blocks = []
    for i, piece in enumerate(profile.pieces):
        a = max(piece.left, x_left)
        b = min(piece.right, x_right)
        if not a < b:
            continue
        if piece.q_vanishes:
            Qv = float(profile._piece_Q(i, np.array(0.5 * (a + b))))
            blocks.append(_const_q_cells(a, b, Qv))
        elif piece.kind == "constant":
            n = max(1, math.ceil((b - a) / MAX_CELL))
            xs = np.linspace(a, b, n + 1)
            Qx = profile._piece_Q(i, xs)
            ell = np.diff(xs)
            rho2 = piece.value**2
            blocks.append(np.column_stack(
                [0 * ell, ell, ell * rho2, -ell, Qx[:-1], Qx[1:]]))
        else:
            edges = piece.panels.edges
            inner = edges[(edges > a) & (edges < b)]
            knots = np.concatenate([[a], inner, [b]])
            xs = []
            for lo, hi in zip(knots[:-1], knots[1:]):
                n = max(4, math.ceil((hi - lo) / mesh))
                xs.append(np.linspace(lo, hi, n + 1)[:-1])
            xs = np.concatenate(xs + [[b]])
            ell = np.diff(xs)
            mid = 0.5 * (xs[:-1] + xs[1:])
            Q1 = profile._piece_Q(i, mid - _GAUSS * ell)
            Q2 = profile._piece_Q(i, mid + _GAUSS * ell)
            g = _MAGNUS * ell * ell * (Q2 - Q1)
            blocks.append(np.column_stack([
                0.5 * ell * (Q1 + Q2) + g * (Q1 + Q2),
                ell + 2 * g,
                -0.5 * ell * (Q1 * Q1 + Q2 * Q2) - 2 * g * Q1 * Q2,
                -ell + 2 * g,
                0 * ell,
                0 * ell,
            ]))
    if not blocks:
        return np.zeros((0, 6))
    return np.ascontiguousarray(np.vstack(blocks))


def propagate(profile: MiuraProfile, z: complex, x_left: float, x_right: float = 0.0,
              mesh: float | None = None) -> WeylPropagator:
    """Transfer matrix ``T`` with ``Y(x_right) = T Y(x_left)``."""
    if not x_left < x_right <= 0.0:
        raise ValueError("need x_left < x_right <= 0")
    cells = build_cells(profile, x_left, x_right, mesh)
    T, logs = kernels.transfer_matrices(cells, np.array([complex(z)]))
    mat = T[0] * math.exp(logs[0])
    prop = WeylPropagator(mat, float(x_left), float(x_right), complex(z))
    scale = max(1.0, float(np.max(np.abs(mat))) ** 2)
    if abs(prop.det - 1.0) > 1e-8 * scale:
        raise WeylError(f"transfer matrix lost unimodularity (det={prop.det})")
    return prop


# -- m-function -----------------------------------------------------------

def _check_z(z: np.ndarray):
    bad = (z.imag == 0) & (z.real >= 0)
    if np.any(bad):
        raise WeylError(f"spectral parameter on the cut [0, inf): {z[bad][0]}")


def _exact_tail(profile, zs, mesh):
    L = -profile.q_free_left
    Qt = profile.tail_Q
    y0 = np.column_stack([np.ones_like(zs), np.sqrt(-zs) - Qt])
    if L == 0.0:
        Y = y0
    else:
        Y = kernels.propagate_state(build_cells(profile, -L, 0.0, mesh), zs, y0)
    return -Y[:, 1] / Y[:, 0], L


def _disk_from_T(T, logs):
    t11, t12, t21, t22 = T[:, 0, 0], T[:, 0, 1], T[:, 1, 0], T[:, 1, 1]
    den = 2.0 * np.abs(np.imag(t11 * np.conj(t12)))
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        radius = np.where(den > 0, np.exp(-2.0 * logs) / den, np.inf)
        bc = np.conj(-t12 / t11)
        center = -(t21 * bc + t22) / (t11 * bc + t12)
        dirichlet = -t22 / t12
    return center, radius, dirichlet


def _disk_mode(profile, zs, tol, mesh, L0=1.0):
    """Dirichlet shooting from ``-L`` with ``L`` doubled until converged.

    Off the real axis the Weyl-disk radius is the error certificate.  On the
    negative half-line the disk degenerates (the image of the real boundary
    data is the real line), so the change between ``L`` and ``2L`` is used.
    """
    out = np.empty_like(zs)
    bound = np.full(zs.shape, np.inf)
    Ls = np.zeros(zs.shape)
    prev = np.full(zs.shape, np.nan + 0j)
    todo = np.arange(zs.size)
    L = L0
    while todo.size:
        T, logs = kernels.transfer_matrices(build_cells(profile, -L, 0.0, mesh), zs[todo])
        _, radius, dirichlet = _disk_from_T(T, logs)
        real = zs[todo].imag == 0
        change = np.abs(dirichlet - prev[todo])
        est = np.where(real, change, 2.0 * radius)
        ok = np.where(real, change < tol * np.maximum(1.0, np.abs(dirichlet)), radius < tol)
        prev[todo] = dirichlet
        out[todo[ok]] = dirichlet[ok]
        bound[todo[ok]] = est[ok]
        Ls[todo[ok]] = L
        todo = todo[~ok]
        if todo.size and L >= L_MAX:
            raise WeylError(f"Weyl disk did not shrink below tol={tol} by L={L_MAX} "
                            f"(z={zs[todo[0]]})")
        L = min(2.0 * L, L_MAX)
    return out, bound, Ls


def m_values(profile: MiuraProfile, z, tol: float = 1e-12, mesh: float | None = None,
             full: bool = False, mirror: bool = True):
    """Vectorized m-function.

    Returns the array of m-values, or ``(m, mode, bound, L)`` when ``full``.
    Values with ``Im z < 0`` are obtained by conjugation symmetry unless
    ``mirror`` is false, in which case they are propagated directly.
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    _check_z(z)
    flip = (z.imag < 0) & mirror
    zs = np.where(flip, np.conj(z), z)
    if profile.exact_tail:
        m, L = _exact_tail(profile, zs, mesh)
        mode, bound, Ls = "exact-tail", np.zeros(z.shape), np.full(z.shape, L)
    else:
        m, bound, Ls = _disk_mode(profile, zs, tol, mesh)
        mode = "disk"
    m = np.where(flip, np.conj(m), m)
    if full:
        return m, mode, bound, Ls
    return m


def m_function(profile: MiuraProfile, z: complex, tol: float = 1e-12,
               mesh: float | None = None) -> MValue:
    """``m(z) = -Dpsi(0, z) / psi(0, z)`` for the Weyl solution psi."""
    m, mode, bound, L = m_values(profile, z, tol, mesh, full=True)
    return MValue(complex(z), complex(m[0]), mode, float(bound[0]), float(L[0]))


def weyl_disk(profile: MiuraProfile, z: complex, L: float,
              mesh: float | None = None) -> WeylDisk:
    """Image of the closed upper half-plane of boundary data ``y/Dy`` at ``-L``."""
    z = complex(z)
    if not z.imag > 0:
        raise WeylError("weyl_disk needs Im z > 0")
    if L < 0:
        raise ValueError("L must be nonnegative")
    if L == 0:
        return WeylDisk(complex(np.nan, np.nan), math.inf, 0.0, complex(np.nan, np.nan))
    T, logs = kernels.transfer_matrices(build_cells(profile, -L, 0.0, mesh), np.array([z]))
    center, radius, dirichlet = _disk_from_T(T, logs)
    return WeylDisk(complex(center[0]), float(radius[0]), float(L), complex(dirichlet[0]))
