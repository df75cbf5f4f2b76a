"""Right reflection coefficient and cached contour tables on ``R + ih``."""
from __future__ import annotations

import hashlib
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .profiles import MiuraProfile
from .weyl import m_values

__all__ = [
    "ScatteringError",
    "QuadratureRule",
    "ReflectionTable",
    "reflection",
    "reflection_values",
    "build_table",
    "clear_cache",
    "dump_table",
    "load_table",
]


class ScatteringError(ArithmeticError):
    """Reflection evaluation failed or violated ``|R| <= 1``."""


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Nodes and weights for integrals over the real line."""

    nodes: np.ndarray
    weights: np.ndarray
    kind: str = "custom"

    @property
    def key(self) -> str:
        h = hashlib.sha1()
        h.update(np.ascontiguousarray(self.nodes, dtype=float).tobytes())
        h.update(np.ascontiguousarray(self.weights, dtype=float).tobytes())
        return f"{self.kind}:{self.nodes.size}:{h.hexdigest()[:16]}"

    def __len__(self) -> int:
        return self.nodes.size


@dataclass(frozen=True, eq=False)
class ReflectionTable:
    """Samples ``R(nodes + ih)`` with the weights of the generating rule."""

    h: float
    nodes: np.ndarray
    weights: np.ndarray
    values: np.ndarray
    profile_id: str = ""

    @property
    def k(self) -> np.ndarray:
        return self.nodes + 1j * self.h

    @property
    def is_zero(self) -> bool:
        return not np.any(self.values)

    def symmetry_residual(self) -> float:
        """``max |R(-lambda + ih) - conj R(lambda + ih)|`` over mirrored node pairs."""
        order = np.argsort(self.nodes)
        lam = self.nodes[order]
        val = self.values[order]
        if not np.allclose(lam, -lam[::-1], rtol=0, atol=1e-14 * max(1.0, np.abs(lam).max())):
            raise ScatteringError("node set is not symmetric")
        return float(np.max(np.abs(val[::-1] - np.conj(val)), initial=0.0))


def _r_from_m(k, m):
    ik = 1j * k
    return (ik - m) / (ik + m)


def reflection_values(profile: MiuraProfile, k, tol: float = 1e-12,
                      mesh: float | None = None, check: bool = True,
                      mirror: bool = True) -> np.ndarray:
    """Vectorized ``R(k) = (ik - m(k^2)) / (ik + m(k^2))`` for ``Im k >= 0``.

    Points with ``Re k < 0`` are obtained from ``R(-conj k) = conj R(k)``, so
    the symmetry holds exactly; ``mirror=False`` evaluates them directly
    instead.  Real ``k`` are boundary values from above and need an exact-tail
    profile.
    """
    k = np.atleast_1d(np.asarray(k, dtype=complex))
    if np.any(k.imag < 0):
        raise ScatteringError("reflection needs Im k >= 0")
    if np.any(k == 0):
        raise ScatteringError("reflection is not defined at k = 0")
    flip = (k.real < 0) & mirror
    kk = np.where(flip, -np.conj(k), k)
    if profile.is_zero:
        return np.zeros(k.shape, dtype=complex)
    boundary = kk.imag == 0
    z = kk * kk
    m = np.empty(k.shape, dtype=complex)
    if np.any(~boundary):
        m[~boundary] = m_values(profile, z[~boundary], tol, mesh, mirror=mirror)
    if np.any(boundary):
        if not profile.exact_tail:
            raise ScatteringError("real-axis reflection needs a profile with constant tail Q")
        # approach the cut from above: z + i0
        zb = np.asarray(kk[boundary].real ** 2, dtype=complex) + 0j
        m[boundary] = _boundary_m(profile, zb, mesh)
    R = _r_from_m(kk, m)
    R = np.where(flip, np.conj(R), R)
    if check:
        bad = ~(np.abs(R) <= 1.0 + 10 * max(tol, 1e-10))
        interior = k.imag > 0
        if np.any(bad & interior):
            i = int(np.flatnonzero(bad & interior)[0])
            raise ScatteringError(f"|R| = {abs(R[i])} > 1 at k = {k[i]}")
    return R


def _boundary_m(profile, z, mesh):
    from . import kernels
    from .weyl import build_cells

    L = -profile.q_free_left
    Qt = profile.tail_Q
    root = -1j * np.sqrt(z.real)  # sqrt(-(z + i0))
    y0 = np.column_stack([np.ones_like(z), root - Qt])
    Y = y0 if L == 0 else kernels.propagate_state(build_cells(profile, -L, 0.0, mesh), z, y0)
    return -Y[:, 1] / Y[:, 0]


def reflection(profile: MiuraProfile, k: complex, tol: float = 1e-12,
               mesh: float | None = None) -> complex:
    """Right reflection coefficient at a single point of the closed upper half-plane."""
    return complex(reflection_values(profile, np.array([k]), tol, mesh)[0])


# -- tables -----------------------------------------------------------------

_CACHE: dict = {}
_CACHE_LOCK = threading.Lock()


def clear_cache() -> None:
    with _CACHE_LOCK:
        _CACHE.clear()


def _default_workers() -> int:
    return os.cpu_count() or 1


def build_table(profile: MiuraProfile, h: float, rule: QuadratureRule, tol: float = 1e-12,
                workers: int | None = None, mesh: float | None = None,
                cache: bool = True) -> ReflectionTable:
    """Evaluate ``R`` at ``rule.nodes + ih``.

    Node evaluation is split into chunks processed by a thread pool (the
    propagation kernel releases the GIL).  Tables are cached per
    ``(profile, h, rule, tol, mesh)``.
    """
    if not h > 0:
        raise ScatteringError("contour height h must be positive")
    key = (profile.key, float(h), rule.key, float(tol), mesh)
    if cache:
        with _CACHE_LOCK:
            hit = _CACHE.get(key)
        if hit is not None:
            return hit
    nodes = np.asarray(rule.nodes, dtype=float)
    k = nodes + 1j * h
    workers = workers or _default_workers()
    if profile.is_zero:
        values = np.zeros(nodes.shape, dtype=complex)
    elif workers <= 1 or nodes.size < 64:
        values = _table_chunk(profile, k, tol, mesh)
    else:
        chunks = np.array_split(np.arange(nodes.size), min(workers * 4, nodes.size))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda idx: _table_chunk(profile, k[idx], tol, mesh), chunks))
        values = np.concatenate(parts)
    table = ReflectionTable(float(h), nodes, np.asarray(rule.weights, dtype=float), values,
                            profile.key)
    if cache:
        with _CACHE_LOCK:
            table = _CACHE.setdefault(key, table)
    return table


def _table_chunk(profile, k, tol, mesh):
    try:
        return reflection_values(profile, k, tol, mesh)
    except (ScatteringError, ArithmeticError) as exc:
        for kk in k:
            try:
                reflection_values(profile, np.array([kk]), tol, mesh)
            except (ScatteringError, ArithmeticError) as inner:
                raise ScatteringError(f"node lambda={kk.real!r}: {inner}") from inner
        raise ScatteringError(str(exc)) from exc


def dump_table(table: ReflectionTable, path) -> None:
    """Write a table as text.

    Layout: ``h <value>``, ``n <count>``, ``profile <id>``, then one row per
    node ``lambda weight Re(R) Im(R)`` in 17 significant digits.
    """
    with open(path, "w") as fh:
        fh.write(f"h {table.h:.17e}\n")
        fh.write(f"n {table.nodes.size}\n")
        fh.write(f"profile {table.profile_id}\n")
        for lam, w, v in zip(table.nodes, table.weights, table.values):
            fh.write(f"{lam:.17e} {w:.17e} {v.real:.17e} {v.imag:.17e}\n")


def load_table(path) -> ReflectionTable:
    with open(path) as fh:
        h = float(fh.readline().split()[1])
        n = int(fh.readline().split()[1])
        parts = fh.readline().split(maxsplit=1)
        profile_id = parts[1].strip() if len(parts) > 1 else ""
        data = np.loadtxt(fh, ndmin=2) if n else np.zeros((0, 4))
    if data.shape[0] != n:
        raise ValueError(f"table file declares {n} rows but holds {data.shape[0]}")
    return ReflectionTable(h, data[:, 0].copy(), data[:, 1].copy(),
                           data[:, 2] + 1j * data[:, 3], profile_id)
