"""Discretizations of the Hankel operator with symbol ``xi_{x,t}(k) R(k)``.

Two independent realizations are provided:

Nystrom
    The integral operator on ``L2(0, inf)`` with kernel ``F(s + u)``,
    ``F(sigma) = (1/2pi) int_{R+ih} xi R e^{ik sigma} dk``, discretized with a
    mapped Gauss-Legendre rule.  The matrix factorizes as
    ``M = E diag(c) E^T`` with ``E[i, l] = sqrt(w_i) exp(i k_l s_i)``.
Galerkin
    Matrix entries of the Hankel operator in the orthonormal basis
    ``e_n(k) = pi^{-1/2} (k - i)^n / (k + i)^{n+1}`` of the Hardy space of
    the upper half-plane.  The defining real-line integral is closed into
    the upper half-plane, leaving a contour integral over ``R + ih`` that
    never refers to a Fourier convention.

Contour integrals over ``R + ih`` use a rule in the scaled variable
``mu = sqrt(24 h t) lambda + Im z / sqrt(24 h t)`` that follows the Gaussian
envelope of ``|xi|``.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.optimize import brentq
from scipy.special import roots_hermite

from .scattering import QuadratureRule, ReflectionTable, reflection_values

__all__ = [
    "HankelError",
    "xi",
    "xi_abs",
    "lambda_rule",
    "auto_lambda_nodes",
    "OscillatorySymbol",
    "HankelDiscretization",
    "symbol_phi",
    "marchenko_kernel",
    "halfline_rule",
    "build_nystrom",
    "build_galerkin",
    "singular_values",
    "norm_bound",
    "table_norm_bound",
    "s_number_bound",
    "optimize_h",
    "MU_WINDOW",
]

MU_WINDOW = 8.0
_EXP_MAX = 700.0


class HankelError(ArithmeticError):
    """Overflow, contour collision, or a loss of contraction."""


# -- the cubic exponential -----------------------------------------------------

def xi(k, x, t):
    """``exp(i (8 k^3 t + 2 k x))``; raises on overflow instead of saturating."""
    k = np.asarray(k, dtype=complex)
    expo = 1j * (8.0 * k**3 * t + 2.0 * k * x)
    if np.any(np.real(expo) > _EXP_MAX):
        raise HankelError("xi overflows for the requested arguments")
    out = np.exp(expo)
    return complex(out) if out.ndim == 0 else out


def xi_abs(lam, h, z, t):
    """Closed form of ``|xi_{z,t}(lam + ih)|`` as a shifted Gaussian in ``lam``."""
    z = complex(z)
    a = math.sqrt(24.0 * h * t)
    lam = np.asarray(lam, dtype=float)
    out = np.exp(8 * h**3 * t - 2 * h * z.real + z.imag**2 / (24 * h * t)
                 - (a * lam + z.imag / a) ** 2)
    return float(out) if out.ndim == 0 else out


def auto_lambda_nodes(t: float, h: float, x_span: float = 0.0, kind: str = "trapezoid",
                      width: float = MU_WINDOW, safety: float = 1.0) -> int:
    """Node count resolving the oscillation of the contour integrands.

    The phase of ``xi(k) e^{ik sigma}`` on ``R + ih`` has ``lambda``-frequency
    at most ``24 t lambda^2 + 2|x| + sigma``; on the window this is bounded by
    ``64/h``, kernel arguments matter up to ``sigma ~ 36/h`` (beyond that
    ``e^{-h sigma}`` is negligible) and ``36/h`` more is reserved for the
    variation of ``R`` itself, whose singularities lie at least ``h`` below
    the contour.
    """
    a = math.sqrt(24.0 * h * t)
    omega = safety * (136.0 / h + 2.0 * abs(x_span)) / a
    dmu = 2.0 * math.pi / (omega + 12.0)
    if kind == "trapezoid":
        n = int(math.ceil(2.0 * width / dmu)) + 1
        return n + (n % 2 == 0)
    if kind == "hermite":
        return max(32, int(math.ceil(0.5 * (math.pi / dmu) ** 2)))
    raise ValueError(f"unknown rule kind {kind!r}")


def lambda_rule(z: complex = 0.0, t: float = 1.0, h: float = 1.0, n_nodes: int | None = None,
                kind: str = "trapezoid", width: float = MU_WINDOW,
                x_span: float | None = None) -> QuadratureRule:
    """Quadrature on the real ``lambda`` line adapted to ``|xi_{z,t}(lambda + ih)|``.

    Parameters
    ----------
    z : complex
        Spatial point; only ``Im z`` moves the Gaussian centre.
    t, h : float
        Time and contour height, both positive.
    n_nodes : int, optional
        Number of nodes; chosen by :func:`auto_lambda_nodes` when omitted.
    kind : {"trapezoid", "hermite"}
        Uniform rule on ``|mu| <= width`` or Gauss-Hermite nodes in ``mu``
        restricted to that window (weights carry the factor ``e^{mu^2}``).
    x_span : float, optional
        Largest ``|Re x|`` the rule has to serve (defaults to ``|Re z|``).

    Returns
    -------
    QuadratureRule
        ``sum(w * f(nodes))`` approximates ``int f(lambda) d lambda``.
    """
    if not (t > 0 and h > 0):
        raise ValueError("lambda_rule needs t > 0 and h > 0")
    z = complex(z)
    a = math.sqrt(24.0 * h * t)
    shift = z.imag / a
    if n_nodes is None:
        span = abs(z.real) if x_span is None else x_span
        n_nodes = auto_lambda_nodes(t, h, span, kind, width)
    if n_nodes < 1:
        raise ValueError("n_nodes must be positive")
    if kind == "trapezoid":
        if n_nodes == 1:
            mu, wmu = np.zeros(1), np.array([math.sqrt(math.pi)])
        else:
            mu = np.linspace(-width, width, n_nodes)
            wmu = np.full(n_nodes, mu[1] - mu[0])
    elif kind == "hermite":
        mu, w = roots_hermite(n_nodes)
        keep = np.abs(mu) <= width
        mu = mu[keep]
        wmu = w[keep] * np.exp(mu**2)
    else:
        raise ValueError(f"unknown rule kind {kind!r}")
    return QuadratureRule((mu - shift) / a, wmu / a, kind)


# -- symbol -----------------------------------------------------------------------

@dataclass(eq=False)
class OscillatorySymbol:
    """``phi(k) = xi_{x,t}(k) R(k)`` sampled on the contour of ``table``."""

    x: complex
    t: float
    h: float
    table: ReflectionTable
    phi_fn: object = field(default=None, repr=False)
    _g: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if not (self.t > 0 and self.h > 0):
            raise ValueError("symbol needs t > 0 and h > 0")
        if abs(self.table.h - self.h) > 1e-15 * self.h:
            raise ValueError("table height does not match h")

    @classmethod
    def from_values(cls, h: float, nodes, weights, g, phi_fn=None) -> "OscillatorySymbol":
        """Symbol with prescribed contour values ``g`` (tests and diagnostics)."""
        nodes = np.asarray(nodes, dtype=float)
        table = ReflectionTable(float(h), nodes, np.asarray(weights, dtype=float),
                                np.zeros(nodes.shape, dtype=complex), "custom")
        return cls(0.0, 1.0, float(h), table, phi_fn, np.asarray(g, dtype=complex))

    @classmethod
    def for_profile(cls, profile, x, t, table: ReflectionTable) -> "OscillatorySymbol":
        """Symbol whose continuation above the contour evaluates ``R`` directly."""

        def phi(k):
            return xi(k, x, t) * reflection_values(profile, k)

        return cls(x, t, table.h, table, phi)

    @property
    def k(self) -> np.ndarray:
        return self.table.k

    @property
    def weights(self) -> np.ndarray:
        return self.table.weights

    @property
    def is_real(self) -> bool:
        return complex(self.x).imag == 0.0

    @property
    def g(self) -> np.ndarray:
        if self._g is None:
            if self.table.is_zero:
                self._g = np.zeros(self.k.shape, dtype=complex)
            else:
                self._g = xi(self.k, self.x, self.t) * self.table.values
        return self._g

    def weighted(self) -> np.ndarray:
        """Quadrature-weighted contour samples ``W_l phi(k_l)``."""
        return self.weights * self.g


def symbol_phi(sym: OscillatorySymbol, k) -> complex:
    """Entire symbol ``Phi(k) = -(1/2 pi i) int phi(lam + ih) / (lam - k + ih) d lam``.

    Above the contour the analytic continuation adds ``phi(k)`` itself.
    """
    k = np.atleast_1d(np.asarray(k, dtype=complex))
    dist = np.abs(k.imag - sym.h)
    if np.any(dist < 1e-8):
        raise HankelError("k lies on the integration contour")
    wg = sym.weighted()
    out = -(wg[None, :] / (sym.k[None, :] - k[:, None])).sum(axis=1) / (2j * math.pi)
    above = k.imag > sym.h
    if np.any(above):
        if sym.phi_fn is None:
            raise HankelError("evaluation above the contour needs the symbol off the contour")
        out[above] += sym.phi_fn(k[above])
    return complex(out[0]) if out.size == 1 else out


def marchenko_kernel(sym: OscillatorySymbol, sigma, return_imag: bool = False):
    """Kernel ``F(sigma) = (1/2 pi) int_{R+ih} phi(k) e^{ik sigma} dk``.

    For real ``x`` the imaginary part is a quadrature residual; it is returned
    separately when ``return_imag`` is set and dropped otherwise.
    """
    sigma = np.atleast_1d(np.asarray(sigma, dtype=float))
    if np.any(sigma < 0):
        raise ValueError("sigma must be nonnegative")
    wg = sym.weighted()
    raw = np.empty(sigma.size, dtype=complex)
    step = max(1, 2**21 // max(1, wg.size))  # bound the size of the phase block
    for i in range(0, sigma.size, step):
        raw[i:i + step] = np.exp(1j * np.outer(sigma[i:i + step], sym.k)) @ wg
    raw /= 2 * math.pi
    if sym.is_real:
        val = raw.real
        if return_imag:
            return val, np.abs(raw.imag)
    else:
        val = raw
    return val


# -- discretizations ---------------------------------------------------------------

@dataclass(eq=False)
class HankelDiscretization:
    """Finite section of the Hankel operator.

    ``derivatives`` holds the x-derivatives ``K1, K2`` for Nystrom matrices
    built with ``derivatives=2``.
    """

    kind: str
    matrix: np.ndarray
    size: int
    nodes: np.ndarray | None = None
    weights: np.ndarray | None = None
    derivatives: tuple = ()
    imag_residual: float = 0.0

    def eigenvalues(self) -> np.ndarray:
        if np.isrealobj(self.matrix):
            return np.linalg.eigvalsh(self.matrix)
        return np.linalg.eigvals(self.matrix)

    def spectral_radius(self) -> float:
        if self.size == 0:
            return 0.0
        return float(np.max(np.abs(self.eigenvalues())))


def halfline_rule(n: int, h: float, tau: float | None = None):
    """Gauss-Legendre nodes mapped by ``s = tau u / (1 - u)`` onto ``(0, inf)``."""
    if n < 1:
        raise ValueError("need at least one node")
    tau = 3.0 / h if tau is None else float(tau)
    u, w = leggauss(n)
    u = 0.5 * (u + 1.0)
    w = 0.5 * w
    s = tau * u / (1.0 - u)
    ws = w * tau / (1.0 - u) ** 2
    return s, ws


_E_CACHE: dict = {}
_E_LOCK = threading.Lock()


def _exp_matrix(s, ws, k):
    key = (s.tobytes(), k.tobytes())
    with _E_LOCK:
        hit = _E_CACHE.get(key)
    if hit is not None:
        return hit
    E = np.sqrt(ws)[:, None] * np.exp(1j * np.outer(s, k))
    with _E_LOCK:
        if len(_E_CACHE) > 8:
            _E_CACHE.clear()
        _E_CACHE[key] = E
    return E


def _assemble(E, c, real):
    M = (E * c) @ E.T
    M = 0.5 * (M + M.T)  # exact symmetry; BLAS products are not bitwise symmetric
    if real:
        scale = max(1.0, float(np.max(np.abs(M.real), initial=0.0)))
        return np.ascontiguousarray(M.real), float(np.max(np.abs(M.imag), initial=0.0)) / scale
    return M, 0.0


def build_nystrom(sym: OscillatorySymbol, n_nodes: int, tau: float | None = None,
                  derivatives: int = 0, imag_tol: float = 1e-11) -> HankelDiscretization:
    """Nystrom matrix ``M_ij = sqrt(w_i w_j) F(s_i + s_j)``.

    With ``derivatives`` = 1 or 2 the matrices of the x-derivatives of the
    kernel are assembled as well (the contour integrand is multiplied by
    ``2ik`` per derivative).
    """
    if n_nodes < 2:
        raise ValueError("Nystrom discretization needs n >= 2")
    s, ws = halfline_rule(n_nodes, sym.h, tau)
    c = sym.weighted() / (2 * math.pi)
    real = sym.is_real
    if not np.any(c):
        Z = np.zeros((n_nodes, n_nodes))
        return HankelDiscretization("nystrom", Z, n_nodes, s, ws,
                                    tuple(Z.copy() for _ in range(derivatives)))
    E = _exp_matrix(s, ws, sym.k)
    M, res = _assemble(E, c, real)
    derivs = []
    ik2 = 2j * sym.k
    for d in range(1, derivatives + 1):
        K, r = _assemble(E, c * ik2**d, real)
        derivs.append(K)
        res = max(res, r)
    if real and res > imag_tol:
        raise HankelError(f"Nystrom matrix has imaginary residual {res:.2e} for real x")
    return HankelDiscretization("nystrom", M, n_nodes, s, ws, tuple(derivs), res)


def build_galerkin(sym: OscillatorySymbol, basis_size: int) -> HankelDiscretization:
    """Galerkin matrix of the Hankel operator in the rational Hardy basis.

    ``G_mn = <H e_n, e_m> = -(1/pi) int_{R+ih} phi(k) w(k)^{m+n} / (k+i)^2 dk``
    with ``w = (k - i)/(k + i)``, obtained by closing the defining real-line
    integral into the upper half-plane.
    """
    if basis_size < 1:
        raise ValueError("basis_size must be positive")
    k = sym.k
    w = (k - 1j) / (k + 1j)
    V = w[None, :] ** np.arange(basis_size)[:, None]
    c = -sym.weighted() / (math.pi * (k + 1j) ** 2)
    G = (V * c) @ V.T
    G = 0.5 * (G + G.T)
    res = 0.0
    if sym.is_real:
        scale = max(1.0, float(np.max(np.abs(G.real), initial=0.0)))
        res = float(np.max(np.abs(G.imag), initial=0.0)) / scale
        G = np.ascontiguousarray(G.real)
    return HankelDiscretization("galerkin", G, basis_size, imag_residual=res)


def singular_values(disc: HankelDiscretization) -> np.ndarray:
    """Singular values in decreasing order."""
    if disc.size == 0:
        return np.zeros(0)
    return np.linalg.svd(disc.matrix, compute_uv=False)


# -- bounds -------------------------------------------------------------------------

def _bound_exponent(z, t, h):
    z = complex(z)
    return 8 * h**3 * t - 2 * h * z.real + z.imag**2 / (24 * h * t)


def norm_bound(z: complex, t: float, h: float) -> float:
    """Closed-form bound ``sqrt(1/(24 pi h^3 t)) exp(8h^3 t - 2h Re z + Im^2 z/(24ht))``."""
    if not (t > 0 and h > 0):
        raise ValueError("norm_bound needs t > 0 and h > 0")
    e = _bound_exponent(z, t, h)
    if e > _EXP_MAX:
        return math.inf
    return math.sqrt(1.0 / (24 * math.pi * h**3 * t)) * math.exp(e)


def table_norm_bound(z: complex, t: float, table: ReflectionTable) -> float:
    """``(2 pi h)^{-1} int |xi_{z,t}(lam + ih) R(lam + ih)| d lam`` from a table."""
    h = table.h
    mag = xi_abs(table.nodes, h, z, t) * np.abs(table.values)
    return float(np.dot(table.weights, mag)) / (2 * math.pi * h)


def s_number_bound(n, z: complex, t: float, table: ReflectionTable, rate: str = "h/2"):
    """Singular-number envelope ``(2/h) int|xi R| exp(-rate n)``.

    ``rate`` selects the decay exponent per index, ``"h/2"`` or ``"2/h"``.
    Both exponents are supported; neither is preferred.
    """
    h = table.h
    l1 = float(np.dot(table.weights, xi_abs(table.nodes, h, z, t) * np.abs(table.values)))
    a = {"h/2": h / 2.0, "2/h": 2.0 / h}[rate]
    return (2.0 / h) * l1 * np.exp(-a * np.asarray(n, dtype=float))


def optimize_h(z: complex, t: float, lo: float = 1e-3, hi: float = 1e3) -> float:
    """Contour height minimizing :func:`norm_bound` at fixed ``(z, t)``.

    ``d/dh log bound = -3/(2h) - Im^2 z/(24 h^2 t) + 24 h^2 t - 2 Re z`` is
    increasing in ``h``, so its root is found by bracketing.
    """
    if not t > 0:
        raise ValueError("optimize_h needs t > 0")
    z = complex(z)

    def dlog(h):
        return -1.5 / h - z.imag**2 / (24 * h * h * t) + 24 * h * h * t - 2 * z.real

    if dlog(lo) >= 0:
        return lo
    if dlog(hi) <= 0:
        return hi
    return float(brentq(dlog, lo, hi, xtol=1e-14, rtol=1e-15))
