"""KdV solution ``q(x, t) = -2 d^2/dx^2 log det(I + H(x, t))``.

The second x-derivative is taken analytically: with ``K`` the Nystrom matrix,
``K1, K2`` its first two x-derivatives and ``A = (I + K)^{-1}``,

    d^2/dx^2 log det(I + K) = tr(A K2) - tr((A K1)^2).

A five-point finite difference of ``log det`` guards the formula.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .hankel import (
    OscillatorySymbol,
    build_nystrom,
    halfline_rule,
    lambda_rule,
    marchenko_kernel,
    norm_bound,
    optimize_h,
    table_norm_bound,
)
from .profiles import MiuraProfile
from .scattering import QuadratureRule, ReflectionTable, build_table

__all__ = [
    "DysonError",
    "SolveOptions",
    "SolutionSample",
    "ParabolicDomain",
    "CertificateReport",
    "logdet_iplus",
    "resolve_h",
    "q_value",
    "q_grid",
    "rule_gap",
    "pole_free_certificate",
    "kdv_residual",
]

FD_STEP = 1e-3
RULE_TOL = 1e-9
_H_RANGE = (0.25, 2.0)


class DysonError(ArithmeticError):
    """Loss of contraction, invalid time, or a failed stencil evaluation."""


@dataclass(frozen=True)
class SolveOptions:
    """Numerical controls for the determinant pipeline.

    Attributes
    ----------
    h : "auto" or float
        Contour height; ``"auto"`` minimizes the norm bound at the leftmost
        grid point and clips the result to ``[0.25, 2]``.
    n_nodes : int
        Nystrom half-line nodes.
    n_lambda : int, optional
        Contour nodes; chosen from the oscillation estimate when omitted.
    rule : {"trapezoid", "hermite"}
    tol : float
        Tolerance passed to the m-function (Weyl-disk mode).
    mesh : float, optional
        Cell width on smooth profile pieces.
    fd_step : float
        Step of the finite-difference cross-check; 0 disables it.
    t_min : float
        Smallest admissible time.
    workers : int
        Threads for table construction and grid evaluation.
    rule_check : bool
        Rebuild the contour table with the other lambda-rule and flag the
        grid when the kernels differ by more than ``RULE_TOL``.
    """

    h: object = "auto"
    n_nodes: int = 128
    n_lambda: int | None = None
    rule: str = "trapezoid"
    tol: float = 1e-12
    mesh: float | None = None
    fd_step: float = FD_STEP
    t_min: float = 1e-4
    workers: int = 1
    rule_check: bool = False


@dataclass
class SolutionSample:
    x: complex
    t: float
    q: complex
    logdet: complex
    norm_bound: float
    fd_crosscheck_error: float
    n_used: tuple
    h: float
    spectral_radius: float = math.nan
    imag_residual: float = 0.0
    error: str | None = None
    rule_gap: float = math.nan

    @property
    def ok(self) -> bool:
        return self.error is None


def logdet_iplus(M: np.ndarray) -> complex:
    """``log det(I + M)`` for a matrix of spectral radius below one.

    Real symmetric input goes through its eigenvalues, which also certify the
    precondition; complex symmetric input uses an LU factorization.
    """
    M = np.asarray(M)
    if M.size == 0:
        return 0.0
    if np.isrealobj(M):
        mu = np.linalg.eigvalsh(M)
        if mu[0] <= -1.0:
            raise DysonError(f"eigenvalue {mu[0]:.6g} <= -1: discretization failure")
        if max(abs(mu[0]), abs(mu[-1])) >= 1.0:
            raise DysonError("spectral radius >= 1")
        return float(np.sum(np.log1p(mu)))
    sign, logabs = np.linalg.slogdet(np.eye(M.shape[0]) + M)
    if sign == 0:
        raise DysonError("I + M is singular")
    return complex(np.log(sign) + logabs)


def resolve_h(opts: SolveOptions, x_ref: complex, t: float) -> float:
    if opts.h == "auto":
        lo, hi = _H_RANGE
        return float(min(max(optimize_h(x_ref, t), lo), hi))
    h = float(opts.h)
    if not h > 0:
        raise DysonError("h must be positive")
    return h


def _check_t(t, opts):
    if not t > 0:
        raise DysonError("t must be positive")
    if t < opts.t_min:
        raise DysonError(f"t = {t} below t_min = {opts.t_min}; lower t_min to force")


def _rule_for(xs, t, h, opts) -> QuadratureRule:
    xs = np.atleast_1d(np.asarray(xs, dtype=complex))
    span = float(np.max(np.abs(xs.real))) + 2 * opts.fd_step
    im = xs.imag
    if np.ptp(im) > 0:
        raise DysonError("a shared contour rule needs a common Im x")
    return lambda_rule(complex(0.0, im[0]), t, h, opts.n_lambda, opts.rule, x_span=span)


def _prepare(profile, xs, t, opts, table=None):
    _check_t(t, opts)
    if table is None:
        xs = np.atleast_1d(np.asarray(xs, dtype=complex))
        h = resolve_h(opts, complex(np.min(xs.real), xs.imag[0]), t)
        rule = _rule_for(xs, t, h, opts)
        table = build_table(profile, h, rule, opts.tol, opts.workers, opts.mesh)
    return table


def _analytic_q(table, x, t, n):
    sym = OscillatorySymbol(x, t, table.h, table)
    disc = build_nystrom(sym, n, derivatives=2)
    K, K1, K2 = disc.matrix, disc.derivatives[0], disc.derivatives[1]
    I = np.eye(n)
    A = np.linalg.solve(I + K, I)
    AK1 = A @ K1
    d2 = np.trace(A @ K2) - np.sum(AK1 * AK1.T)
    return -2.0 * d2, logdet_iplus(K), disc


def _logdet_at(table, x, t, n):
    disc = build_nystrom(OscillatorySymbol(x, t, table.h, table), n)
    return logdet_iplus(disc.matrix)


def _sample(profile, x, t, opts, table) -> SolutionSample:
    n = opts.n_nodes
    h = table.h
    nb = norm_bound(x, t, h)
    if complex(x).imag != 0 and not nb < 1:
        raise DysonError(f"uncertified: norm bound {nb:.3g} >= 1 at complex x={x}")
    if table.is_zero:
        return SolutionSample(x, t, 0.0, 0.0, nb, 0.0, (n, table.nodes.size), h, 0.0)
    q, ld, disc = _analytic_q(table, x, t, n)
    rho = disc.spectral_radius()
    if rho >= 1.0:
        raise DysonError(f"spectral radius {rho:.6g} >= 1 at x={x}")
    fd_err = math.nan
    if opts.fd_step > 0:
        d = opts.fd_step
        f = [_logdet_at(table, x + j * d, t, n) if j else ld for j in (-2, -1, 0, 1, 2)]
        f2 = (-f[0] + 16 * f[1] - 30 * f[2] + 16 * f[3] - f[4]) / (12 * d * d)
        fd_err = float(abs(q - (-2.0 * f2)))
    if complex(x).imag == 0:
        q = float(np.real(q))
        ld = float(np.real(ld))
    return SolutionSample(x, t, q, ld, nb, fd_err, (n, table.nodes.size), h, rho,
                          disc.imag_residual)


def q_value(profile: MiuraProfile, x, t: float, opts: SolveOptions | None = None,
            table: ReflectionTable | None = None) -> SolutionSample:
    """Solution sample at one point; errors propagate as exceptions."""
    opts = opts or SolveOptions()
    table = _prepare(profile, [x], t, opts, table)
    return _sample(profile, x, t, opts, table)


def q_grid(profile: MiuraProfile, xs, t: float, opts: SolveOptions | None = None,
           table: ReflectionTable | None = None) -> list[SolutionSample]:
    """Samples on a grid sharing one contour table; per-point errors are recorded."""
    opts = opts or SolveOptions()
    xs = list(np.atleast_1d(xs))
    table = _prepare(profile, xs, t, opts, table)

    def one(x):
        try:
            return _sample(profile, x, t, opts, table)
        except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
            return SolutionSample(x, t, math.nan, math.nan, norm_bound(x, t, table.h), math.nan,
                                  (opts.n_nodes, table.nodes.size), table.h, error=str(exc))

    if opts.workers > 1 and len(xs) > 1:
        with ThreadPoolExecutor(max_workers=opts.workers) as pool:
            out = list(pool.map(one, xs))
    else:
        out = [one(x) for x in xs]
    if opts.rule_check and not table.is_zero:
        gap = rule_gap(profile, xs, t, opts, table)
        for s in out:
            s.rule_gap = gap
            if gap > RULE_TOL and s.error is None:
                s.error = f"trapezoid and hermite rules disagree by {gap:.2e}"
    return out


def rule_gap(profile: MiuraProfile, xs, t: float, opts: SolveOptions | None = None,
             table: ReflectionTable | None = None) -> float:
    """Largest kernel difference between the trapezoid and Hermite contour rules.

    The kernel ``F(sigma)`` determines the operator, so it is compared on the
    sums ``s_i + s_j`` of the half-line nodes (relative to ``max |F|``) at the
    leftmost, middle and rightmost grid points.
    """
    opts = opts or SolveOptions()
    xs = sorted(np.atleast_1d(xs), key=lambda v: complex(v).real)
    table = _prepare(profile, xs, t, opts, table)
    other = replace(opts, rule="hermite" if opts.rule == "trapezoid" else "trapezoid")
    alt = build_table(profile, table.h, _rule_for(xs, t, table.h, other),
                      opts.tol, opts.workers, opts.mesh)
    s, _ = halfline_rule(opts.n_nodes, table.h)
    sigma = np.unique(np.add.outer(s, s).ravel())
    gap = 0.0
    for x in {xs[0], xs[len(xs) // 2], xs[-1]}:
        f1 = marchenko_kernel(OscillatorySymbol(x, t, table.h, table), sigma)
        f2 = marchenko_kernel(OscillatorySymbol(x, t, table.h, alt), sigma)
        scale = max(1.0, float(np.max(np.abs(f1))))
        gap = max(gap, float(np.max(np.abs(f1 - f2))) / scale)
    return gap


# -- pole-free domains -----------------------------------------------------------

@dataclass(frozen=True)
class ParabolicDomain:
    """``Im^2 z / 12 < delta Re z - delta^2 + (sqrt(delta t)/4) log(t / delta^3)``."""

    delta: float
    t: float

    def __post_init__(self):
        if not (self.delta > 0 and self.t > 0):
            raise ValueError("domain needs delta > 0 and t > 0")

    @property
    def h(self) -> float:
        """Contour height tied to the domain by ``delta = 4 h^2 t``."""
        return math.sqrt(self.delta / (4 * self.t))

    def slack(self, z) -> float:
        z = complex(z)
        d, t = self.delta, self.t
        rhs = d * z.real - d * d + math.sqrt(d * t) / 4 * math.log(t / d**3)
        return rhs - z.imag**2 / 12

    def contains(self, z) -> bool:
        return self.slack(z) > 0

    def bound_slack(self, z) -> float:
        """Slack of the exact region where the closed-form norm bound is below one."""
        z = complex(z)
        d, t = self.delta, self.t
        rhs = (d * z.real - d * d
               + math.sqrt(d * t) / 2 * math.log(3 * math.pi * d**1.5 / math.sqrt(t)))
        return rhs - z.imag**2 / 12

    def boundary_re(self, im: float = 0.0) -> float:
        """``Re z`` on the domain boundary at height ``im``."""
        d, t = self.delta, self.t
        return (im * im / 12 + d * d - math.sqrt(d * t) / 4 * math.log(t / d**3)) / d

    def bound_boundary_re(self, im: float = 0.0) -> float:
        d, t = self.delta, self.t
        return (im * im / 12 + d * d
                - math.sqrt(d * t) / 2 * math.log(3 * math.pi * d**1.5 / math.sqrt(t))) / d


@dataclass
class CertificateReport:
    delta: float
    t: float
    h: float
    z: list
    bounds: list
    table_bounds: list = field(default_factory=list)

    @property
    def margins(self) -> list:
        return [1.0 - b for b in self.bounds]

    @property
    def passed(self) -> bool:
        return all(b < 1.0 for b in self.bounds)


def pole_free_certificate(profile: MiuraProfile | None, t: float, delta: float, sample_z,
                          opts: SolveOptions | None = None) -> CertificateReport:
    """Check ``norm_bound(z, t, h) < 1`` with ``h = sqrt(delta / (4t))`` at each sample.

    When a profile is given the table-based bound is reported as well.
    """
    dom = ParabolicDomain(delta, t)
    zs = [complex(z) for z in sample_z]
    for z in zs:
        if not dom.contains(z):
            raise DysonError(f"sample z={z} lies outside the parabolic domain")
    h = dom.h
    bounds = [norm_bound(z, t, h) for z in zs]
    tb = []
    if profile is not None and zs:
        opts = opts or SolveOptions()
        for z in zs:
            rule = lambda_rule(z, t, h, opts.n_lambda, opts.rule)
            table = build_table(profile, h, rule, opts.tol, opts.workers, opts.mesh)
            tb.append(table_norm_bound(z, t, table))
    return CertificateReport(delta, t, h, zs, bounds, tb)


# -- KdV residual -------------------------------------------------------------------

_D1 = np.array([-1, 9, -45, 0, 45, -9, 1]) / 60.0
_D3 = np.array([-7, 72, -338, 488, 0, -488, 338, -72, 7]) / 240.0


def kdv_residual(profile: MiuraProfile, x: float, t: float, steps=(0.05, 0.01),
                 opts: SolveOptions | None = None) -> float:
    """``|q_t - 6 q q_x + q_xxx|`` from sixth-order central differences.

    All stencil points share one contour rule built at the earliest stencil
    time, so the residual measures the solution rather than rule changes.
    """
    opts = replace(opts or SolveOptions(), fd_step=0.0)
    dx, dt = steps
    t_lo = t - 3 * dt
    _check_t(t_lo, opts)
    xs = x + dx * np.arange(-4, 5)
    h = resolve_h(opts, float(xs.min()), t_lo)
    span = float(np.max(np.abs(xs)))
    rule = lambda_rule(0.0, t_lo, h, opts.n_lambda, opts.rule, x_span=span)
    table = build_table(profile, h, rule, opts.tol, opts.workers, opts.mesh)
    if table.is_zero:
        return 0.0

    def q_at(xx, tt):
        return float(_sample(profile, xx, tt, opts, table).q)

    qx = np.array([q_at(xx, t) for xx in xs])
    qt = np.array([q_at(x, t + j * dt) if j else qx[4] for j in range(-3, 4)])
    q_t = np.dot(_D1, qt) / dt
    q_x = np.dot(_D1, qx[1:-1]) / dx
    q_xxx = np.dot(_D3, qx) / dx**3
    return float(abs(q_t - 6 * qx[4] * q_x + q_xxx))
