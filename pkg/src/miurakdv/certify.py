"""Runnable invariant suite for one profile.

Each check returns a :class:`Check` with a margin (positive when passed).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from .dyson import RULE_TOL, ParabolicDomain, SolveOptions, pole_free_certificate, resolve_h, rule_gap
from .hankel import (
    OscillatorySymbol,
    build_galerkin,
    build_nystrom,
    lambda_rule,
    singular_values,
)
from .profiles import MiuraProfile
from .scattering import ReflectionTable, build_table, reflection_values
from .weyl import m_values, propagate

__all__ = [
    "Check",
    "check_reflection_table",
    "check_reflection_symmetry",
    "check_unimodular",
    "check_herglotz",
    "check_contraction",
    "check_singular_decay",
    "check_determinant_consistency",
    "check_rule_agreement",
    "check_pole_free",
    "decay_slope",
    "domain_samples",
    "run_suite",
]


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    margin: float
    detail: str = ""


def upper_half_samples(n: int, seed: int = 0, re=(-4.0, 4.0), im=(0.05, 4.0)) -> np.ndarray:
    """Quasi-random points of the upper half-plane (scrambled Halton)."""
    pts = qmc.Halton(2, scramble=True, seed=seed).random(n)
    return (re[0] + (re[1] - re[0]) * pts[:, 0]) + 1j * (im[0] + (im[1] - im[0]) * pts[:, 1])


def check_reflection_table(table: ReflectionTable, slack: float = 1e-9) -> Check:
    worst = float(np.max(np.abs(table.values), initial=0.0))
    return Check("reflection_bound", bool(worst <= 1 + slack), 1 + slack - worst,
                 f"max |R| on table = {worst:.17g}")


def check_reflection_symmetry(profile: MiuraProfile, ks=None, tol: float = 1e-10) -> Check:
    ks = upper_half_samples(64, seed=1, re=(0.05, 4.0)) if ks is None else np.asarray(ks)
    # the mirrored points are propagated directly, not folded by symmetry
    a = reflection_values(profile, ks)
    b = reflection_values(profile, -np.conj(ks), mirror=False)
    err = float(np.max(np.abs(b - np.conj(a)), initial=0.0))
    return Check("reflection_symmetry", bool(err <= tol), tol - err, f"max residual {err:.3e}")


def check_unimodular(profile: MiuraProfile, zs=None, tol: float = 1e-12) -> Check:
    zs = upper_half_samples(32, seed=2, re=(-2, 2), im=(0.1, 2)) if zs is None else zs
    worst = 0.0
    for z in zs:
        for lo, hi in ((-2.0, 0.0), (-1.0, -0.25)):
            worst = max(worst, abs(propagate(profile, z, lo, hi).det - 1.0))
    return Check("unimodular", bool(worst <= tol), float(tol - worst), f"max |det T - 1| = {worst:.3e}")


def check_herglotz(profile: MiuraProfile, n: int = 100, seed: int = 3) -> Check:
    zs = upper_half_samples(n, seed=seed)
    m = m_values(profile, zs)
    worst = float(np.min(m.imag))
    return Check("herglotz", bool(worst > 0), worst, f"min Im m = {worst:.3e} over {n} points")


def check_contraction(profile: MiuraProfile, xs=(-4, -2, 0, 2, 4), ts=(0.05, 0.1, 0.5, 1.0),
                      opts: SolveOptions | None = None) -> Check:
    opts = opts or SolveOptions()
    worst = 0.0
    for t in ts:
        h = resolve_h(opts, min(xs), t)
        rule = lambda_rule(0.0, t, h, opts.n_lambda, opts.rule, x_span=max(map(abs, xs)))
        table = build_table(profile, h, rule, opts.tol, opts.workers, opts.mesh)
        for x in xs:
            disc = build_nystrom(OscillatorySymbol(x, t, h, table), opts.n_nodes)
            worst = max(worst, disc.spectral_radius())
    return Check("contraction", bool(worst < 1), 1 - worst, f"max spectral radius {worst:.6f}")


def decay_slope(sv: np.ndarray, floor: float = 1e-13) -> tuple[float, int]:
    """Least-squares slope of ``log s_n`` against ``n`` above the noise floor."""
    sv = np.asarray(sv)
    if sv.size == 0 or sv[0] == 0:
        return -math.inf, 0
    keep = np.flatnonzero(sv > floor * sv[0])
    m = int(keep[-1]) + 1 if keep.size else 1
    if m < 2:
        return -math.inf, m
    n = np.arange(m)
    return float(np.polyfit(n, np.log(sv[:m]), 1)[0]), m


def check_singular_decay(profile: MiuraProfile, x: float = 0.0, t: float = 1.0, h: float = 1.0,
                         n_nodes: int = 96) -> Check:
    table = build_table(profile, h, lambda_rule(x, t, h))
    sv = singular_values(build_nystrom(OscillatorySymbol(x, t, h, table), n_nodes))
    slope, m = decay_slope(sv)
    target = -h / 2 + 0.1
    return Check("singular_decay", bool(slope <= target), target - slope,
                 f"slope {slope:.4f} over {m} values (target <= {target:.2f})")


def check_determinant_consistency(profile: MiuraProfile,
                                  points=((0.0, 1.0), (1.0, 0.5), (-1.0, 1.0)),
                                  tol: float = 1e-6, h: float = 1.0, n: int = 96) -> Check:
    worst = 0.0
    for x, t in points:
        table = build_table(profile, h, lambda_rule(x, t, h, x_span=abs(x) + 4))
        sym = OscillatorySymbol(x, t, h, table)
        dn = np.linalg.det(np.eye(n) + build_nystrom(sym, n).matrix)
        dg = np.linalg.det(np.eye(n) + build_galerkin(sym, n).matrix)
        worst = max(worst, abs(dn - dg) / abs(dg))
    return Check("determinant_consistency", bool(worst < tol), float(tol - worst),
                 f"max relative gap {worst:.3e}")


def domain_samples(dom: ParabolicDomain, n: int, seed: int = 4) -> list:
    """Points of the parabolic domain, spread over a box right of its vertex."""
    rng = np.random.default_rng(seed)
    x0 = dom.boundary_re(0.0)
    out = []
    while len(out) < n:
        z = complex(rng.uniform(x0, x0 + 10), rng.uniform(-6, 6))
        if dom.contains(z):
            out.append(z)
    return out


def check_pole_free(profile: MiuraProfile | None, t: float = 0.5, delta: float = 1.0,
                    n: int = 50) -> Check:
    """Closed-form norm bound below one on ``n`` samples of the parabolic domain.

    The bound only uses ``|R| <= 1``, so it holds for every profile at once.
    """
    dom = ParabolicDomain(delta, t)
    rep = pole_free_certificate(None, t, delta, domain_samples(dom, n))
    worst = max(rep.bounds)
    return Check("pole_free", rep.passed, 1 - worst,
                 f"max bound {worst:.6f} over {n} samples (h={rep.h:.6f})")


def check_rule_agreement(profile: MiuraProfile, x: float = 0.5, t: float = 0.5, h: float = 1.0,
                         tol: float = RULE_TOL) -> Check:
    """Trapezoid and Hermite contour rules give the same kernel."""
    if profile.is_zero:
        return Check("rule_agreement", True, tol, "zero operator")
    gap = rule_gap(profile, [x], t, SolveOptions(h=h))
    return Check("rule_agreement", bool(gap <= tol), tol - gap,
                 f"kernel gap {gap:.2e} at x={x:g}, t={t:g}, h={h:g}")


def run_suite(profile: MiuraProfile, opts: SolveOptions | None = None,
              contraction_x=(-4, -2, 0, 2, 4), contraction_t=(0.05, 0.1, 0.5, 1.0),
              pole_t: float = 0.5, delta: float = 1.0, samples: int = 50,
              table: ReflectionTable | None = None) -> list[Check]:
    """All invariant checks for ``profile``.

    ``table`` replaces the contour table used by the reflection bound check,
    which lets a stored (or deliberately corrupted) table be audited.
    """
    opts = opts or SolveOptions()
    if table is None:
        table = build_table(profile, 1.0, lambda_rule(0.0, 1.0, 1.0))
    checks = [
        check_reflection_table(table),
        check_reflection_symmetry(profile),
        check_unimodular(profile),
        check_herglotz(profile),
        check_contraction(profile, contraction_x, contraction_t, opts),
    ]
    if profile.is_zero:
        # the operator vanishes: nothing to decay, both determinants equal one
        checks.append(Check("singular_decay", True, 1.0, "zero operator"))
        checks.append(Check("determinant_consistency", True, 1e-6, "zero operator"))
    else:
        checks.append(check_singular_decay(profile))
        checks.append(check_determinant_consistency(profile))
    checks.append(check_rule_agreement(profile))
    checks.append(check_pole_free(profile, pole_t, delta, samples))
    return checks
