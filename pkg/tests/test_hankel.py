import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.optimize import minimize_scalar

from miurakdv import catalog
from miurakdv.dyson import logdet_iplus
from miurakdv.hankel import (
    HankelError,
    OscillatorySymbol,
    auto_lambda_nodes,
    build_galerkin,
    build_nystrom,
    lambda_rule,
    marchenko_kernel,
    norm_bound,
    optimize_h,
    s_number_bound,
    singular_values,
    symbol_phi,
    table_norm_bound,
    xi,
    xi_abs,
)
from miurakdv.scattering import build_table, reflection_values


def symbol(profile, x, t, h, n=None):
    table = build_table(profile, h, lambda_rule(x, t, h, n))
    return OscillatorySymbol.for_profile(profile, x, t, table)


def test_xi_anchor():
    assert abs(xi(1j, 0.0, 1.0)) == pytest.approx(math.exp(8), rel=1e-15)
    assert xi_abs(0.0, 1.0, 0.0, 1.0) == pytest.approx(math.exp(8), rel=1e-15)


@given(st.floats(-5, 5), st.floats(0.05, 2), st.floats(-5, 5), st.floats(-3, 3),
       st.floats(0.01, 2))
def test_xi_modulus_closed_form(lam, h, x, y, t):
    z = complex(x, y)
    exact = abs(xi(lam + 1j * h, z, t))
    assert xi_abs(lam, h, z, t) == pytest.approx(exact, rel=1e-13)


def test_xi_overflow_raises():
    with pytest.raises(HankelError):
        xi(30j, 0.0, 1.0)


@pytest.mark.parametrize("kind", ["trapezoid", "hermite"])
@pytest.mark.parametrize("z,t,h", [(0.0, 1.0, 1.0), (1.5 - 0.7j, 0.2, 0.6)])
def test_lambda_rule_integrates_the_envelope(kind, z, t, h):
    rule = lambda_rule(z, t, h, kind=kind)
    got = np.dot(rule.weights, xi_abs(rule.nodes, h, z, t))
    a = math.sqrt(24 * h * t)
    e = 8 * h**3 * t - 2 * h * complex(z).real + complex(z).imag ** 2 / (24 * h * t)
    assert got == pytest.approx(math.exp(e) * math.sqrt(math.pi) / a, rel=1e-12)


def test_auto_node_count_is_odd_and_grows():
    n1 = auto_lambda_nodes(1.0, 1.0)
    n2 = auto_lambda_nodes(1.0, 1.0, x_span=10)
    assert n1 % 2 == 1 and n2 > n1
    assert auto_lambda_nodes(0.1, 1.0) > n1


def test_kernel_matches_adaptive_quadrature():
    # F(sigma) on R + ih by adaptive quadrature, independent of the contour rule
    prof = catalog("delta", c=1.0)
    x, t, h = 0.4, 0.5, 0.3
    sym = symbol(prof, x, t, h)
    a = math.sqrt(24 * h * t)

    def integrand(lam, sigma, part):
        k = lam + 1j * h
        v = xi(k, x, t) * reflection_values(prof, np.array([k]))[0] * np.exp(1j * k * sigma)
        return v.real if part == 0 else v.imag

    for sigma in (0.0, 0.7, 2.0):
        ref = quad(integrand, -9 / a, 9 / a, args=(sigma, 0), limit=400, epsabs=1e-13)[0]
        ref /= 2 * math.pi
        got, imag = marchenko_kernel(sym, sigma, return_imag=True)
        assert got[0] == pytest.approx(ref, abs=1e-10)
        assert imag[0] < 1e-11


def test_kernel_is_contour_independent():
    prof = catalog("smooth_bump", a=2.0, amplitude=0.5)
    sig = np.linspace(0, 4, 9)
    f1 = marchenko_kernel(symbol(prof, 0.5, 0.4, 1.0), sig)
    f2 = marchenko_kernel(symbol(prof, 0.5, 0.4, 0.5), sig)
    assert np.allclose(f1, f2, atol=1e-11)


def test_galerkin_of_rank_one_symbol():
    # phi = 1/(1 + ik) has kernel e^{-sigma}: a rank-one operator with eigenvalue 1/2
    h = 0.5
    lam = np.arange(-2000.0, 2000.0 + 1e-9, 0.05)
    k = lam + 1j * h
    w = np.full(lam.size, 0.05)
    sym = OscillatorySymbol.from_values(h, lam, w, 1.0 / (1.0 + 1j * k))
    G = build_galerkin(sym, 4).matrix
    ev = np.sort(np.abs(np.linalg.eigvals(G)))
    assert ev[-1] == pytest.approx(0.5, abs=1e-6)
    assert np.all(ev[:-1] < 1e-6)
    n = build_nystrom(OscillatorySymbol.from_values(h, lam, w, 1.0 / (1.0 + 1j * k)), 48)
    assert max(abs(n.eigenvalues())) == pytest.approx(0.5, abs=1e-3)


@pytest.mark.parametrize("x,t", [(0.5, 0.3), (-2.0, 0.1), (1.0, 1.0)])
def test_nystrom_and_galerkin_determinants_agree(x, t):
    prof = catalog("smooth_bump", a=2.0, amplitude=0.5)
    sym = symbol(prof, x, t, 1.0)
    ln = logdet_iplus(build_nystrom(sym, 96).matrix)
    lg = logdet_iplus(build_galerkin(sym, 96).matrix)
    assert ln == pytest.approx(lg, abs=1e-10)


def test_nystrom_matrix_is_symmetric_and_converged():
    sym = symbol(catalog("delta", c=1.0), 0.0, 1.0, 1.0)
    a = build_nystrom(sym, 48)
    b = build_nystrom(sym, 96)
    assert np.array_equal(a.matrix, a.matrix.T)
    assert a.imag_residual < 1e-11
    assert logdet_iplus(a.matrix) == pytest.approx(logdet_iplus(b.matrix), abs=1e-12)


def test_derivative_matrices_match_finite_differences():
    prof = catalog("delta", c=1.0)
    table = build_table(prof, 1.0, lambda_rule(0.0, 0.5, 1.0, x_span=1.0))
    disc = build_nystrom(OscillatorySymbol(0.3, 0.5, 1.0, table), 64, derivatives=2)
    d = 1e-4
    Kp = build_nystrom(OscillatorySymbol(0.3 + d, 0.5, 1.0, table), 64).matrix
    Km = build_nystrom(OscillatorySymbol(0.3 - d, 0.5, 1.0, table), 64).matrix
    assert np.allclose(disc.derivatives[0], (Kp - Km) / (2 * d), atol=1e-7)
    assert np.allclose(disc.derivatives[1], (Kp - 2 * disc.matrix + Km) / d**2, atol=1e-5)


@given(st.floats(-4, 4), st.floats(0.05, 1.0))
def test_spectral_radius_below_table_bound(x, t):
    h = min(max(optimize_h(x, t), 0.25), 2.0)
    prof = catalog("delta", c=1.0)
    table = build_table(prof, h, lambda_rule(0.0, t, h, x_span=4.0))
    disc = build_nystrom(OscillatorySymbol(x, t, h, table), 64)
    top = singular_values(disc)[0]
    tb = table_norm_bound(x, t, table)
    assert top <= tb * (1 + 1e-9)
    assert tb <= 0.5 * norm_bound(x, t, h) * (1 + 1e-9)
    assert disc.spectral_radius() < 1


@given(st.floats(-5, 5), st.floats(-3, 3), st.floats(0.01, 3))
def test_optimize_h_matches_golden_section(x, y, t):
    z = complex(x, y)
    h = optimize_h(z, t)

    def f(logh):
        hh = math.exp(logh)
        return (8 * hh**3 * t - 2 * hh * x + y * y / (24 * hh * t)
                - 1.5 * math.log(hh))

    ref = math.exp(minimize_scalar(f, bracket=(-7, 7), method="golden", tol=1e-12).x)
    assert h == pytest.approx(ref, rel=1e-5)


def test_singular_values_respect_half_h_envelope():
    prof = catalog("delta", c=1.0)
    table = build_table(prof, 1.0, lambda_rule(0.0, 1.0, 1.0))
    sv = singular_values(build_nystrom(OscillatorySymbol(0.0, 1.0, 1.0, table), 96))
    n = np.arange(sv.size)
    env = s_number_bound(n, 0.0, 1.0, table, "h/2")
    assert np.all(sv <= env)
    assert s_number_bound(3, 0.0, 1.0, table, "2/h") < s_number_bound(3, 0.0, 1.0, table)


def test_symbol_continuation_across_the_contour():
    prof = catalog("delta", c=1.0)
    x, t = 0.2, 0.5
    k = np.array([0.3 + 0.75j, -0.8 + 0.7j])
    below = symbol_phi(symbol(prof, x, t, 1.0), k)  # k below the contour at h = 1
    above = symbol_phi(symbol(prof, x, t, 0.5), k)  # k above the contour at h = 0.5
    assert np.allclose(below, above, atol=1e-10)


def test_symbol_phi_guards():
    sym = symbol(catalog("delta", c=1.0), 0.0, 1.0, 1.0)
    with pytest.raises(HankelError, match="contour"):
        symbol_phi(sym, 0.2 + 1.0j)
    bare = OscillatorySymbol(0.0, 1.0, 1.0, sym.table)
    with pytest.raises(HankelError):
        symbol_phi(bare, 0.2 + 1.5j)


def test_matrix_entries_are_entire_in_x():
    # Cauchy-Riemann residual of fourth-order differences in Re x and Im x
    prof = catalog("delta", c=1.0)
    x0, t, h, eps = 0.3 + 0.05j, 0.5, 1.0, 1e-3
    table = build_table(prof, h, lambda_rule(x0, t, h))

    def M(x):
        return build_nystrom(OscillatorySymbol(x, t, h, table), 32).matrix

    def d(step):
        return (-M(x0 + 2 * step) + 8 * M(x0 + step) - 8 * M(x0 - step) + M(x0 - 2 * step)) / (12 * eps)

    dx, dy = d(eps), d(1j * eps)
    assert np.max(np.abs(dx + 1j * dy)) < 1e-8 * max(1.0, np.max(np.abs(dx)))
