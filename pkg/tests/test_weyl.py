import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from miurakdv import catalog
from miurakdv.weyl import WeylError, m_function, m_values, propagate, weyl_disk

upper = st.builds(complex, st.floats(-6, 6), st.floats(0.05, 6))


def eig_expm(A):
    """Matrix exponential by eigendecomposition (independent of the cell formulas)."""
    w, V = np.linalg.eig(A)
    return V @ np.diag(np.exp(w)) @ np.linalg.inv(V)


def ivp_transfer(profile, z, a, b, breaks=()):
    """Transfer matrix of ``Y' = [[Q,1],[-z-Q^2,-Q]] Y`` by an adaptive ODE solver."""

    def rhs(x, y):
        Q = float(profile.Q(x))
        Y = y[:2] + 1j * y[2:]
        d = np.array([Q * Y[0] + Y[1], (-z - Q * Q) * Y[0] - Q * Y[1]])
        return np.concatenate([d.real, d.imag])

    pts = [a] + sorted(p for p in breaks if a < p < b) + [b]
    T = np.eye(2, dtype=complex)
    for lo, hi in zip(pts[:-1], pts[1:]):
        cols = []
        for e in np.eye(2):
            sol = solve_ivp(rhs, (lo + 1e-13, hi - 1e-13), np.concatenate([e, 0 * e]),
                            method="DOP853", rtol=1e-12, atol=1e-13)
            cols.append(sol.y[:2, -1] + 1j * sol.y[2:, -1])
        T = np.column_stack(cols) @ T
    return T


@given(upper)
def test_zero_profile_propagator_is_free_exponential(z):
    T = propagate(catalog("zero"), z, -1.3, 0.0).matrix
    A = np.array([[0, 1], [-z, 0]], dtype=complex)
    assert np.allclose(T, eig_expm(1.3 * A), rtol=1e-12, atol=1e-12)


def test_zero_profile_real_negative_z():
    T = propagate(catalog("zero"), -1.0, -1.0, 0.0).matrix
    c, s = np.cosh(1.0), np.sinh(1.0)
    assert np.allclose(T, [[c, s], [s, c]], rtol=1e-14)


@pytest.mark.parametrize("name,interval", [
    ("smooth_bump", (-3.5, -0.5)),
    ("positive_box", (-1.5, -0.2)),
    ("rough_random", (-3.0, -0.5)),
])
def test_propagator_matches_ode_solver(profiles, name, interval):
    prof = profiles[name]
    breaks = [p.left for p in prof.pieces]
    for z in (0.7 + 0.4j, -2.0 + 1.0j):
        T = propagate(prof, z, *interval).matrix
        ref = ivp_transfer(prof, z, *interval, breaks)
        assert np.max(np.abs(T - ref)) < 1e-9 * max(1, np.max(np.abs(ref)))


@given(upper, st.floats(-5, -0.1))
def test_transfer_matrix_is_unimodular(z, a):
    # evaluating ad - bc alone costs eps * |T|^2, so measure on that scale
    prof = catalog("smooth_bump", a=2.0, amplitude=0.5)
    T = propagate(prof, z, a, 0.0)
    assert abs(T.det - 1) < 1e-12 * max(1.0, np.max(np.abs(T.matrix)) ** 2)


def test_magnus_cells_are_fourth_order():
    prof = catalog("smooth_bump", a=1.0, amplitude=2.0)
    z = 3.0 + 1.0j
    ref = propagate(prof, z, -2.0, 0.0, mesh=0.0025).matrix
    e1 = np.max(np.abs(propagate(prof, z, -2.0, 0.0, mesh=0.08).matrix - ref))
    e2 = np.max(np.abs(propagate(prof, z, -2.0, 0.0, mesh=0.04).matrix - ref))
    assert np.log2(e1 / e2) > 3.5


@given(upper, st.sampled_from([0.5, 1.0, 2.0]))
def test_delta_m_function(z, c):
    prof = catalog("delta", c=c)
    m = m_function(prof, z)
    lam = np.sqrt(complex(z))
    lam = lam if lam.imag > 0 else -lam
    assert abs(m.m - (1j * lam - c)) <= 1e-12 * max(1, abs(m.m))
    assert m.mode == "exact-tail"


@given(upper)
def test_positive_box_m_function_closed_form(z):
    prof = catalog("positive_box", b=1.0, a=1.0)
    m = complex(m_values(prof, z)[0])
    assert m == pytest.approx(complex(prof.closed_forms["m"](z)), rel=1e-8)


def test_constant_r_disk_mode_closed_form():
    prof = catalog("constant_r", kappa=1.0)
    zs = np.array([0.5 + 0.5j, -3 + 0.1j, 4 + 2j, -1.0, -0.3 + 1e-3j])
    m, mode, bound, L = m_values(prof, zs, full=True)
    assert mode == "disk"
    exact = prof.closed_forms["m"](zs)
    assert np.all(np.abs(m - exact) <= np.maximum(bound, 1e-11))
    assert np.all(bound < 1e-10)


def test_weyl_disk_nests_and_contains_m():
    prof = catalog("constant_r", kappa=0.7)
    z = 0.3 + 0.2j
    m = prof.closed_forms["m"](z)
    radii = []
    for L in (1.0, 2.0, 4.0, 8.0):
        disk = weyl_disk(prof, z, L)
        assert disk.contains(m, slack=1e-12)
        radii.append(disk.radius)
    assert all(b < a for a, b in zip(radii, radii[1:]))
    assert weyl_disk(prof, z, 0.0).radius == np.inf


@given(upper)
def test_m_is_herglotz_for_rough_data(z):
    prof = catalog("rough_random", seed=11, L=6, amplitude=2.0)
    assert m_values(prof, z)[0].imag > 0


@given(upper)
def test_conjugation_symmetry_without_folding(z):
    prof = catalog("smooth_bump", a=1.5, amplitude=0.8)
    direct = m_values(prof, np.conj(z), mirror=False)[0]
    assert abs(direct - np.conj(m_values(prof, z)[0])) < 1e-12 * max(1, abs(direct))


def test_cut_is_rejected():
    with pytest.raises(WeylError):
        m_function(catalog("delta", c=1.0), 2.0)
    with pytest.raises(ValueError):
        propagate(catalog("delta", c=1.0), 1j, 0.0, -1.0)


@pytest.mark.parametrize("name", ["delta", "positive_box", "rough_random"])
def test_exact_tail_and_disk_mode_agree(profiles, name):
    from miurakdv.weyl import _disk_mode

    prof = profiles[name]
    zs = np.array([0.5 + 0.5j, -2 + 0.3j, 3 + 1j, 1j])
    tol = 1e-12
    exact = m_values(prof, zs, tol)
    disk, bound, _ = _disk_mode(prof, zs, tol, None)
    assert np.all(np.abs(disk - exact) < 10 * tol * np.maximum(1, np.abs(exact)))


def test_m_converges_under_mollification():
    from miurakdv import mollify

    prof = catalog("delta", c=1.0)
    re, im = np.meshgrid(np.linspace(-3, 3, 7), np.linspace(0.5, 3, 4))
    z = (re + 1j * im).ravel()
    m = m_values(prof, z)
    gaps = [np.max(np.abs(m_values(mollify(prof, n), z) - m)) for n in (4, 8, 16, 32)]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
