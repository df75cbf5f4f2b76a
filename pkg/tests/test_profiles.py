import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from miurakdv.profiles import (
    PROFILE_KINDS,
    ChebPanels,
    ProfileError,
    catalog,
    mollify,
    profile_from_config,
)


def q_reference(profile, x):
    """``r(x) - int_x^0 r^2`` by adaptive quadrature, split at piece breaks."""
    breaks = sorted({p.left for p in profile.pieces if math.isfinite(p.left)} | {0.0})
    pts = [b for b in breaks if x < b < 0]
    integral = quad(lambda s: float(profile.r(s)) ** 2, x, 0, points=pts or None,
                    epsabs=1e-14, epsrel=1e-13, limit=200)[0]
    return float(profile.r(x)) - integral


def test_catalog_lists_all_kinds(profiles):
    assert set(PROFILE_KINDS) == set(profiles)
    with pytest.raises(ProfileError, match="unknown profile"):
        catalog("nope")
    with pytest.raises(ProfileError, match="unknown parameter"):
        catalog("delta", d=1.0)
    with pytest.raises(ProfileError):
        catalog("delta", c=-1.0)


@pytest.mark.parametrize("name", ["delta", "smooth_bump", "positive_box", "constant_r",
                                  "rough_random", "zero"])
def test_q_vanishes_on_right_half_line(profiles, name):
    x = np.linspace(0, 5, 11)
    assert np.all(profiles[name].Q(x) == 0)


@pytest.mark.parametrize("name", ["smooth_bump", "positive_box", "rough_random"])
def test_q_normalization_matches_quadrature(profiles, name):
    prof = profiles[name]
    for x in [-0.3, -0.77, -1.5, -2.9]:
        assert prof.Q(x) == pytest.approx(q_reference(prof, x), abs=1e-11)


def test_delta_Q_is_a_step():
    prof = catalog("delta", c=2.0)
    assert np.allclose(prof.Q(np.array([-5.0, -1.0, -1e-3])), -2.0, atol=1e-13)


def test_positive_box_has_constant_q():
    # q = r' + r^2 = a on the box for r = sqrt(a) tanh(sqrt(a) x)
    prof = catalog("positive_box", b=1.5, a=2.0)
    x = np.linspace(-1.4, -0.1, 9)
    assert np.allclose(prof.q_smooth(x), 2.0, atol=1e-11)


@given(st.floats(-3.9, -0.01))
def test_chebyshev_panels_reproduce_function_and_derivative(x):
    f = ChebPanels(lambda s: np.sin(3 * s) * np.exp(s), -4.0, 0.0)
    assert f.value(x) == pytest.approx(math.sin(3 * x) * math.exp(x), abs=1e-13)
    d = 3 * math.cos(3 * x) * math.exp(x) + math.sin(3 * x) * math.exp(x)
    assert f.deriv(x) == pytest.approx(d, abs=1e-10)


@given(st.floats(0.1, 5.0), st.floats(0.0, 2.0))
def test_config_round_trip(c, amp):
    for prof in (catalog("delta", c=c), catalog("smooth_bump", a=1.0 + c, amplitude=amp)):
        again = profile_from_config(prof.to_config())
        assert again.key == prof.key
        x = np.linspace(-3, 0, 7)
        assert np.array_equal(again.Q(x), prof.Q(x))


def test_config_rejects_unknown_key():
    with pytest.raises(ProfileError, match="colour"):
        profile_from_config({"kind": "delta", "params": {"c": 1}, "colour": "red"})


def test_rough_random_is_seeded():
    a = catalog("rough_random", seed=3, L=5)
    b = catalog("rough_random", seed=3, L=5)
    c = catalog("rough_random", seed=4, L=5)
    x = np.linspace(-4.9, -0.1, 13)
    assert np.array_equal(a.r(x), b.r(x))
    assert not np.array_equal(a.r(x), c.r(x))
    assert np.all(np.abs(a.r(x)) <= 1.0)


def test_mollified_profile_is_smooth_with_compact_support():
    prof = mollify(catalog("delta", c=1.0), 4)
    assert prof.is_smooth
    assert prof.support_left >= -4 - 0.25 - 1e-12
    x = np.linspace(-10, -4.3, 7)
    assert np.all(prof.r(x) == 0)


def test_mollified_Q_converges_in_L2():
    # Q_n -> Q in L2(-10, 10), monotonically along n = 4, 8, 16, 32
    target = catalog("delta", c=1.0)
    x = np.linspace(-10, 10, 8001)
    dx = x[1] - x[0]
    errs = []
    for n in (4, 8, 16, 32):
        d = mollify(target, n).Q(x) - target.Q(x)
        errs.append(math.sqrt(np.sum(d * d) * dx))
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 0.5 * errs[0]


def test_mollifier_preserves_smooth_data():
    prof = catalog("smooth_bump", a=2.0, amplitude=0.5)
    moll = mollify(prof, 64)
    x = np.linspace(-3.9, -0.1, 11)
    assert np.max(np.abs(moll.r(x) - prof.r(x))) < 0.05
