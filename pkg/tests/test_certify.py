import dataclasses

import numpy as np
import pytest

from miurakdv import catalog
from miurakdv.certify import (
    check_reflection_table,
    decay_slope,
    domain_samples,
    run_suite,
)
from miurakdv.dyson import ParabolicDomain
from miurakdv.hankel import lambda_rule
from miurakdv.scattering import build_table


def test_decay_slope_of_geometric_sequence():
    sv = np.exp(-0.7 * np.arange(30))
    slope, m = decay_slope(sv, floor=1e-13)
    assert slope == pytest.approx(-0.7, rel=1e-12)
    assert m == 30 - int(np.sum(sv <= 1e-13))
    assert decay_slope(np.zeros(5))[0] == -np.inf


def test_corrupted_table_is_caught():
    table = build_table(catalog("delta", c=1.0), 1.0, lambda_rule(0.0, 1.0, 1.0, 21))
    values = table.values.copy()
    values[7] = 1.2
    bad = dataclasses.replace(table, values=values)
    check = check_reflection_table(bad)
    assert not check.passed and check.name == "reflection_bound"
    assert check.margin == pytest.approx(1 + 1e-9 - 1.2)
    assert check_reflection_table(table).passed


def test_domain_samples_lie_in_domain():
    dom = ParabolicDomain(1.0, 0.5)
    zs = domain_samples(dom, 20)
    assert len(zs) == 20 and all(dom.contains(z) for z in zs)


@pytest.mark.parametrize("name", ["delta", "zero"])
def test_suite_passes(profiles, name):
    checks = run_suite(profiles[name])
    assert [c.name for c in checks] == [
        "reflection_bound", "reflection_symmetry", "unimodular", "herglotz",
        "contraction", "singular_decay", "determinant_consistency", "rule_agreement",
        "pole_free"]
    assert all(c.passed for c in checks), [c for c in checks if not c.passed]
    assert all(np.isfinite(c.margin) and c.margin > 0 for c in checks)
