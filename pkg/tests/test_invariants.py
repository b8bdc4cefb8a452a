import pytest

from symfrechet import DomainError
from symfrechet import invariants as inv

from conftest import suite_results


@pytest.mark.parametrize("suite", inv.SUITES)
def test_suite_passes_at_default_seed(suite):
    failed = [r.qualified for r in suite_results(suite) if not r.passed]
    assert failed == []


def test_suite_names_are_unique_and_qualified():
    names = [r.qualified for s in inv.SUITES for r in suite_results(s)]
    assert len(names) == len(set(names))
    assert all(n.split(".")[0] in inv.SUITES for n in names)


def test_suite_is_deterministic():
    a = [(r.qualified, r.violation) for r in inv.symmetry_suite(5, cases=20, m_max=3)]
    b = [(r.qualified, r.violation) for r in inv.symmetry_suite(5, cases=20, m_max=3)]
    assert a == b


def test_injection_fails_only_the_named_invariant(monkeypatch):
    monkeypatch.setenv(inv.INJECT_ENV, "symmetry.involution[hyperboloid(2)]")
    res = inv.symmetry_suite(0, cases=20, m_max=3)
    failed = [r.qualified for r in res if not r.passed]
    assert failed == ["symmetry.involution[hyperboloid(2)]"]


def test_wildcard_injection(monkeypatch):
    monkeypatch.setenv(inv.INJECT_ENV, "*")
    assert not any(r.passed for r in inv.symmetry_suite(0, cases=5, m_max=2))


def test_unknown_suite():
    with pytest.raises(DomainError):
        inv.run_suite("topology", 0)


def test_nonfinite_violation_fails():
    r = inv.InvariantResult("x", "y", float("inf"), 1.0)
    assert not r.passed
