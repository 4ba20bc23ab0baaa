"""The self-check suite must pass in quick mode and be reproducible."""

from iedl.oracle import OracleCheck, run_oracle_checks

EXPECTED_NAMES = [
    "fim-vs-monte-carlo",
    "log-det-vs-direct",
    "mse-vs-monte-carlo",
    "loss-grad-vs-finite-diff",
    "net-grad-vs-finite-diff",
]


def test_quick_suite_passes():
    checks = run_oracle_checks(quick=True)
    assert [c.name for c in checks] == EXPECTED_NAMES
    for check in checks:
        assert check.passed, f"{check.name}: {check.statistic} > {check.bound}"
        assert check.statistic <= check.bound


def test_checks_are_deterministic():
    a = run_oracle_checks(seed=5, quick=True)
    b = run_oracle_checks(seed=5, quick=True)
    assert [c.statistic for c in a] == [c.statistic for c in b]


def test_check_records_are_frozen():
    check = OracleCheck("x", 1.0, 2.0, True, "d")
    try:
        check.statistic = 0.0
    except AttributeError:
        pass
    else:
        raise AssertionError("OracleCheck should be immutable")
