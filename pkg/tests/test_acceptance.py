"""End-to-end battery: every headline capability, one test each, printed
as a pass/fail line per residual row."""

import numpy as np
import pytest

from delsarte import acceptance


def _assert_rows(rows):
    """Every row must pass; the failure message carries the whole table."""
    lines = []
    for r in rows:
        rel = {"max": "<=", "min": ">=", "eq": "=="}[r["direction"]]
        verdict = "PASS" if r["passed"] else "FAIL"
        lines.append(f"  {r['name']:<40} {r['value']:>12.4e} {rel} "
                     f"{r['threshold']:<12.4e} {verdict}")
    table = "\n".join(lines)
    print("\n" + table)
    failed = [r for r in rows if not r["passed"]]
    assert not failed, f"{len(failed)} residual row(s) failed:\n{table}"


def test_divergence_identity_convergence_order():
    _assert_rows(acceptance.criterion_1())


def test_dressing_operator_localizes_conjugation():
    _assert_rows(acceptance.criterion_2())


def test_dressing_spectrum_bookkeeping():
    _assert_rows(acceptance.criterion_3())


def test_triangular_factorization_battery():
    _assert_rows(acceptance.criterion_4(seed=0))


def test_layer_stripping_battery():
    _assert_rows(acceptance.criterion_5(seed=0))


def test_spectral_projection_calculus():
    _assert_rows(acceptance.criterion_6())


def test_torus_harmonics_and_periods():
    _assert_rows(acceptance.criterion_7(seed=0))


def test_volterra_property_of_all_kernels():
    _assert_rows(acceptance.criterion_8(seed=0))


def test_verify_report_determinism():
    _assert_rows(acceptance.criterion_9(seed=0))


def test_full_battery_aggregates():
    result = acceptance.run_all(seed=0, include_determinism=False)
    _assert_rows(result["rows"])
    assert result["all_passed"] is True
    assert result["seed"] == 0
