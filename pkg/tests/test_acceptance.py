"""One test per acceptance criterion; each prints a PASS/FAIL line."""

import pytest

from formvar import acceptance


def check(number):
    c = acceptance.RUNNERS[number]()
    print(c.line())
    print(f"    measured: {c.measured}")
    print(f"    threshold: {c.threshold}")
    assert c.passed, c.measured


def test_criterion_01_algebra_suite():
    check(1)


def test_criterion_02_wedge_power_combinatorics():
    check(2)


def test_criterion_03_quasiaffine_characterization():
    check(3)


def test_criterion_04_exponent_boundaries():
    check(4)


def test_criterion_05_discrete_hodge():
    check(5)


def test_criterion_06_weak_continuity_positive():
    check(6)


def test_criterion_07_weak_continuity_negative():
    check(7)


def test_criterion_08_telescopic_estimate():
    check(8)


def test_criterion_09_minimization():
    check(9)


def test_criterion_10_nonexistence_mechanism():
    check(10)
