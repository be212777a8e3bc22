"""Shared fixtures and independent oracle helpers for the test suite."""

from __future__ import annotations

from fractions import Fraction

import pytest

import randfrob as rf

BUNDLED = ("airy", "hermite", "polynomial_data", "beta_series", "hermite_forced")


@pytest.fixture(scope="session")
def hermite_forced():
    return rf.load_problem("hermite_forced")


@pytest.fixture(scope="session")
def hf_solution(hermite_forced):
    return rf.compute_coeffs(hermite_forced, 20)


@pytest.fixture(scope="session")
def hf_moments(hermite_forced, hf_solution):
    return rf.moment_matrix(hf_solution, hermite_forced.model)


@pytest.fixture(scope="session")
def bundled_specs():
    return {name: rf.load_problem(name) for name in BUNDLED}


def eval_poly_exact(p: rf.Poly, values: dict[int, Fraction]) -> Fraction:
    """Test-side exact polynomial evaluation (independent of Poly.eval)."""
    total = Fraction(0)
    for mono, coeff in p.terms.items():
        term = coeff
        for sid, e in mono:
            term *= Fraction(values[sid]) ** e
        total += term
    return total


def scalar_series_coeffs(a, b, c, y0, y1, order):
    """Independent scalar (deterministic) coefficient recursion.

    a, b, c are dicts n -> Fraction; y0, y1 Fractions.  Reimplements the
    triangular recursion directly over numbers, as an oracle for the
    polynomial-valued path with point-mass inputs.
    """
    x = [Fraction(y0), Fraction(y1)]
    for n in range(order - 1):
        acc = Fraction(0)
        for m in range(n + 1):
            acc += (m + 1) * a.get(n - m, Fraction(0)) * x[m + 1]
            acc += b.get(n - m, Fraction(0)) * x[m]
        x.append((c.get(n, Fraction(0)) - acc) / ((n + 2) * (n + 1)))
    return x
