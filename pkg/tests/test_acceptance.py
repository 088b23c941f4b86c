"""Acceptance criteria, each at its stated tolerance and time budget.

Run with ``pytest tests/test_acceptance.py -v``; the terminal summary prints
one PASS/FAIL line per criterion.
"""
import itertools
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from hermsos.certify import lambda_family, minimal_power, sos_monotone
from hermsos.forms import (HermitianForm, Section, cauchy_schwarz, fubini_study, hermitian_symmetry_check,
                           load_form, multiply, norm_power, sample_sphere)
from hermsos.projective import (OperatorSetup, asymptotic_sweep, fitted_constant, orthonormal_identity_check,
                                relative_leading_defect, step_monotone)
from hermsos.quadlab import (QuadratureGrid, ball_monomial_integral, decompose, k_exact, k_numeric, lemma52,
                             lemma52_quadrature, off_diagonal_bound_test, quasi_diagonal_mean_value_test,
                             remainder_scaling_test, rho_quasi_symmetry_test)
from hermsos.series import TruncatedSeries, bochner_defect, bochner_normalize, diastasis, restrict_psi

from cases import PERTURBED
from conftest import DATA

FS = fubini_study(2)
ONE = norm_power(0, 2)


class Budget:
    def __init__(self, seconds):
        self.seconds = seconds

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
        if exc[0] is None:
            assert self.elapsed < self.seconds, f"took {self.elapsed:.1f} s, budget {self.seconds} s"


def ball_closed_form(n, k, a, m):
    """Rational coefficient of pi^n for the weighted ball moment, via the Beta integral."""
    a = Fraction(a)
    return (Fraction(math.factorial(n + k - 1) * math.factorial(m),
                     math.factorial(n - 1) * math.factorial(n + k + m)) / a ** (n + k))


@pytest.mark.criterion(1, "ball moment closed form and quadrature")
def test_criterion_1_ball_moments():
    with Budget(10):
        for n, k, m in itertools.product(range(1, 4), range(5), range(51)):
            for a in (Fraction(1, 2), Fraction(1), Fraction(2)):
                exact = lemma52(n, k, a, m)
                assert exact.p == n and exact.q == ball_closed_form(n, k, a, m)
                quad = lemma52_quadrature(n, k, a, m)
                assert abs(quad - float(exact)) <= 1e-10 * float(exact)


@pytest.mark.criterion(2, "orthonormal identity is exactly zero")
def test_criterion_2_orthonormal_identity():
    with Budget(30):
        for N, m, e in itertools.product((2, 3), range(1, 7), (0, 1)):
            dev = orthonormal_identity_check(OperatorSetup(N, m, e))
            assert isinstance(dev, Fraction) and dev == 0, (N, m, e)


@pytest.mark.criterion(3, "asymptotic sweep on P^1")
def test_criterion_3_sweep():
    with Budget(60):
        rows = asymptotic_sweep(2, 0, "mono:0", range(1, 61))
        C = fitted_constant(rows)
        assert math.isfinite(C)
        assert all(float(r.scaled_err) <= C for r in rows)
        lead = [relative_leading_defect(r, 1) for r in rows if r.m >= 10]
        assert step_monotone(lead, jitter=0.01)
        # frozen closed form for this section: m / (m + 1)
        np.testing.assert_allclose(lead, [m / (m + 1) for m in range(10, 61)], rtol=1e-14)


def _random_section(rng, D):
    c = rng.normal(size=D + 1) + 1j * rng.normal(size=D + 1)
    return Section(2, D, tuple(c))


@pytest.mark.criterion(4, "quadrature operator matches exact values")
def test_criterion_4_exact_vs_quadrature():
    rng = np.random.default_rng(4)
    grid = QuadratureGrid()
    with Budget(300):
        for m, e in itertools.product((1, 4, 8, 16), (0, 1)):
            setup = OperatorSetup(2, m, e)
            s, t = _random_section(rng, setup.degree), _random_section(rng, setup.degree)
            P = norm_power(e, 2)
            # s, t, s + t and s + it determine the full sesquilinear form by polarization
            probes = [s, t, Section(2, s.k, tuple(a + b for a, b in zip(s.coeffs, t.coeffs))),
                      Section(2, s.k, tuple(a + 1j * b for a, b in zip(s.coeffs, t.coeffs)))]
            for p in probes:
                exact = float(k_exact(setup, p))
                num = k_numeric(FS, P, m, p, grid=grid)
                assert abs(num - exact) <= 1e-8 * exact, (m, e)


@pytest.mark.criterion(5, "decomposition closure at r = 0.4")
def test_criterion_5_decomposition_closure():
    grid = QuadratureGrid()
    rng = np.random.default_rng(5)
    with Budget(600):
        for m in (4, 16, 64):
            for s in (Section(2, m, tuple([1.0] + [0.0] * m)), _random_section(rng, m)):
                rep = decompose(FS, ONE, m, s, 0.4, grid=grid)
                lead = math.pi / m * rep.norm_sq
                total = rep.I + rep.II + rep.III
                assert abs(total - (rep.K_ss - lead)) < 1e-7 * (1 + rep.norm_sq), m
                assert rep.closure_defect < 1e-7 * (1 + rep.norm_sq), m


@pytest.mark.criterion(6, "certification goldens")
def test_criterion_6_certification():
    with Budget(60):
        assert minimal_power(norm_power(2, 2)).ell == 0
        f = load_form(DATA / "lambda1.json")
        cert = minimal_power(f)
        assert cert.ell == 1 and cert.residual < 1e-10
        support = sorted(tuple(np.flatnonzero(np.abs(g.vector) > 1e-12)) for g in cert.squares)
        B = cert.product.basis
        assert [tuple(B[i] for i in idx) for idx in support] == [((3, 0),), ((0, 3),)]
        for g in cert.squares:
            assert abs(abs(g.vector[np.abs(g.vector) > 1e-12][0]) - 1) < 1e-12
        ells = [minimal_power(lambda_family(lam)).ell for lam in (1.0, 1.5, 1.8, 1.9)]
        assert ells == sorted(ells)
        for form in (norm_power(2, 2), f, *(lambda_family(lam) for lam in (1.0, 1.5, 1.8, 1.9))):
            ell = minimal_power(form).ell
            assert sos_monotone(form, ell) == [True] * 4


def _random_form(rng, N, d):
    n = len(norm_power(d, N).basis)
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return HermitianForm(N, d, A @ A.conj().T / n + np.eye(n))


@pytest.mark.criterion(7, "property suites")
def test_criterion_7_properties():
    rng = np.random.default_rng(7)
    with Budget(300):
        # Hermitian symmetry
        for N, d in ((2, 1), (2, 3), (3, 2)):
            f = _random_form(rng, N, d)
            assert hermitian_symmetry_check(f, num_pairs=200) <= 1e-13 * np.max(np.abs(f.C))
        # Cauchy-Schwarz function is multiplicative
        for N, d1, d2 in ((2, 1, 2), (3, 1, 1), (2, 2, 2)):
            f, g = _random_form(rng, N, d1), _random_form(rng, N, d2)
            x, y = sample_sphere(rng, 200, N), sample_sphere(rng, 200, N)
            np.testing.assert_allclose(cauchy_schwarz(multiply(f, g), x, y),
                                       cauchy_schwarz(f, x, y) * cauchy_schwarz(g, x, y), atol=1e-10)
        # quasi-diagonal weights integrate like their value at the centre
        q = restrict_psi(FS, bochner_normalize(FS, np.array([1.0, 0.0])), 8)
        psi_R, _ = PERTURBED["linear_P1"]()
        qp = restrict_psi(psi_R, bochner_normalize(psi_R, PERTURBED["linear_P1"]()[1]), 8)
        quasi = TruncatedSeries.from_dict(1, 8, {(a, b): c for a, b, c in qp.items() if sum(a) == sum(b)})
        for weight in (q, quasi):
            for f_hol in ({(0,): 1.0, (1,): 2.0, (3,): -1.0j}, {(2,): 1.0, (5,): 0.5}):
                assert quasi_diagonal_mean_value_test(f_hol, weight, 0.4) < 1e-9
        # monomial orthogonality on balls
        for alpha, beta in (((1,), (0,)), ((3,), (1,)), ((1, 0), (0, 1)), ((2, 1), (1, 1))):
            assert abs(ball_monomial_integral(alpha, beta, 0.4)) < 1e-12
        # distance quasi-symmetry on 10^3 pairs
        for name in ("linear_P1", "quadratic_P1"):
            rep = rho_quasi_symmetry_test(PERTURBED[name]()[0], num_pairs=1000, seed=7)
            assert rep.max_ratio <= 2
        # off-diagonal bound for the Fubini-Study metric
        for r in (0.1, 0.3, 0.5):
            rep = off_diagonal_bound_test(FS, r, num_samples=2000, seed=7)
            assert rep.ok and rep.max_psi <= rep.bound


@pytest.mark.criterion(8, "Bochner normalization template")
def test_criterion_8_bochner():
    cases = {"fs": lambda: (FS, np.array([1.0, 0.0])), **PERTURBED}
    with Budget(60):
        for name, make in cases.items():
            R, base = make()
            x = bochner_normalize(R, base)
            phi = diastasis(restrict_psi(R, x, 8))
            a, b = phi.bidegrees()
            assert np.max(np.abs(phi.coeffs[a + b == 3]), initial=0.0) < 1e-12, name
            assert bochner_defect(phi) < 1e-12, name
            consts = remainder_scaling_test(R, norm_power(0, R.N), base)
            assert all(math.isfinite(v) for v in consts.values()), name
