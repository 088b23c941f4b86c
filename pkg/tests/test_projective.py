import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from hermsos.forms import basis, fubini_study, norm_power
from hermsos.projective import (ExactModeError, ExactScalar, OperatorSetup, asymptotic_sweep,
                                fitted_constant, gram_matrix, maximal_sos_check, monomial_integral,
                                operator_matrix, orthonormal_identity_check, relative_leading_defect,
                                section_from_spec, step_monotone, sweep_row, trace_identity, volume)

PI = math.pi


def chart_oracle_p1(alpha):
    """Radial quadrature of |w|^(2 a1)/(1+|w|^2)^(d+2) over C."""
    d, k = sum(alpha), alpha[1]
    val, _ = integrate.quad(lambda r: 2 * PI * r ** (2 * k + 1) / (1 + r * r) ** (d + 2), 0, np.inf,
                            epsabs=0, epsrel=1e-13, limit=200)
    return val


def chart_oracle_p2(alpha):
    d, a, b = sum(alpha), alpha[1], alpha[2]
    f = lambda r2, r1: (2 * PI) ** 2 * r1 ** (2 * a + 1) * r2 ** (2 * b + 1) / (1 + r1 * r1 + r2 * r2) ** (d + 3)  # noqa: E731
    val, _ = integrate.dblquad(f, 0, np.inf, 0, np.inf, epsabs=0, epsrel=1e-11)
    return val


def test_exact_scalar_arithmetic():
    a, b = ExactScalar(Fraction(1, 2), 1), ExactScalar(Fraction(1, 3), 1)
    assert a + b == ExactScalar(Fraction(5, 6), 1)
    assert (a * b).p == 2
    with pytest.raises(ValueError):
        a + ExactScalar(Fraction(1), 2)
    assert a + ExactScalar(Fraction(0), 2) == a
    assert str(ExactScalar(Fraction(1, 2), 2)) == "1/2 * pi^2"
    assert float(a) == pytest.approx(PI / 2)


def test_monomial_integral_examples():
    assert monomial_integral((1, 0), (0, 1), 2).q == 0
    assert volume(2) == ExactScalar(Fraction(1), 1)
    assert monomial_integral((1, 0), (1, 0), 2) == ExactScalar(Fraction(1, 2), 1)
    assert volume(3) == ExactScalar(Fraction(1, 2), 2)
    with pytest.raises(ValueError):
        monomial_integral((1, 0), (2, 0), 2)


@pytest.mark.parametrize("alpha", [(0, 0), (1, 0), (0, 1), (2, 1), (0, 3), (3, 2), (1, 4)])
def test_monomial_integral_matches_chart_quadrature_p1(alpha):
    assert float(monomial_integral(alpha, alpha, 2)) == pytest.approx(chart_oracle_p1(alpha), rel=1e-11)


@pytest.mark.parametrize("alpha", [(0, 0, 0), (1, 0, 0), (0, 1, 1), (2, 0, 1)])
def test_monomial_integral_matches_chart_quadrature_p2(alpha):
    assert float(monomial_integral(alpha, alpha, 3)) == pytest.approx(chart_oracle_p2(alpha), rel=1e-9)


def test_volume_matches_lab_measure():
    from hermsos.quadlab import QuadratureGrid
    _, w = QuadratureGrid(64).measure(fubini_study(2))
    assert w.sum() == pytest.approx(float(volume(2)), rel=1e-12)


def test_gram_examples():
    G = gram_matrix(OperatorSetup(2, 1))
    assert G.strings() == [["1/2 * pi^1", "0 * pi^1"], ["0 * pi^1", "1/2 * pi^1"]]
    assert gram_matrix(OperatorSetup(2, 0)).strings() == [["1 * pi^1"]]
    G = gram_matrix(OperatorSetup(3, 2, 1))
    assert all(G.q[i, i] > 0 for i in range(G.shape[0]))
    off = G.q - np.diag(np.diag(G.q))
    assert not any(off.flat)


def test_operator_examples():
    s0 = OperatorSetup(2, 0)
    assert operator_matrix(s0).strings() == [["1 * pi^2"]]
    K = operator_matrix(OperatorSetup(2, 1))
    assert K.strings() == [["1/4 * pi^2", "0 * pi^2"], ["0 * pi^2", "1/4 * pi^2"]]
    K = operator_matrix(OperatorSetup(3, 1))
    assert K.shape == (3, 3)
    assert not any((K.q - np.diag(np.diag(K.q))).flat)


def test_exact_mode_rejects_other_forms():
    from hermsos.forms import diagonal_form
    with pytest.raises(ExactModeError):
        OperatorSetup(2, 1, P=diagonal_form(2, 1, [1, 2]))
    with pytest.raises(ExactModeError):
        OperatorSetup(2, 1, R=diagonal_form(2, 1, [1, 2]))
    assert OperatorSetup(2, 1, P=norm_power(2, 2)).e == 2


@pytest.mark.parametrize("N,m,e", [(2, 1, 0), (2, 2, 0), (3, 1, 0), (2, 3, 1), (3, 2, 1)])
def test_orthonormal_identity_exact_zero(N, m, e):
    dev = orthonormal_identity_check(OperatorSetup(N, m, e))
    assert dev == 0 and isinstance(dev, Fraction)


@pytest.mark.parametrize("N,m,e", [(2, 4, 0), (3, 3, 1)])
def test_trace_identity(N, m, e):
    lhs, rhs = trace_identity(OperatorSetup(N, m, e))
    assert lhs == rhs


def test_operator_psd_and_hermitian():
    K = operator_matrix(OperatorSetup(3, 2, 1))
    assert all(K.q[i, j] == K.q[j, i] for i in range(K.shape[0]) for j in range(K.shape[0]))
    assert all(K.q[i, i] >= 0 for i in range(K.shape[0]))


def test_sweep_rows_exact():
    rows = asymptotic_sweep(2, 0, "mono:0", range(1, 4))
    assert [str(r.K_ss) for r in rows] == ["1/4 * pi^2", "1/9 * pi^2", "1/16 * pi^2"]
    # closed form on P^1 with P = 1, s = z0^m: scaled_err = m pi/(m + 1)
    for r in asymptotic_sweep(2, 0, "mono:0", range(1, 61)):
        assert r.scaled_err == ExactScalar(Fraction(r.m, r.m + 1), 1)


def test_sweep_bounded_and_fs_twist():
    rows = asymptotic_sweep(2, 0, "mono:0", range(1, 61))
    C = fitted_constant(rows)
    assert C == pytest.approx(60 * PI / 61, rel=1e-14)
    rows_e = asymptotic_sweep(2, 1, "mono:0", range(1, 41))
    Ce = fitted_constant(rows_e)
    assert np.isfinite(Ce)
    tail = [float(r.scaled_err) for r in rows_e[-10:]]
    assert max(tail) - min(tail) < 0.05 * max(tail)


def test_sweep_ratio_converges_monotonically():
    rows = asymptotic_sweep(2, 0, "mono:0", range(1, 61))
    ratios = [float(r.K_ss) * r.m / PI / float(r.norm_sq) for r in rows]
    assert all(b > a for a, b in zip(ratios, ratios[1:]))
    assert ratios[-1] == pytest.approx(1, abs=0.02)


def test_sweep_pattern_section():
    s = section_from_spec("pattern:1,2,1/3", 2, 5)
    assert s.coeffs[:3] == (1, 2, Fraction(1, 3))
    assert all(c == 0 for c in s.coeffs[3:])
    rows = asymptotic_sweep(2, 0, "pattern:1,2,1/3", range(2, 30))
    assert np.isfinite(fitted_constant(rows))


def test_sweep_empty_range():
    with pytest.raises(ValueError):
        asymptotic_sweep(2, 0, "mono:0", range(1, 1))


def test_step_monotone():
    assert step_monotone([3, 2, 2.01, 1])
    assert not step_monotone([1, 1.2])


def test_maximal_sos_examples():
    rep = maximal_sos_check(OperatorSetup(2, 3))
    assert rep.positive_definite and rep.count == 4 and rep.residual < 1e-10
    assert maximal_sos_check(OperatorSetup(2, 1)).count == 2
    rep = maximal_sos_check(OperatorSetup(3, 2))
    B = basis(3, 2)
    for g in rep.squares:
        nz = [i for i, c in enumerate(g.vector) if abs(c) > 1e-12]
        assert len(nz) == 1
        mult = math.factorial(2) / math.prod(math.factorial(a) for a in B[nz[0]])
        assert abs(g.vector[nz[0]]) == pytest.approx(math.sqrt(mult), rel=1e-12)


@settings(max_examples=20, deadline=None)
@given(N=st.integers(2, 3), m=st.integers(1, 4), e=st.integers(0, 1))
def test_prop_orthonormal_identity(N, m, e):
    assert orthonormal_identity_check(OperatorSetup(N, m, e)) == 0


@settings(max_examples=20, deadline=None)
@given(m=st.integers(1, 40), e=st.integers(0, 2))
def test_prop_sweep_row_consistent(m, e):
    setup = OperatorSetup(2, m, e)
    r = sweep_row(setup, section_from_spec("mono:0", 2, setup.degree))
    assert float(r.scaled_err) == pytest.approx(m * m * float(r.err) / float(r.norm_sq), rel=1e-12)
    assert relative_leading_defect(r, 1) == pytest.approx(float(r.scaled_err) / PI, rel=1e-12)
