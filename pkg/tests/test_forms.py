import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hermsos.forms import (DegenerateInputError, DimensionError, FormatError, GaussianRational,
                           HermitianForm, Section, basis, cauchy_schwarz, diagonal_form, eval_form,
                           form_from_json, form_to_json, fubini_study, hermitian_symmetry_check,
                           load_form, multiply, norm_power, power, pullback, sample_sphere,
                           sgcs_sample_check)

from conftest import DATA


def random_positive_form(rng, N, d):
    """Gram matrix plus a multiple of the norm power: strictly positive on the sphere."""
    size = len(basis(N, d))
    A = rng.normal(size=(size, size)) + 1j * rng.normal(size=(size, size))
    C = A @ A.conj().T / size + norm_power(d, N).C.astype(complex)
    return HermitianForm(N, d, C)


def random_hermitian(rng, N, d):
    size = len(basis(N, d))
    A = rng.normal(size=(size, size)) + 1j * rng.normal(size=(size, size))
    return HermitianForm(N, d, A + A.conj().T)


def exact_hermitian(draw_ints, size):
    C = np.full((size, size), Fraction(0), dtype=object)
    it = iter(draw_ints)
    for i in range(size):
        C[i, i] = Fraction(next(it))
        for j in range(i + 1, size):
            z = GaussianRational(Fraction(next(it)), Fraction(next(it)))
            C[i, j], C[j, i] = z, z.conjugate()
    return C


def test_basis_examples():
    assert basis(1, 3).indices == ((3,),)
    assert basis(2, 1).indices == ((1, 0), (0, 1))
    assert basis(2, 2).indices == ((2, 0), (1, 1), (0, 2))
    assert len(basis(3, 4)) == 15
    assert basis(3, 2).index((0, 1, 1)) == 4


def test_eval_form_examples():
    R = fubini_study(2)
    assert eval_form(R, np.array([1, 0j]), np.array([1, 0j])) == 1
    assert eval_form(R, np.array([1, 0j]), np.array([0, 1j])) == 0
    f = diagonal_form(2, 2, [1, -1, 1])
    assert eval_form(f, np.array([1, 1.0]), np.array([1, 1.0])) == 1


def test_eval_form_dimension_mismatch():
    with pytest.raises(DimensionError):
        eval_form(fubini_study(2), np.ones(3), np.ones(3))


def test_hermitian_symmetry_exact_and_fs():
    rng = np.random.default_rng(1)
    f = random_hermitian(rng, 3, 2)
    assert hermitian_symmetry_check(f) < 1e-14 * np.abs(f.C).sum()
    assert hermitian_symmetry_check(fubini_study(2)) < 1e-15


def test_hermitian_symmetry_detects_perturbation():
    C = np.eye(3, dtype=complex)
    delta = 1e-3
    C[0, 2] += delta
    f = HermitianForm(2, 2, C, check=False)
    v, w = np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]])
    # witness: v^alpha conj(w)^beta = 1 for alpha = (2,0), beta = (0,2)
    assert hermitian_symmetry_check(f, pairs=(v, w)) >= delta


def test_non_hermitian_rejected():
    with pytest.raises(ValueError):
        HermitianForm(2, 1, np.array([[1, 1], [0, 1]], dtype=complex))


def test_multiply_examples():
    R = fubini_study(2)
    assert multiply(R, R).C.diagonal().tolist() == [1, 2, 1]
    lam1 = diagonal_form(2, 2, [1, -1, 1])
    prod = multiply(R, lam1)
    expect = np.diag([1, 0, 0, 1])
    assert all(prod.C[i, j] == expect[i, j] for i in range(4) for j in range(4))
    one = norm_power(0, 2)
    assert np.array_equal(multiply(lam1, one).C, lam1.C)


def test_norm_power_examples():
    assert norm_power(1, 2).C.tolist() == [[1, 0], [0, 1]]
    assert norm_power(0, 3).C.tolist() == [[1]]
    assert norm_power(2, 2).C.diagonal().tolist() == [1, 2, 1]
    assert norm_power(2, 3).C.diagonal().tolist() == [1, 2, 2, 1, 2, 1]


def test_multiply_matches_pointwise_product_float():
    rng = np.random.default_rng(2)
    f, g = random_hermitian(rng, 3, 1), random_hermitian(rng, 3, 2)
    z = sample_sphere(rng, 20, 3)
    w = sample_sphere(rng, 20, 3)
    np.testing.assert_allclose(eval_form(multiply(f, g), z, w), eval_form(f, z, w) * eval_form(g, z, w),
                               atol=1e-12)


def test_cauchy_schwarz_examples():
    R = fubini_study(2)
    assert cauchy_schwarz(R, np.array([1, 0j]), np.array([1, 1 + 0j])) == pytest.approx(0.5, abs=1e-15)
    assert cauchy_schwarz(R, np.array([1, 0j]), np.array([0, 1 + 0j])) == 0
    rng = np.random.default_rng(3)
    f = random_positive_form(rng, 2, 2)
    x = sample_sphere(rng, 5, 2)
    np.testing.assert_allclose(cauchy_schwarz(f, x, x), 1.0, atol=1e-14)


def test_cauchy_schwarz_degenerate_raises():
    f = diagonal_form(2, 1, [1, 0])
    with pytest.raises(DegenerateInputError):
        cauchy_schwarz(f, np.array([0, 1 + 0j]), np.array([1, 1 + 0j]))


def test_pullback_by_unitary_fixes_fs_power():
    rng = np.random.default_rng(4)
    Q, _ = np.linalg.qr(rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)))
    g = pullback(norm_power(2, 3).to_float(), Q)
    np.testing.assert_allclose(g.C, norm_power(2, 3).C.astype(complex), atol=1e-13)


def test_pullback_evaluates_composition():
    rng = np.random.default_rng(5)
    f = random_hermitian(rng, 2, 3)
    U = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    z, w = sample_sphere(rng, 10, 2), sample_sphere(rng, 10, 2)
    np.testing.assert_allclose(eval_form(pullback(f, U), z, w), eval_form(f, z @ U.T, w @ U.T), atol=1e-10)


def test_sgcs_fs_passes():
    rep = sgcs_sample_check(fubini_study(2), num_samples=500, seed=0)
    assert rep.max_psi < 1
    # affine-chart Hessian 1/(1+|w|^2)^2 with |w| <= 1 on the chart of the largest coordinate
    assert rep.min_hessian_eig >= 0.25 - 1e-12
    assert rep.ok


def test_fs_hessian_at_chart_centre():
    from hermsos.series import ChartPoint, chart_hessian
    H = chart_hessian(fubini_study(3), ChartPoint.affine(np.array([1, 0, 0j])))
    np.testing.assert_allclose(H, np.eye(2), atol=1e-14)


def test_sgcs_violation_witness():
    # R(x, ȳ) = (x1 ȳ1)^2 + (x2 ȳ2)^2 cannot separate (a, b) from (a, -b)
    R = diagonal_form(2, 2, [1, 0, 1])
    rep = sgcs_sample_check(R, num_samples=2000, seed=0)
    assert rep.witness is not None
    x, y = rep.witness
    assert cauchy_schwarz(R, x, y) == pytest.approx(1.0, abs=1e-6)
    assert cauchy_schwarz(fubini_study(2), x, y) < 1 - 1e-6
    assert not rep.sgcs1_ok


def test_json_roundtrip_and_closure():
    f = load_form(DATA / "perturbed_p.json")
    assert f.exact
    assert f.C[1, 0] == GaussianRational(Fraction(1, 10), Fraction(-1, 20))
    g = form_from_json(json.loads(json.dumps(form_to_json(f))))
    assert all(a == b for a, b in zip(f.C.flat, g.C.flat))


def test_json_errors():
    with pytest.raises(FormatError, match="line 2 column 32"):
        load_form(DATA / "malformed.json")
    bad = {"N": 2, "d": 1, "entries": [{"alpha": [1, 0], "beta": [0, 1], "re": 1, "im": 1},
                                       {"alpha": [0, 1], "beta": [1, 0], "re": 1, "im": 1}]}
    with pytest.raises(FormatError, match="inconsistent"):
        form_from_json(bad)
    with pytest.raises(FormatError, match="real"):
        form_from_json({"N": 2, "d": 1, "entries": [{"alpha": [1, 0], "beta": [1, 0], "re": 1, "im": 2}]})
    with pytest.raises(FormatError, match="degree"):
        form_from_json({"N": 2, "d": 1, "entries": [{"alpha": [2, 0], "beta": [1, 0], "re": 1}]})


def test_section_from_monomial():
    s = Section.monomial(2, (1, 2))
    z = np.array([2.0, 3.0])
    assert s(z) == pytest.approx(18.0)


# properties

@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), N=st.integers(2, 3), d=st.integers(0, 3))
def test_prop_hermitian_closure(seed, N, d):
    rng = np.random.default_rng(seed)
    f = random_hermitian(rng, N, d)
    v, w = sample_sphere(rng, 10, N), sample_sphere(rng, 10, N)
    np.testing.assert_allclose(eval_form(f, v, w), np.conj(eval_form(f, w, v)), atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d1=st.integers(0, 2), d2=st.integers(0, 2))
def test_prop_psi_multiplicative(seed, d1, d2):
    rng = np.random.default_rng(seed)
    f, g = random_positive_form(rng, 2, d1), random_positive_form(rng, 2, d2)
    x, y = sample_sphere(rng, 10, 2), sample_sphere(rng, 10, 2)
    lhs = cauchy_schwarz(multiply(f, g), x, y)
    np.testing.assert_allclose(lhs, cauchy_schwarz(f, x, y) * cauchy_schwarz(g, x, y), rtol=1e-10, atol=1e-14)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(1, 3),
       lam=st.complex_numbers(min_magnitude=0.1, max_magnitude=10, allow_nan=False, allow_infinity=False))
def test_prop_scaling_covariance(seed, d, lam):
    rng = np.random.default_rng(seed)
    f = random_hermitian(rng, 2, d)
    v, w = sample_sphere(rng, 5, 2), sample_sphere(rng, 5, 2)
    np.testing.assert_allclose(eval_form(f, lam * v, w), lam ** d * eval_form(f, v, w),
                               rtol=1e-10, atol=1e-10 * abs(lam) ** d)


@settings(max_examples=25, deadline=None)
@given(ints=st.lists(st.integers(-5, 5), min_size=27, max_size=27))
def test_prop_multiply_commutative_associative_exact(ints):
    size = 3    # N = 2, d = 2
    f = HermitianForm(2, 2, exact_hermitian(ints[:9], size))
    g = HermitianForm(2, 1, exact_hermitian(ints[9:13], 2))
    h = HermitianForm(2, 1, exact_hermitian(ints[13:17], 2))
    fg, gf = multiply(f, g), multiply(g, f)
    assert all(a == b for a, b in zip(fg.C.flat, gf.C.flat))
    left, right = multiply(multiply(f, g), h), multiply(f, multiply(g, h))
    assert all(a == b for a, b in zip(left.C.flat, right.C.flat))


@settings(max_examples=30, deadline=None)
@given(l1=st.integers(0, 4), l2=st.integers(0, 4), N=st.integers(1, 3))
def test_prop_norm_power_additive(l1, l2, N):
    lhs = norm_power(l1 + l2, N)
    rhs = multiply(norm_power(l1, N), norm_power(l2, N))
    assert all(a == b for a, b in zip(lhs.C.flat, rhs.C.flat))
    assert all(a == b for a, b in zip(power(fubini_study(N), l1).C.flat, norm_power(l1, N).C.flat))
