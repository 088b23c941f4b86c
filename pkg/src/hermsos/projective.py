"""Exact L2 pairings and the integral operator on P^{N-1} for Fubini-Study powers.

Values are rational multiples of powers of pi and are carried as
:class:`ExactScalar`.  The volume form is normalized so that the chart
density of the Fubini-Study metric at the base point of a Bochner chart is 1
against Lebesgue measure; with that convention ``vol(P^n) = pi^n / n!`` and

    int z^a z̄^b / |z|^(2d) dvol = delta_ab * pi^n * a! / (d + n)!

with ``a! = prod a_i!``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .forms import (GaussianRational, _to_exact_entry, HermitianForm, Section, basis, eval_form, fubini_study,
                    multiply, norm_power, power, sample_sphere)


class ExactModeError(ValueError):
    """Exact evaluation needs R = FS and P a power of FS."""


@dataclass(frozen=True)
class ExactScalar:
    """``q * pi^p`` with rational ``q``; sums demand matching ``p`` unless a term is zero."""

    q: Fraction
    p: int = 0

    def __post_init__(self):
        object.__setattr__(self, "q", Fraction(self.q))

    def _check(self, other):
        if not isinstance(other, ExactScalar):
            other = ExactScalar(Fraction(other), 0)
        return other

    def __add__(self, other):
        o = self._check(other)
        if o.q == 0:
            return self
        if self.q == 0:
            return o
        if o.p != self.p:
            raise ValueError(f"cannot add pi^{self.p} and pi^{o.p} terms")
        return ExactScalar(self.q + o.q, self.p)

    __radd__ = __add__

    def __neg__(self):
        return ExactScalar(-self.q, self.p)

    def __sub__(self, other):
        return self + (-self._check(other))

    def __rsub__(self, other):
        return self._check(other) - self

    def __mul__(self, other):
        o = self._check(other)
        return ExactScalar(self.q * o.q, self.p + o.p)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._check(other)
        return ExactScalar(self.q / o.q, self.p - o.p)

    def __abs__(self):
        return ExactScalar(abs(self.q), self.p)

    def __float__(self):
        return float(self.q) * math.pi ** self.p

    def __eq__(self, other):
        if not isinstance(other, ExactScalar):
            return self.q == 0 and other == 0
        if self.q == 0 or other.q == 0:
            return self.q == other.q
        return self.q == other.q and self.p == other.p

    def __hash__(self):
        return hash((self.q, self.p if self.q else 0))

    def __bool__(self):
        return self.q != 0

    def __str__(self):
        return f"{self.q} * pi^{self.p}"


@dataclass(frozen=True)
class ExactMatrix:
    """Rational matrix times a common power of pi."""

    q: np.ndarray
    p: int

    def __getitem__(self, ij):
        return ExactScalar(self.q[ij], self.p)

    @property
    def shape(self):
        return self.q.shape

    def to_float(self) -> np.ndarray:
        return self.q.astype(float) * math.pi ** self.p

    def strings(self):
        return [[str(ExactScalar(x, self.p)) for x in row] for row in self.q]


# ---------------------------------------------------------------------------
# setup


@dataclass(frozen=True)
class OperatorSetup:
    N: int
    m: int
    e: int = 0
    R: HermitianForm | None = None
    P: HermitianForm | None = None

    def __post_init__(self):
        if self.N < 1 or self.m < 0 or self.e < 0:
            raise ValueError("need N >= 1 and non-negative m, e")
        R = self.R if self.R is not None else fubini_study(self.N)
        P = self.P if self.P is not None else norm_power(self.e, self.N)
        if self.R is not None and not _equals_exact(R, fubini_study(self.N)):
            raise ExactModeError("exact mode requires R to be the Fubini-Study form")
        if self.P is not None:
            if not _equals_exact(P, norm_power(P.d, self.N)):
                raise ExactModeError("exact mode requires P to be a power of the Fubini-Study form")
            object.__setattr__(self, "e", P.d)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "P", P)

    @property
    def n(self) -> int:
        return self.N - 1

    @property
    def degree(self) -> int:
        return self.m + self.e

    @property
    def sections(self):
        return basis(self.N, self.degree)

    def Q(self) -> HermitianForm:
        return multiply(power(self.R, self.m), self.P)


def _equals_exact(f: HermitianForm, g: HermitianForm) -> bool:
    if (f.N, f.d) != (g.N, g.d):
        return False
    if f.exact:
        return all(a == b for a, b in zip(f.C.flat, g.C.flat))
    return bool(np.allclose(f.C, g.C.astype(complex), atol=0, rtol=0))


def _factorial_multi(alpha) -> int:
    out = 1
    for a in alpha:
        out *= math.factorial(a)
    return out


def monomial_integral(alpha, beta, N: int) -> ExactScalar:
    """``int_{P^{N-1}} z^alpha z̄^beta / |z|^(2d) dvol``."""
    alpha, beta = tuple(alpha), tuple(beta)
    if len(alpha) != N or len(beta) != N:
        raise ValueError("multi-index length does not match N")
    d = sum(alpha)
    if sum(beta) != d:
        raise ValueError("monomial degrees differ")
    n = N - 1
    if alpha != beta:
        return ExactScalar(0, n)
    return ExactScalar(Fraction(_factorial_multi(alpha), math.factorial(d + n)), n)


def volume(N: int) -> ExactScalar:
    return monomial_integral((0,) * N, (0,) * N, N)


def _integral_table(N, d):
    """Nonzero monomial integrals keyed by position pairs."""
    B = basis(N, d)
    out = {}
    for i, a in enumerate(B):
        for j, b in enumerate(B):
            v = monomial_integral(a, b, N)
            if v:
                out[(i, j)] = v.q
    return out


def gram_matrix(setup: OperatorSetup) -> ExactMatrix:
    """``G[a, b] = (s^a, s^b)`` for the monomial sections."""
    N, D = setup.N, setup.degree
    size = len(basis(N, D))
    G = np.full((size, size), Fraction(0), dtype=object)
    for (i, j), v in _integral_table(N, D).items():
        G[i, j] = v
    return ExactMatrix(G, setup.n)


def operator_matrix(setup: OperatorSetup) -> ExactMatrix:
    """``K[a, b] = K(s^a, s^b)`` with ``Q(x, ȳ)`` expanded into monomials.

    The double integral then splits as
    ``K[a, b] = sum_{g, h} C[g, h] I(g, b) I(a, h)`` with single monomial
    integrals ``I``, evaluated over the nonzero entries only.
    """
    N, D = setup.N, setup.degree
    Q = setup.Q()
    size = len(basis(N, D))
    table = _integral_table(N, D)
    by_second, by_first = {}, {}
    for (i, j), v in table.items():
        by_second.setdefault(j, []).append((i, v))
        by_first.setdefault(i, []).append((j, v))
    K = np.full((size, size), Fraction(0), dtype=object)
    nz = [(g, h, Q.C[g, h]) for g, h in zip(*np.nonzero(Q.C != 0))]
    for g, h, c in nz:
        for b, Igb in by_first.get(g, ()):
            for a, Iah in by_second.get(h, ()):
                K[a, b] += c * Igb * Iah
    return ExactMatrix(K, 2 * setup.n)


def orthonormal_identity_check(setup: OperatorSetup):
    """Max deviation between ``K`` in an orthonormal basis and the coefficients of ``Q`` there.

    With ``t^a = s^a / sqrt(G_a)`` one has ``K(t^a, t^b) = Chat[b, a]`` where
    ``Chat[g, h] = C[g, h] sqrt(G_g G_h)``.  The square roots cancel from the
    comparison ``K[a, b] == C[b, a] G_a G_b``, which is decided exactly; an exact
    ``Fraction(0)`` is returned when every entry agrees.
    """
    G = gram_matrix(setup)
    K = operator_matrix(setup)
    Q = setup.Q()
    size = G.shape[0]
    for i in range(size):
        for j in range(size):
            if i != j and G.q[i, j] != 0:
                raise ValueError("monomial sections are not orthogonal; rescaling alone does not orthonormalize")
    worst = Fraction(0)
    for a in range(size):
        for b in range(size):
            # both sides carry pi^(2n)
            dev = K.q[a, b] - Q.C[b, a] * G.q[a, a] * G.q[b, b]
            if dev != 0:
                scale = float(G.q[a, a] * G.q[b, b]) ** 0.5 * math.pi ** setup.n
                worst = max(worst, abs(complex(dev)) * math.pi ** (2 * setup.n) / scale)
    return worst


def trace_identity(setup: OperatorSetup):
    """``(sum_a K[a,a]/G_a, sum_a C[a,a] G_a)``, both as ``ExactScalar`` in pi^n."""
    G, K, Q = gram_matrix(setup), operator_matrix(setup), setup.Q()
    lhs = sum((ExactScalar(K.q[a, a] / G.q[a, a], setup.n) for a in range(G.shape[0])), ExactScalar(0, setup.n))
    rhs = sum((ExactScalar(Q.C[a, a] * G.q[a, a], setup.n) for a in range(G.shape[0])), ExactScalar(0, setup.n))
    return lhs, rhs


# ---------------------------------------------------------------------------
# sections and sweeps


def section_from_spec(spec: str, N: int, degree: int) -> Section:
    """``mono:i`` is ``z_i^degree``; ``pattern:c0,c1,...`` is ``sum c_j z_0^(degree-j) z_1^j``."""
    kind, _, arg = spec.partition(":")
    if kind == "mono":
        i = int(arg or 0)
        if not 0 <= i < N:
            raise ValueError(f"variable index {i} out of range for N={N}")
        alpha = tuple(degree if k == i else 0 for k in range(N))
        return Section.monomial(N, alpha)
    if kind == "pattern":
        if N < 2:
            raise ValueError("coefficient patterns need N >= 2")
        coeffs = [Fraction(c) for c in arg.split(",") if c.strip()]
        if len(coeffs) > degree + 1:
            raise ValueError("pattern longer than the section degree allows")
        B = basis(N, degree)
        vec = [Fraction(0)] * len(B)
        for j, c in enumerate(coeffs):
            alpha = (degree - j, j) + (0,) * (N - 2)
            vec[B.index(alpha)] = c
        return Section(N, degree, tuple(vec))
    raise ValueError(f"unknown section spec {spec!r}")


def _hermitian_value(M: ExactMatrix, s: Section, t: Section | None = None) -> ExactScalar:
    t = s if t is None else t
    total = Fraction(0)
    # float coefficients convert losslessly to their binary rational value
    sv, tv = [_to_exact_entry(c) for c in s.coeffs], [_to_exact_entry(c) for c in t.coeffs]
    for a, ca in enumerate(sv):
        if ca == 0:
            continue
        for b, cb in enumerate(tv):
            if cb == 0 or M.q[a, b] == 0:
                continue
            conj_cb = cb.conjugate() if hasattr(cb, "conjugate") else cb
            total = total + ca * conj_cb * M.q[a, b]
    if isinstance(total, GaussianRational):
        if total.im != 0:
            raise ValueError("Hermitian value has an imaginary part")
        total = total.re
    return ExactScalar(total, M.p)


@dataclass(frozen=True)
class SweepRow:
    m: int
    K_ss: ExactScalar
    norm_sq: ExactScalar
    err: ExactScalar
    scaled_err: ExactScalar

    def floats(self):
        return (self.m, float(self.K_ss), float(self.norm_sq), float(self.err), float(self.scaled_err))


def sweep_row(setup: OperatorSetup, s: Section) -> SweepRow:
    m, n = setup.m, setup.n
    if m < 1:
        raise ValueError("the leading asymptotic term needs m >= 1")
    K_ss = _hermitian_value(operator_matrix(setup), s)
    norm = _hermitian_value(gram_matrix(setup), s)
    err = abs(K_ss - ExactScalar(Fraction(1, m ** n), n) * norm)
    scaled = err * Fraction(m ** (n + 1)) / norm
    return SweepRow(m, K_ss, norm, err, scaled)


def asymptotic_sweep(N: int, e: int = 0, s_spec: str = "mono:0", m_range=range(1, 61)) -> list:
    rows = []
    for m in m_range:
        setup = OperatorSetup(N, m, e)
        rows.append(sweep_row(setup, section_from_spec(s_spec, N, setup.degree)))
    if not rows:
        raise ValueError("empty m range")
    return rows


def fitted_constant(rows) -> float:
    return max(float(r.scaled_err) for r in rows)


def step_monotone(values, jitter: float = 0.01) -> bool:
    """``values[k+1] <= (1 + jitter) * values[k]`` for every consecutive pair."""
    v = [float(x) for x in values]
    return all(b <= (1 + jitter) * a for a, b in zip(v, v[1:]))


def relative_leading_defect(row: SweepRow, n: int) -> float:
    """``m * |K / (pi^n / m^n) / ||s||^2 - 1|``."""
    ratio = row.K_ss / (ExactScalar(Fraction(1, row.m ** n), n) * row.norm_sq)
    assert ratio.p == 0
    return float(row.m * abs(ratio.q - 1))


# ---------------------------------------------------------------------------
# maximal sums of squares


@dataclass
class MaximalSOSReport:
    positive_definite: bool
    min_eig: float
    squares: list
    dim: int
    residual: float

    @property
    def count(self) -> int:
        return len(self.squares)


def maximal_sos_check(setup: OperatorSetup, num_samples: int = 200, seed: int = 0,
                      tol: float = 1e-9) -> MaximalSOSReport:
    """Rebuild the coefficients of ``Q`` from ``K`` and ``G``, then extract squares."""
    from .certify import extract_squares, sum_of_squares

    G, K = gram_matrix(setup), operator_matrix(setup)
    N, D = setup.N, setup.degree
    size = G.shape[0]
    C = np.full((size, size), Fraction(0), dtype=object)
    for a in range(size):
        for b in range(size):
            if K.q[b, a] != 0:
                C[a, b] = K.q[b, a] / (G.q[a, a] * G.q[b, b])
    Qrec = HermitianForm(N, D, C)
    eig = np.linalg.eigvalsh(C.astype(float))
    lo = float(eig[0])
    if lo <= tol * max(1.0, float(eig[-1])):
        return MaximalSOSReport(False, lo, [], size, float("nan"))
    squares = extract_squares(Qrec)
    rng = np.random.default_rng(seed)
    z = sample_sphere(rng, num_samples, N)
    direct = eval_form(setup.Q().to_float(), z, z).real
    resid = float(np.max(np.abs(direct - sum_of_squares(squares, z))))
    return MaximalSOSReport(True, lo, squares, size, resid)
