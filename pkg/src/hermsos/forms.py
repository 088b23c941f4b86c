"""Hermitian bihomogeneous forms on C^N.

A form of bidegree (d, d) is stored as a square matrix ``C`` over the degree-d
monomial basis, so that ``f(v, conj(w)) = m(v)^T C conj(m(w))`` where ``m`` is
the vector of monomials.  Two scalar backends exist: ``complex128`` arrays and
``object`` arrays of exact rationals (``Fraction`` or ``GaussianRational``).
Switching between them is always explicit (``to_float`` / ``to_exact``).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from numbers import Rational
from typing import Iterable, Sequence

import numpy as np

MultiIndex = tuple  # tuple[int, ...]

DENOM_FLOOR = 1e-300


class DimensionError(ValueError):
    pass


class DegenerateInputError(ValueError):
    """Raised when a Cauchy-Schwarz denominator (or chart base value) vanishes."""


class FormatError(ValueError):
    pass


# ---------------------------------------------------------------------------
# exact complex rationals


@dataclass(frozen=True)
class GaussianRational:
    """Exact ``re + i*im`` with Fraction parts.  Interoperates with Fraction/int."""

    re: Fraction
    im: Fraction = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "re", Fraction(self.re))
        object.__setattr__(self, "im", Fraction(self.im))

    @staticmethod
    def _coerce(other):
        if isinstance(other, GaussianRational):
            return other
        if isinstance(other, (int, Rational)):
            return GaussianRational(Fraction(other))
        return None

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return GaussianRational(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __neg__(self):
        return GaussianRational(-self.re, -self.im)

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return GaussianRational(self.re - o.re, self.im - o.im)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o - self

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return GaussianRational(self.re * o.re - self.im * o.im,
                                self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        den = o.re * o.re + o.im * o.im
        num = self * o.conjugate()
        return GaussianRational(num.re / den, num.im / den)

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o / self

    def __eq__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        if self.im == 0:
            return hash(self.re)
        return hash((self.re, self.im))

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __abs__(self):
        return math.hypot(float(self.re), float(self.im))

    def conjugate(self):
        return GaussianRational(self.re, -self.im)

    @property
    def real(self):
        return self.re

    @property
    def imag(self):
        return self.im

    def __repr__(self):
        return f"GaussianRational({self.re}, {self.im})"


def exact_scalar(re, im=0):
    """Fraction when the imaginary part is zero, GaussianRational otherwise."""
    re, im = Fraction(re), Fraction(im)
    return re if im == 0 else GaussianRational(re, im)


def _to_exact_entry(x):
    if isinstance(x, (GaussianRational, Fraction, int)):
        return x if not isinstance(x, int) else Fraction(x)
    z = complex(x)
    return exact_scalar(Fraction(z.real), Fraction(z.imag))


# ---------------------------------------------------------------------------
# monomial bases


def _compositions(N: int, d: int):
    if N == 1:
        yield (d,)
        return
    for a in range(d, -1, -1):
        for rest in _compositions(N - 1, d - a):
            yield (a,) + rest


@dataclass(frozen=True)
class MonomialBasis:
    """All exponent tuples of total degree ``d`` in ``N`` variables, lex descending."""

    N: int
    d: int
    indices: tuple
    position: dict = field(compare=False, repr=False)

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __getitem__(self, i):
        return self.indices[i]

    def index(self, alpha) -> int:
        try:
            return self.position[tuple(alpha)]
        except KeyError:
            raise DimensionError(f"{tuple(alpha)} not in degree-{self.d} basis on C^{self.N}") from None

    @property
    def exponents(self) -> np.ndarray:
        return _exponent_array(self.N, self.d)


@lru_cache(maxsize=None)
def basis(N: int, d: int) -> MonomialBasis:
    if N < 1 or d < 0:
        raise DimensionError(f"need N >= 1 and d >= 0, got N={N}, d={d}")
    idx = tuple(_compositions(N, d))
    return MonomialBasis(N, d, idx, {a: i for i, a in enumerate(idx)})


@lru_cache(maxsize=None)
def _exponent_array(N, d):
    a = np.array(basis(N, d).indices, dtype=np.int64).reshape(-1, N)
    a.flags.writeable = False
    return a


def multinomial(alpha) -> int:
    out = math.factorial(sum(alpha))
    for a in alpha:
        out //= math.factorial(a)
    return out


def monomials(N: int, d: int, z) -> np.ndarray:
    """Values ``z^alpha`` for every alpha in ``basis(N, d)``; shape ``z.shape[:-1] + (len,)``."""
    z = np.asarray(z)
    if z.shape[-1] != N:
        raise DimensionError(f"expected vectors of length {N}, got {z.shape[-1]}")
    exps = _exponent_array(N, d)
    if z.dtype == object:
        out = np.empty(z.shape[:-1] + (len(exps),), dtype=object)
        for idx in np.ndindex(z.shape[:-1]):
            for k, e in enumerate(exps):
                val = Fraction(1)
                for zi, ei in zip(z[idx], e):
                    val = val * zi ** int(ei)
                out[idx + (k,)] = val
        return out
    z = z.astype(complex)
    out = np.ones(z.shape[:-1] + (len(exps),), dtype=complex)
    for i in range(N):
        col = exps[:, i]
        top = int(col.max(initial=0))
        if top == 0:
            continue
        pw = np.ones(z.shape[:-1] + (top + 1,), dtype=complex)
        for p in range(1, top + 1):
            pw[..., p] = pw[..., p - 1] * z[..., i]
        out *= pw[..., col]
    return out


def monomial_gradients(N: int, d: int, z) -> np.ndarray:
    """``d/dz_k z^alpha``; shape ``z.shape[:-1] + (N, len(basis))``."""
    z = np.asarray(z, dtype=complex)
    exps = _exponent_array(N, d)
    out = np.zeros(z.shape[:-1] + (N, len(exps)), dtype=complex)
    if d == 0:
        return out
    low = monomials(N, d - 1, z)
    pos = basis(N, d - 1).position
    for k in range(N):
        for j, e in enumerate(exps):
            if e[k] == 0:
                continue
            e2 = list(e)
            e2[k] -= 1
            out[..., k, j] = e[k] * low[..., pos[tuple(e2)]]
    return out


# ---------------------------------------------------------------------------
# Hermitian forms


class HermitianForm:
    """Immutable Hermitian form of bidegree (d, d) on C^N."""

    __slots__ = ("N", "d", "_C")

    def __init__(self, N: int, d: int, C, *, check: bool = True):
        B = basis(N, d)
        C = np.array(C, dtype=object if _is_exact_array(C) else complex, copy=True)
        if C.shape != (len(B), len(B)):
            raise DimensionError(f"matrix shape {C.shape} does not match basis size {len(B)}")
        if C.dtype == object:
            C = np.vectorize(_to_exact_entry, otypes=[object])(C) if C.size else C
        if check:
            dev = _hermitian_defect(C)
            scale = max(1.0, float(np.max(np.abs(C.astype(complex))))) if C.size else 1.0
            limit = 0 if C.dtype == object else 1e-12 * scale
            if dev > limit:
                raise ValueError(f"coefficient matrix is not Hermitian (defect {dev:.3e})")
        C.flags.writeable = False
        self.N, self.d, self._C = N, d, C

    @property
    def C(self) -> np.ndarray:
        return self._C

    @property
    def basis(self) -> MonomialBasis:
        return basis(self.N, self.d)

    @property
    def exact(self) -> bool:
        return self._C.dtype == object

    def to_float(self) -> "HermitianForm":
        if not self.exact:
            return self
        return HermitianForm(self.N, self.d, self._C.astype(complex), check=False)

    def to_exact(self) -> "HermitianForm":
        """Exact copy; float entries are converted to their exact binary values."""
        if self.exact:
            return self
        return HermitianForm(self.N, self.d, np.vectorize(_to_exact_entry, otypes=[object])(self._C),
                             check=False)

    def __call__(self, v, w=None):
        return eval_form(self, v, v if w is None else w)

    def __mul__(self, other):
        if isinstance(other, HermitianForm):
            return multiply(self, other)
        return NotImplemented

    def scaled(self, c) -> "HermitianForm":
        return HermitianForm(self.N, self.d, self._C * c)

    def __add__(self, other):
        if not isinstance(other, HermitianForm) or (other.N, other.d) != (self.N, self.d):
            raise DimensionError("can only add forms of equal N and bidegree")
        return HermitianForm(self.N, self.d, self._C + other._C)

    def __sub__(self, other):
        return self + other.scaled(-1)

    def entries(self):
        """Nonzero ``(alpha, beta, value)`` triples in basis order."""
        B = self.basis
        for i, j in zip(*np.nonzero(self._C != 0)):
            yield B[i], B[j], self._C[i, j]

    def __repr__(self):
        kind = "exact" if self.exact else "float"
        return f"HermitianForm(N={self.N}, d={self.d}, {kind})"


def _is_exact_array(C) -> bool:
    if np.asarray(C).dtype.kind in "biufc":
        return False
    a = np.asarray(C, dtype=object)
    return a.size > 0 and all(isinstance(x, (Rational, GaussianRational)) and not isinstance(x, bool)
                              for x in a.flat)


def _hermitian_defect(C) -> float:
    if C.dtype == object:
        D = C - np.conj(C).T
        return 0.0 if not any(bool(x) for x in D.flat) else float(np.max(np.abs(D.astype(complex))))
    return float(np.max(np.abs(C - C.conj().T))) if C.size else 0.0


def constant_form(N: int, c=1) -> HermitianForm:
    return HermitianForm(N, 0, np.array([[Fraction(c)]], dtype=object))


def norm_power(ell: int, N: int) -> HermitianForm:
    """``(|z_1|^2 + ... + |z_N|^2)^ell`` with exact multinomial diagonal."""
    if ell < 0:
        raise ValueError("ell must be non-negative")
    B = basis(N, ell)
    C = np.full((len(B), len(B)), Fraction(0), dtype=object)
    for i, a in enumerate(B):
        C[i, i] = Fraction(multinomial(a))
    return HermitianForm(N, ell, C, check=False)


def fubini_study(N: int) -> HermitianForm:
    return norm_power(1, N)


def diagonal_form(N: int, d: int, diag) -> HermitianForm:
    diag = list(diag)
    B = basis(N, d)
    if len(diag) != len(B):
        raise DimensionError("diagonal length does not match basis")
    exact = all(isinstance(x, (int, Fraction)) for x in diag)
    C = np.full((len(B), len(B)), Fraction(0), dtype=object) if exact else np.zeros((len(B), len(B)), complex)
    for i, x in enumerate(diag):
        C[i, i] = Fraction(x) if exact else x
    return HermitianForm(N, d, C)


def eval_form(f: HermitianForm, v, w):
    """``f(v, conj(w))``; broadcasts over leading axes of ``v`` and ``w``."""
    v, w = np.asarray(v), np.asarray(w)
    if v.shape[-1] != f.N or w.shape[-1] != f.N:
        raise DimensionError(f"vectors must have length {f.N}")
    if f.exact and v.dtype == object and w.dtype == object:
        mv, mw = monomials(f.N, f.d, v), monomials(f.N, f.d, w)
        return np.sum((mv @ f.C) * np.conj(mw), axis=-1)
    C = f.C.astype(complex) if f.exact else f.C
    mv = monomials(f.N, f.d, v)
    mw = monomials(f.N, f.d, w)
    return np.sum((mv @ C) * mw.conj(), axis=-1)


def hermitian_symmetry_check(f: HermitianForm, num_pairs: int = 100, seed: int = 0, pairs=None) -> float:
    """Max of ``|f(v, w̄) - conj(f(w, v̄))|`` over the given or sampled pairs."""
    if pairs is None:
        rng = np.random.default_rng(seed)
        v = sample_sphere(rng, num_pairs, f.N)
        w = sample_sphere(rng, num_pairs, f.N)
    else:
        v, w = (np.asarray(p, dtype=complex) for p in pairs)
    C = f.C.astype(complex)
    mv, mw = monomials(f.N, f.d, v), monomials(f.N, f.d, w)
    a = np.sum((mv @ C) * mw.conj(), axis=-1)
    b = np.sum((mw @ C) * mv.conj(), axis=-1)
    return float(np.max(np.abs(a - np.conj(b))))


@lru_cache(maxsize=None)
def _product_index(N: int, d1: int, d2: int) -> np.ndarray:
    B1, B2, B = basis(N, d1), basis(N, d2), basis(N, d1 + d2)
    out = np.empty((len(B1), len(B2)), dtype=np.int64)
    for i, a in enumerate(B1):
        for j, b in enumerate(B2):
            out[i, j] = B.position[tuple(x + y for x, y in zip(a, b))]
    out.flags.writeable = False
    return out


def multiply(f: HermitianForm, g: HermitianForm) -> HermitianForm:
    """Pointwise product; coefficient matrices convolve over exponent sums."""
    if f.N != g.N:
        raise DimensionError(f"N mismatch: {f.N} vs {g.N}")
    N, d = f.N, f.d + g.d
    idx = _product_index(N, f.d, g.d)
    size = len(basis(N, d))
    if f.exact and g.exact:
        out = np.full((size, size), Fraction(0), dtype=object)
        fnz = list(zip(*np.nonzero(f.C != 0)))
        gnz = list(zip(*np.nonzero(g.C != 0)))
        for i1, j1 in fnz:
            a = f.C[i1, j1]
            for i2, j2 in gnz:
                out[idx[i1, i2], idx[j1, j2]] += a * g.C[i2, j2]
        return HermitianForm(N, d, out, check=False)
    Cf, Cg = f.C.astype(complex), g.C.astype(complex)
    rows = idx.reshape(-1)
    # kron(Cf, Cg) indexed by (i1*n2 + i2, j1*n2 + j2) -> aggregate both axes
    K = np.kron(Cf, Cg)
    tmp = np.zeros((size, K.shape[1]), dtype=complex)
    np.add.at(tmp, rows, K)
    out = np.zeros((size, size), dtype=complex)
    np.add.at(out.T, rows, tmp.T)
    return HermitianForm(N, d, out, check=False)


def power(f: HermitianForm, k: int) -> HermitianForm:
    out = constant_form(f.N)
    if not f.exact:
        out = out.to_float()
    base = f
    while k:
        if k & 1:
            out = multiply(out, base)
        k >>= 1
        if k:
            base = multiply(base, base)
    return out


def poly_product(N: int, d1: int, u, d2: int, v) -> np.ndarray:
    """Coefficient vector of the product of two holomorphic homogeneous polynomials."""
    idx = _product_index(N, d1, d2)
    out = np.zeros(len(basis(N, d1 + d2)), dtype=complex)
    np.add.at(out, idx.reshape(-1), np.outer(u, v).reshape(-1))
    return out


def substitution_matrix(N: int, d: int, U) -> np.ndarray:
    """``S[a, b]`` = coefficient of ``z^b`` in ``(U z)^a`` over ``basis(N, d)``."""
    U = np.asarray(U, dtype=complex)
    B = basis(N, d)
    S = np.zeros((len(B), len(B)), dtype=complex)
    for i, a in enumerate(B):
        vec, deg = np.ones(1, dtype=complex), 0
        for k, ak in enumerate(a):
            for _ in range(ak):
                vec = poly_product(N, deg, vec, 1, U[k])
                deg += 1
        S[i] = vec
    return S


def pullback(f: HermitianForm, U) -> HermitianForm:
    """Form ``z -> f(U z)`` (float backend)."""
    S = substitution_matrix(f.N, f.d, U)
    C = S.T @ f.C.astype(complex) @ S.conj()
    return HermitianForm(f.N, f.d, 0.5 * (C + C.conj().T), check=False)


def cauchy_schwarz(f: HermitianForm, x, y):
    """``Psi_f(x, y) = f(x,ȳ) f(y,x̄) / (f(x,x̄) f(y,ȳ))``; vectorized, real-valued."""
    x, y = np.asarray(x, dtype=complex), np.asarray(y, dtype=complex)
    fxy = eval_form(f, x, y)
    fxx = eval_form(f, x, x).real
    fyy = eval_form(f, y, y).real
    den = fxx * fyy
    if np.any(np.abs(den) < DENOM_FLOOR):
        raise DegenerateInputError("Cauchy-Schwarz denominator vanishes (point on the zero set)")
    out = (fxy * np.conj(fxy)).real / den
    return float(out) if np.ndim(out) == 0 else out


def log_hessian(f: HermitianForm, y) -> np.ndarray:
    """``d_k dbar_l log f(y, ȳ)`` in homogeneous coordinates; shape ``(..., N, N)``."""
    y = np.asarray(y, dtype=complex)
    C = f.C.astype(complex)
    m = monomials(f.N, f.d, y)
    dm = monomial_gradients(f.N, f.d, y)
    Cm = np.einsum("ij,...j->...i", C, m.conj())
    F = np.einsum("...i,...i->...", m, Cm).real
    Fk = np.einsum("...ki,...i->...k", dm, Cm)
    Fkl = np.einsum("...ki,ij,...lj->...kl", dm, C, dm.conj())
    return Fkl / F[..., None, None] - Fk[..., :, None] * Fk.conj()[..., None, :] / (F ** 2)[..., None, None]


def sample_sphere(rng: np.random.Generator, count: int, N: int) -> np.ndarray:
    z = rng.normal(size=(count, N)) + 1j * rng.normal(size=(count, N))
    return z / np.linalg.norm(z, axis=-1, keepdims=True)


# ---------------------------------------------------------------------------
# SGCS sampling


@dataclass
class SGCSReport:
    num_pairs: int
    max_psi: float
    min_ratio: float
    min_hessian_eig: float
    witness: tuple | None = None

    @property
    def sgcs1_ok(self) -> bool:
        return self.witness is None and self.max_psi < 1.0

    @property
    def sgcs2_ok(self) -> bool:
        return self.min_hessian_eig > 0.0

    @property
    def ok(self) -> bool:
        return self.sgcs1_ok and self.sgcs2_ok


def _fs_psi(x, y):
    ip = np.sum(x * y.conj(), axis=-1)
    return (ip * ip.conj()).real / (np.sum(np.abs(x) ** 2, -1) * np.sum(np.abs(y) ** 2, -1))


def sgcs_sample_check(R: HermitianForm, num_samples: int = 10_000, seed: int = 42,
                      refine: bool = True, hessian_samples: int = 200,
                      ratio_floor: float = 1e-8) -> SGCSReport:
    """Sampled evidence for the strong global Cauchy-Schwarz condition.

    SGCS-1 is probed through ``(1 - Psi_R)/(1 - Psi_FS)`` over random pairs,
    which stays bounded away from zero exactly when ``Psi_R < 1`` off the
    diagonal; the smallest ratios are refined by local minimization.  SGCS-2
    is probed through the smallest eigenvalue of the affine-chart Hessian of
    ``log R``.  Sampling can falsify the condition, not prove it.
    """
    from scipy.optimize import minimize

    R = R.to_float()
    rng = np.random.default_rng(seed)
    x = sample_sphere(rng, num_samples, R.N)
    y = sample_sphere(rng, num_samples, R.N)
    if np.min(eval_form(R, x, x).real) <= 0:
        raise ValueError("R is not positive on the sampled sphere points")
    psi = cauchy_schwarz(R, x, y)
    gap_fs = 1.0 - _fs_psi(x, y)
    distinct = gap_fs > 1e-9
    max_psi = float(np.max(psi[distinct])) if np.any(distinct) else 0.0
    ratio = np.where(distinct, (1.0 - psi) / np.where(distinct, gap_fs, 1.0), np.inf)
    order = np.argsort(ratio)
    best = int(order[0])
    min_ratio = float(ratio[best])
    wx, wy = x[best], y[best]

    if refine and np.isfinite(min_ratio):
        N = R.N

        def unpack(p):
            a = p[:2 * N].view(complex)
            b = p[2 * N:].view(complex)
            return a / np.linalg.norm(a), b / np.linalg.norm(b)

        def objective(p):
            a, b = unpack(p)
            g = 1.0 - _fs_psi(a, b)
            if g < 1e-6:
                return 1.0 + (1e-6 - g) * 1e6
            try:
                return (1.0 - cauchy_schwarz(R, a, b)) / g
            except DegenerateInputError:
                return 1.0e6

        for k in order[:5]:
            p0 = np.concatenate([x[k].view(float), y[k].view(float)])
            res = minimize(objective, p0, method="Nelder-Mead",
                           options={"maxiter": 2000, "xatol": 1e-10, "fatol": 1e-14})
            if res.fun < min_ratio:
                min_ratio = float(res.fun)
                wx, wy = unpack(res.x)
        max_psi = max(max_psi, 1.0 - min_ratio * (1.0 - float(_fs_psi(wx, wy))))

    hx = x[:min(hessian_samples, num_samples)]
    eigs = _affine_hessian_eigs(R, hx)
    witness = (wx, wy) if min_ratio < ratio_floor else None
    return SGCSReport(num_samples, max_psi, min_ratio, float(np.min(eigs)), witness)


def _affine_hessian_eigs(R: HermitianForm, x) -> np.ndarray:
    """Eigenvalues of the chart Hessian of the diastasis at each base point."""
    from .series import ChartPoint, diastasis, restrict_psi

    out = []
    for p in x:
        cp = ChartPoint.affine(p)
        phi = diastasis(restrict_psi(R, cp, 2))
        out.append(np.linalg.eigvalsh(phi.hessian()))
    return np.concatenate(out)


# ---------------------------------------------------------------------------
# JSON


def _parse_scalar(v):
    if isinstance(v, bool):
        raise FormatError("booleans are not coefficients")
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, float):
        return v
    if isinstance(v, str):
        try:
            return Fraction(v.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise FormatError(f"bad rational string {v!r}") from exc
    raise FormatError(f"unsupported coefficient {v!r}")


def form_from_json(obj) -> HermitianForm:
    """Build a form from the JSON object layout; completes Hermitian closure."""
    try:
        N, d, entries = int(obj["N"]), int(obj["d"]), obj["entries"]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"form JSON needs N, d and entries: {exc}") from exc
    B = basis(N, d)
    parsed = {}
    for e in entries:
        try:
            a, b = tuple(int(t) for t in e["alpha"]), tuple(int(t) for t in e["beta"])
            re, im = _parse_scalar(e.get("re", 0)), _parse_scalar(e.get("im", 0))
        except (KeyError, TypeError) as exc:
            raise FormatError(f"bad entry {e!r}") from exc
        if sum(a) != d or sum(b) != d or len(a) != N or len(b) != N:
            raise FormatError(f"entry {a},{b} does not have degree {d} in {N} variables")
        key = (B.index(a), B.index(b))
        if key in parsed:
            raise FormatError(f"duplicate entry {a},{b}")
        parsed[key] = (re, im)
    exact = all(isinstance(v, Fraction) for pair in parsed.values() for v in pair)
    size = len(B)
    C = np.full((size, size), Fraction(0), dtype=object) if exact else np.zeros((size, size), complex)
    for (i, j), (re, im) in parsed.items():
        val = exact_scalar(re, im) if exact else complex(float(re), float(im))
        if i == j and (im != 0):
            raise FormatError(f"diagonal entry {B[i]} must be real")
        mirror = parsed.get((j, i))
        if mirror is not None:
            mval = exact_scalar(*mirror) if exact else complex(float(mirror[0]), float(mirror[1]))
            ok = (mval == val.conjugate()) if exact else abs(mval - np.conj(val)) <= 1e-12 * max(1.0, abs(val))
            if not ok:
                raise FormatError(f"inconsistent Hermitian pair at {B[i]},{B[j]}")
        C[i, j] = val
        if mirror is None:
            C[j, i] = np.conj(val) if not exact else val.conjugate()
    return HermitianForm(N, d, C)


def load_form(path) -> HermitianForm:
    with open(path) as fh:
        text = fh.read()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return form_from_json(obj)


def _scalar_json(x, exact):
    if exact:
        return str(x) if x.denominator != 1 else int(x)
    return float(x)


def form_to_json(f: HermitianForm) -> dict:
    """Upper-triangular nonzero entries; exact values become ``"p/q"`` strings."""
    B = f.basis
    entries = []
    for i in range(len(B)):
        for j in range(i, len(B)):
            v = f.C[i, j]
            if v == 0:
                continue
            if f.exact:
                z = v if isinstance(v, GaussianRational) else GaussianRational(v)
                re, im = _scalar_json(z.re, True), _scalar_json(z.im, True)
            else:
                re, im = float(v.real), float(v.imag)
            entries.append({"alpha": list(B[i]), "beta": list(B[j]), "re": re, "im": im})
    return {"N": f.N, "d": f.d, "entries": entries}


# ---------------------------------------------------------------------------
# sections


@dataclass(frozen=True)
class Section:
    """Holomorphic homogeneous polynomial of degree ``k`` by coefficient vector."""

    N: int
    k: int
    coeffs: tuple

    def __post_init__(self):
        if len(self.coeffs) != len(basis(self.N, self.k)):
            raise DimensionError("coefficient vector length does not match basis")

    @classmethod
    def monomial(cls, N, alpha) -> "Section":
        B = basis(N, sum(alpha))
        c = [Fraction(0)] * len(B)
        c[B.index(alpha)] = Fraction(1)
        return cls(N, sum(alpha), tuple(c))

    @classmethod
    def from_vector(cls, N, k, v) -> "Section":
        return cls(N, k, tuple(v))

    @property
    def vector(self) -> np.ndarray:
        return np.array([complex(c) for c in self.coeffs])

    @property
    def exact(self) -> bool:
        return all(isinstance(c, (int, Fraction, GaussianRational)) for c in self.coeffs)

    def __call__(self, z):
        return monomials(self.N, self.k, z) @ self.vector

    def items(self):
        B = basis(self.N, self.k)
        return [(B[i], c) for i, c in enumerate(self.coeffs) if c != 0]
