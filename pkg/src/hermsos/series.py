"""Truncated power series in chart coordinates ``(z, z̄)``.

A series in ``n`` complex chart variables is a dense complex vector over the
exponent pairs ``(alpha, beta)`` with ``|alpha| + |beta| <= T``.  Holomorphic
chart maps are kept separately as vectors over ``alpha`` alone.  Both live on
the same cached :class:`_Ring` machinery, parametrized by the number of
exponent slots.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .forms import (DENOM_FLOOR, DegenerateInputError, HermitianForm, _compositions,
                    log_hessian, monomials)

DEFAULT_T = 8
TEMPLATE_TOL = 1e-12


class TemplateError(ValueError):
    """A series has nonzero coefficients where the normal form forbids them."""


class SGCS2Violation(ValueError):
    """The Hessian of the diastasis is not positive definite at the base point."""


class ChartRadiusError(ValueError):
    """Evaluation left the region where the chart volume density is positive."""


# ---------------------------------------------------------------------------
# ring tables


class _Ring:
    """Exponent tuples in ``k`` slots with total degree ``<= T`` plus product tables."""

    def __init__(self, k: int, T: int):
        self.k, self.T = k, T
        keys = [e for deg in range(T + 1) for e in _compositions(k, deg)] if k else [()]
        self.keys = keys
        self.exps = np.array(keys, dtype=np.int64).reshape(len(keys), k)
        self.deg = self.exps.sum(axis=1)
        self.size = len(keys)
        self.position = {e: i for i, e in enumerate(keys)}
        # prefix[t] = number of keys of degree <= t (keys are sorted by degree)
        self.prefix = np.searchsorted(self.deg, np.arange(T + 1), side="right")
        self._base = T + 1
        self._codes = self._encode(self.exps)
        self._order = np.argsort(self._codes)
        self._mul = None

    def _encode(self, exps):
        codes = np.zeros(exps.shape[:-1], dtype=np.int64)
        for i in range(self.k):
            codes = codes * self._base + exps[..., i]
        return codes

    def lookup(self, exps) -> np.ndarray:
        codes = self._encode(np.asarray(exps))
        pos = np.searchsorted(self._codes[self._order], codes)
        return self._order[pos]

    @property
    def mul_table(self):
        if self._mul is None:
            I, J, K = [], [], []
            for a in range(self.T + 1):
                rows = np.nonzero(self.deg == a)[0]
                cols = np.arange(self.prefix[self.T - a])
                s = self.exps[rows][:, None, :] + self.exps[cols][None, :, :]
                I.append(np.repeat(rows, len(cols)))
                J.append(np.tile(cols, len(rows)))
                K.append(self.lookup(s).reshape(-1))
            self._mul = tuple(np.concatenate(v) for v in (I, J, K))
        return self._mul

    def mul(self, a, b):
        I, J, K = self.mul_table
        prod = a[I] * b[J]
        return (np.bincount(K, weights=prod.real, minlength=self.size)
                + 1j * np.bincount(K, weights=prod.imag, minlength=self.size))

    @lru_cache(maxsize=None)
    def derivative(self, slot: int):
        """(source, target, factor) for d/d(slot) into the ring of cutoff ``T-1``."""
        src = np.nonzero(self.exps[:, slot] > 0)[0]
        e = self.exps[src].copy()
        e[:, slot] -= 1
        low = ring(self.k, max(self.T - 1, 0))
        return src, low.lookup(e), self.exps[src, slot].astype(float)

    def powers_table(self, w) -> np.ndarray:
        """Values of every monomial at points ``w`` of shape ``(..., k)``."""
        w = np.asarray(w, dtype=complex)
        out = np.ones(w.shape[:-1] + (self.size,), dtype=complex)
        for i in range(self.k):
            top = int(self.exps[:, i].max(initial=0))
            if top == 0:
                continue
            pw = np.ones(w.shape[:-1] + (top + 1,), dtype=complex)
            for p in range(1, top + 1):
                pw[..., p] = pw[..., p - 1] * w[..., i]
            out *= pw[..., self.exps[:, i]]
        return out


@lru_cache(maxsize=None)
def ring(k: int, T: int) -> _Ring:
    return _Ring(k, T)


@lru_cache(maxsize=None)
def _conj_perm(n: int, T: int) -> np.ndarray:
    r = ring(2 * n, T)
    swapped = np.concatenate([r.exps[:, n:], r.exps[:, :n]], axis=1)
    return r.lookup(swapped)


@lru_cache(maxsize=None)
def _hol_embedding(n: int, T: int) -> np.ndarray:
    """Layout positions of the holomorphic keys ``(alpha, 0)``."""
    h = ring(n, T)
    return ring(2 * n, T).lookup(np.concatenate([h.exps, np.zeros_like(h.exps)], axis=1))


@lru_cache(maxsize=None)
def _bilinear_table(n: int, T: int):
    """Pairs (holomorphic alpha, holomorphic beta) with total degree <= T and their layout slot."""
    h = ring(n, T)
    I, J = np.meshgrid(np.arange(h.size), np.arange(h.size), indexing="ij")
    keep = (h.deg[I] + h.deg[J]) <= T
    I, J = I[keep], J[keep]
    K = ring(2 * n, T).lookup(np.concatenate([h.exps[I], h.exps[J]], axis=1))
    return I, J, K


# ---------------------------------------------------------------------------
# series type


class TruncatedSeries:
    """Immutable truncated series ``sum c[alpha, beta] z^alpha z̄^beta``."""

    __slots__ = ("n", "T", "_c")

    def __init__(self, n: int, T: int, coeffs):
        c = np.array(coeffs, dtype=complex)
        r = ring(2 * n, T)
        if c.shape != (r.size,):
            raise ValueError(f"expected {r.size} coefficients for n={n}, T={T}, got {c.shape}")
        c.flags.writeable = False
        self.n, self.T, self._c = n, T, c

    # construction
    @classmethod
    def zero(cls, n, T=DEFAULT_T):
        return cls(n, T, np.zeros(ring(2 * n, T).size))

    @classmethod
    def constant(cls, n, c, T=DEFAULT_T):
        v = np.zeros(ring(2 * n, T).size, dtype=complex)
        v[0] = c
        return cls(n, T, v)

    @classmethod
    def from_dict(cls, n, T, terms: dict):
        r = ring(2 * n, T)
        v = np.zeros(r.size, dtype=complex)
        for (a, b), c in terms.items():
            key = tuple(a) + tuple(b)
            if sum(key) <= T:
                v[r.position[key]] += c
        return cls(n, T, v)

    @classmethod
    def variable(cls, n, i, T=DEFAULT_T, conj=False):
        e = [0] * (2 * n)
        e[i + (n if conj else 0)] = 1
        return cls.from_dict(n, T, {(tuple(e[:n]), tuple(e[n:])): 1.0})

    @classmethod
    def norm_sq(cls, n, T=DEFAULT_T):
        """``|z|^2``."""
        terms = {}
        for i in range(n):
            e = tuple(int(j == i) for j in range(n))
            terms[(e, e)] = 1.0
        return cls.from_dict(n, T, terms)

    @classmethod
    def from_holomorphic(cls, n, T, hol):
        v = np.zeros(ring(2 * n, T).size, dtype=complex)
        hs = ring(n, T).size
        h = np.zeros(hs, dtype=complex)
        src = np.asarray(hol)[:hs]
        h[:len(src)] = src
        v[_hol_embedding(n, T)] = h
        return cls(n, T, v)

    # access
    @property
    def coeffs(self) -> np.ndarray:
        return self._c

    def _ring(self):
        return ring(2 * self.n, self.T)

    def coeff(self, alpha, beta) -> complex:
        key = tuple(alpha) + tuple(beta)
        if sum(key) > self.T:
            raise KeyError(f"{key} exceeds cutoff {self.T}")
        return complex(self._c[self._ring().position[key]])

    def items(self, tol=0.0):
        r, n = self._ring(), self.n
        for i in np.nonzero(np.abs(self._c) > tol)[0]:
            e = r.keys[i]
            yield e[:n], e[n:], complex(self._c[i])

    def to_dict(self, tol=0.0) -> dict:
        return {(a, b): c for a, b, c in self.items(tol)}

    def bidegrees(self):
        r, n = self._ring(), self.n
        return r.exps[:, :n].sum(1), r.exps[:, n:].sum(1)

    def hessian(self) -> np.ndarray:
        """Coefficients of ``z_i z̄_j``."""
        H = np.zeros((self.n, self.n), dtype=complex)
        for i in range(self.n):
            for j in range(self.n):
                a = tuple(int(k == i) for k in range(self.n))
                b = tuple(int(k == j) for k in range(self.n))
                H[i, j] = self.coeff(a, b)
        return H

    # arithmetic
    def _align(self, other):
        if isinstance(other, TruncatedSeries):
            if other.n != self.n:
                raise ValueError("chart dimensions differ")
            T = min(self.T, other.T)
            return T, self.truncate(T)._c, other.truncate(T)._c
        return None

    def truncate(self, T: int) -> "TruncatedSeries":
        if T >= self.T:
            return self
        return TruncatedSeries(self.n, T, self._c[:ring(2 * self.n, T).size])

    def __add__(self, other):
        al = self._align(other)
        if al is None:
            v = self._c.copy()
            v[0] += other
            return TruncatedSeries(self.n, self.T, v)
        T, a, b = al
        return TruncatedSeries(self.n, T, a + b)

    __radd__ = __add__

    def __neg__(self):
        return TruncatedSeries(self.n, self.T, -self._c)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        al = self._align(other)
        if al is None:
            return TruncatedSeries(self.n, self.T, self._c * other)
        T, a, b = al
        return TruncatedSeries(self.n, T, ring(2 * self.n, T).mul(a, b))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, TruncatedSeries):
            return self * other.reciprocal()
        return TruncatedSeries(self.n, self.T, self._c / other)

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, k: int):
        if k < 0:
            return self.reciprocal() ** (-k)
        out = TruncatedSeries.constant(self.n, 1.0, self.T)
        base = self
        while k:
            if k & 1:
                out = out * base
            k >>= 1
            if k:
                base = base * base
        return out

    def _unit_split(self, what):
        c0 = self._c[0]
        if abs(c0) < DENOM_FLOOR:
            raise ZeroDivisionError(f"{what} of a series with zero constant term")
        u = self / c0 - 1.0
        return c0, u

    def reciprocal(self) -> "TruncatedSeries":
        c0, u = self._unit_split("reciprocal")
        # 1/(1+u) = 1 - u + u^2 - ..., Horner in u; u has no constant term
        r = TruncatedSeries.constant(self.n, 1.0, self.T)
        for _ in range(self.T):
            r = 1.0 - u * r
        return r / c0

    def log(self) -> "TruncatedSeries":
        if abs(self._c[0] - 1.0) > 1e-12:
            raise ValueError("log requires constant term 1; normalize first")
        u = self - 1.0
        r = TruncatedSeries.zero(self.n, self.T)
        for k in range(self.T, 0, -1):
            r = (1.0 / k) - u * r
        return u * r

    def exp(self) -> "TruncatedSeries":
        c0 = self._c[0]
        u = self - c0
        r = TruncatedSeries.constant(self.n, 1.0, self.T)
        for k in range(self.T, 0, -1):
            r = 1.0 + u * r / k
        return r * np.exp(c0)

    def conj(self) -> "TruncatedSeries":
        return TruncatedSeries(self.n, self.T, np.conj(self._c[_conj_perm(self.n, self.T)]))

    def reality_defect(self) -> float:
        return float(np.max(np.abs(self._c - self.conj()._c)))

    def d_hol(self, i: int) -> "TruncatedSeries":
        return self._deriv(i)

    def d_antihol(self, j: int) -> "TruncatedSeries":
        return self._deriv(self.n + j)

    def _deriv(self, slot):
        r = self._ring()
        low_T = max(self.T - 1, 0)
        out = np.zeros(ring(2 * self.n, low_T).size, dtype=complex)
        if self.T == 0:
            return TruncatedSeries(self.n, 0, out)
        src, dst, fac = r.derivative(slot)
        out[dst] = self._c[src] * fac
        return TruncatedSeries(self.n, low_T, out)

    def filter(self, keep: Callable[[int, int], bool]) -> "TruncatedSeries":
        """Keep terms whose bidegree ``(|alpha|, |beta|)`` satisfies ``keep``."""
        a, b = self.bidegrees()
        mask = np.array([keep(int(p), int(q)) for p, q in zip(a, b)])
        return TruncatedSeries(self.n, self.T, np.where(mask, self._c, 0))

    def is_holomorphic(self, tol=0.0) -> bool:
        _, b = self.bidegrees()
        return bool(np.all(np.abs(self._c[b > 0]) <= tol))

    def is_quasi_diagonal(self, tol=TEMPLATE_TOL) -> bool:
        a, b = self.bidegrees()
        return bool(np.all(np.abs(self._c[a != b]) <= tol))

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        if z.shape[-1] != self.n:
            raise ValueError(f"expected points with {self.n} coordinates")
        w = np.concatenate([z, z.conj()], axis=-1)
        return self._ring().powers_table(w) @ self._c

    def allclose(self, other, atol=1e-12) -> bool:
        T = min(self.T, other.T)
        return bool(np.allclose(self.truncate(T)._c, other.truncate(T)._c, atol=atol, rtol=0))

    def dumps(self, tol=0.0) -> str:
        """``alpha beta re im`` lines in graded-lex order."""
        lines = []
        for a, b, c in self.items(tol):
            lines.append(f"{','.join(map(str, a))} {','.join(map(str, b))} {c.real + 0.0:.17g} {c.imag + 0.0:.17g}")
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def loads(cls, text: str, n: int, T: int) -> "TruncatedSeries":
        terms = {}
        for line in text.splitlines():
            if not line.strip():
                continue
            a, b, re, im = line.split()
            terms[(tuple(int(x) for x in a.split(",")), tuple(int(x) for x in b.split(",")))] = \
                complex(float(re), float(im))
        return cls.from_dict(n, T, terms)

    def __repr__(self):
        return f"TruncatedSeries(n={self.n}, T={self.T}, nnz={int(np.count_nonzero(self._c))})"


# ---------------------------------------------------------------------------
# holomorphic polynomial maps (vectors over ring(n, T))


def _hol_mul(n, T, a, b):
    return ring(n, T).mul(a, b)


def _hol_substitute(n: int, T: int, h: np.ndarray, v: list) -> np.ndarray:
    """``h(v(z))`` for a holomorphic polynomial ``h`` and maps ``v`` without constant term."""
    r = ring(n, T)
    out = np.zeros(r.size, dtype=complex)
    cache = {(0,) * n: np.eye(1, r.size, 0, dtype=complex)[0]}
    for idx in np.nonzero(h)[0]:
        e = r.keys[idx]
        out += h[idx] * _hol_monomial(r, e, v, cache)
    return out


def _hol_monomial(r, e, v, cache):
    if e in cache:
        return cache[e]
    k = next(i for i, x in enumerate(e) if x > 0)
    prev = list(e)
    prev[k] -= 1
    val = r.mul(_hol_monomial(r, tuple(prev), v, cache), v[k])
    cache[e] = val
    return val


def _hol_derivative(n: int, T: int, h: np.ndarray, j: int) -> np.ndarray:
    src, dst, fac = ring(n, T).derivative(j)
    out = np.zeros(ring(n, max(T - 1, 0)).size, dtype=complex)
    out[dst] = h[src] * fac
    return out


def ipow(values, m: int):
    """Elementwise ``values**m`` by binary exponentiation."""
    values = np.asarray(values)
    out = np.ones_like(values)
    base = values.copy()
    while m:
        if m & 1:
            out = out * base
        m >>= 1
        if m:
            base = base * base
    return out


# ---------------------------------------------------------------------------
# chart points


@dataclass(frozen=True, eq=False)
class ChartPoint:
    """Base point, affine chart and holomorphic frame at that point.

    Chart coordinates ``z`` map to the homogeneous point
    ``base + E_c @ frame @ (z + correction(z))``, where ``E_c`` injects the
    ``n`` affine directions (all coordinates except ``chart``) and
    ``correction`` collects holomorphic terms of degree two and higher.
    """

    base: np.ndarray
    chart: int
    frame: np.ndarray
    correction: np.ndarray | None = None
    correction_T: int = 0

    def __post_init__(self):
        b = np.asarray(self.base, dtype=complex).reshape(-1)
        if abs(b[self.chart]) < 1e-300:
            raise DegenerateInputError("base point vanishes in the selected chart coordinate")
        b = b / b[self.chart]
        F = np.asarray(self.frame, dtype=complex).reshape(b.size - 1, b.size - 1)
        if b.size > 1 and abs(np.linalg.det(F)) < 1e-14 * max(1.0, np.linalg.norm(F)) ** F.shape[0]:
            raise ValueError("frame is not invertible")
        object.__setattr__(self, "base", b)
        object.__setattr__(self, "frame", F)

    @classmethod
    def affine(cls, base, chart: int | None = None) -> "ChartPoint":
        b = np.asarray(base, dtype=complex).reshape(-1)
        c = int(np.argmax(np.abs(b))) if chart is None else chart
        return cls(b, c, np.eye(b.size - 1, dtype=complex))

    @property
    def N(self) -> int:
        return self.base.size

    @property
    def n(self) -> int:
        return self.base.size - 1

    @property
    def embedding(self) -> np.ndarray:
        """``E_c``: ``N x n`` injection of the affine offsets."""
        E = np.zeros((self.N, self.n), dtype=complex)
        E[[i for i in range(self.N) if i != self.chart], np.arange(self.n)] = 1
        return E

    @property
    def offsets(self) -> np.ndarray:
        return self.embedding @ self.frame

    def with_frame(self, frame) -> "ChartPoint":
        return ChartPoint(self.base, self.chart, frame)

    def _hol_coords(self, T: int) -> list:
        """Holomorphic series of ``z + correction(z)`` over ring(n, T)."""
        r = ring(self.n, T)
        out = []
        for j in range(self.n):
            v = np.zeros(r.size, dtype=complex)
            e = tuple(int(k == j) for k in range(self.n))
            v[r.position[e]] = 1.0
            if self.correction is not None:
                cr = ring(self.n, self.correction_T)
                m = min(r.size, cr.size)
                v[:m] += self.correction[j][:m]
            out.append(v)
        return out

    def _check_order(self, T):
        if self.correction is not None and T > self.correction_T + 1:
            raise ValueError(f"chart map known to degree {self.correction_T}; cannot expand to {T}")

    def coordinates(self, z) -> np.ndarray:
        """``z + correction(z)`` at points of shape ``(..., n)``."""
        z = np.asarray(z, dtype=complex)
        if self.correction is None:
            return z
        P = ring(self.n, self.correction_T).powers_table(z)
        return z + P @ self.correction.T

    def point(self, z) -> np.ndarray:
        """Homogeneous representative of the chart point ``z``."""
        v = self.coordinates(z)
        return self.base + v @ self.offsets.T

    def jacobian(self, z) -> np.ndarray:
        """``d point / d z`` of shape ``(..., N, n)``."""
        z = np.asarray(z, dtype=complex)
        D = np.broadcast_to(np.eye(self.n, dtype=complex), z.shape[:-1] + (self.n, self.n)).copy()
        if self.correction is not None:
            low = ring(self.n, max(self.correction_T - 1, 0))
            P = low.powers_table(z)
            for j in range(self.n):
                for i in range(self.n):
                    D[..., i, j] += P @ _hol_derivative(self.n, self.correction_T, self.correction[i], j)
        return np.einsum("ki,...ij->...kj", self.offsets, D)

    def volume_density(self, R: HermitianForm, z) -> np.ndarray:
        """Chart density ``det(d dbar log R)`` at chart points ``z``, given by closed form."""
        y = self.point(z)
        G = log_hessian(R, y)
        J = self.jacobian(z)
        M = np.einsum("...ki,...kl,...lj->...ij", J, G, J.conj())
        return np.linalg.det(M).real


# ---------------------------------------------------------------------------
# expansions


def _chart_holomorphic_coords(x: ChartPoint, T: int) -> np.ndarray:
    """``y_k(z)`` for k = 0..N-1 as holomorphic vectors over ring(n, T); shape (N, size)."""
    x._check_order(T)
    r = ring(x.n, T)
    v = x._hol_coords(T)
    Y = np.zeros((x.N, r.size), dtype=complex)
    Y[:, 0] = x.base
    Y += x.offsets @ np.array(v)
    return Y


def _section_powers(x: ChartPoint, d: int, T: int) -> np.ndarray:
    """``y(z)^gamma`` for gamma over basis(N, d) as holomorphic vectors."""
    from .forms import basis

    r = ring(x.n, T)
    Y = _chart_holomorphic_coords(x, T)
    B = basis(x.N, d)
    out = np.zeros((len(B), r.size), dtype=complex)
    cache = {(0,) * x.N: np.eye(1, r.size, 0, dtype=complex)[0]}

    def mono(g):
        if g in cache:
            return cache[g]
        k = next(i for i, e in enumerate(g) if e > 0)
        prev = list(g)
        prev[k] -= 1
        val = r.mul(mono(tuple(prev)), Y[k])
        cache[g] = val
        return val

    for i, g in enumerate(B):
        out[i] = mono(g)
    return out


def restrict_psi(f: HermitianForm, x: ChartPoint, T: int = DEFAULT_T) -> TruncatedSeries:
    """Taylor series in ``z`` of ``Psi_f(x, y(z))``; constant term 1."""
    if f.N != x.N:
        raise ValueError("form and chart point live on different spaces")
    n = x.n
    C = f.C.astype(complex)
    Yh = _section_powers(x, f.d, T)
    mx = monomials(f.N, f.d, x.base)
    fxx = float((mx @ C @ mx.conj()).real)
    if abs(fxx) < DENOM_FLOOR:
        raise DegenerateInputError("base point lies on the zero set of f")
    hol_vec = Yh.T @ (C @ mx.conj())             # f(y(z), x̄)
    if abs(hol_vec[0]) < DENOM_FLOOR:
        raise DegenerateInputError("base point lies on the zero set of f(., x̄)")
    hol = TruncatedSeries.from_holomorphic(n, T, hol_vec)
    I, J, K = _bilinear_table(n, T)
    M = Yh.T @ C @ Yh.conj()                     # f(y, ȳ) coefficient block
    full = np.zeros(ring(2 * n, T).size, dtype=complex)
    np.add.at(full, K, M[I, J])
    fyy = TruncatedSeries(n, T, full)
    return (hol * hol.conj()) / (fxx * fxx) * (fyy / fxx).reciprocal()


def diastasis(psi_R: TruncatedSeries) -> TruncatedSeries:
    return -psi_R.log()


def bochner_coordinate_map(phi: TruncatedSeries) -> list:
    """Holomorphic series ``z_j(v) = dPhi/dv̄_j`` at ``v̄ = 0``; cutoff ``T-1``."""
    n, T = phi.n, phi.T
    h = ring(n, T - 1)
    out = []
    for j in range(n):
        e = tuple(int(k == j) for k in range(n))
        v = np.zeros(h.size, dtype=complex)
        for i, a in enumerate(h.keys):
            v[i] = phi.coeff(a, e)
        out.append(v)
    return out


def _invert_hol_map(n: int, T: int, zmap: list) -> list:
    """Inverse of a holomorphic map tangent to the identity, to degree ``T``."""
    r = ring(n, T)
    ident = []
    for j in range(n):
        v = np.zeros(r.size, dtype=complex)
        v[r.position[tuple(int(k == j) for k in range(n))]] = 1.0
        ident.append(v)
    higher = [zmap[j] - ident[j] for j in range(n)]
    for h in higher:
        h[r.deg <= 1] = 0.0
    v = [x.copy() for x in ident]
    for _ in range(T):
        v = [ident[j] - _hol_substitute(n, T, higher[j], v) for j in range(n)]
    return v


def chart_hessian(R: HermitianForm, x: ChartPoint) -> np.ndarray:
    """Hessian of the diastasis at the base point in the chart's (linear) frame."""
    return diastasis(restrict_psi(R, ChartPoint(x.base, x.chart, x.frame), 2)).hessian()


def normal_frame(H) -> np.ndarray:
    """Frame ``F`` with ``F^T H F̄ = I``, from the Cholesky factor of ``H^T``."""
    H = 0.5 * (np.asarray(H) + np.asarray(H).conj().T)
    G = np.linalg.cholesky(H.T)
    return np.linalg.inv(G).conj().T


def bochner_normalize(R: HermitianForm, base, T: int = DEFAULT_T, chart: int | None = None,
                      check: bool = True) -> ChartPoint:
    """Chart point at ``base`` whose coordinates are Bochner coordinates for ``R``.

    The linear part normalizes the diastasis Hessian via a positive-diagonal
    Cholesky factor.  The nonlinear part comes from the closed-form Bochner
    coordinates ``z_j = dPhi/dv̄_j (v, 0)``, inverted as a holomorphic series.
    """
    x0 = ChartPoint.affine(base, chart)
    H = chart_hessian(R, x0)
    eig = np.linalg.eigvalsh(0.5 * (H + H.conj().T))
    if eig[0] <= 1e-12 * max(1.0, eig[-1]):
        raise SGCS2Violation(f"diastasis Hessian not positive definite at base (min eig {eig[0]:.3e})")
    x1 = x0.with_frame(normal_frame(H))
    phi1 = diastasis(restrict_psi(R, x1, T))
    zmap = bochner_coordinate_map(phi1)
    inv = _invert_hol_map(x1.n, T - 1, zmap)
    r = ring(x1.n, T - 1)
    corr = np.array(inv)
    corr[:, r.deg <= 1] = 0.0
    out = ChartPoint(x1.base, x1.chart, x1.frame, corr, T - 1)
    if check:
        defect = bochner_defect(diastasis(restrict_psi(R, out, T)))
        if defect > 1e-8:
            raise TemplateError(f"normalization left forbidden terms of size {defect:.3e}")
    return out


def bochner_defect(phi: TruncatedSeries) -> float:
    """Largest coefficient of ``phi - |z|^2`` with ``|alpha| <= 1`` or ``|beta| <= 1``."""
    a, b = phi.bidegrees()
    d = phi.coeffs - TruncatedSeries.norm_sq(phi.n, phi.T).coeffs
    mask = (a <= 1) | (b <= 1)
    return float(np.max(np.abs(d[mask]), initial=0.0))


def metric_series(phi: TruncatedSeries):
    """``omega_ij = d_i dbar_j phi`` (cutoff ``T-2``) and its determinant."""
    n = phi.n
    omega = [[phi.d_hol(i).d_antihol(j) for j in range(n)] for i in range(n)]
    return omega, _det(omega)


def _det(M):
    n = len(M)
    if n == 1:
        return M[0][0]
    out = None
    for j in range(n):
        minor = [row[:j] + row[j + 1:] for row in M[1:]]
        term = M[0][j] * _det(minor)
        out = term if out is None else (out + term if j % 2 == 0 else out - term)
    return out


@dataclass(frozen=True)
class Truncations:
    psi_R4: TruncatedSeries
    omega2: TruncatedSeries
    psi_P2: TruncatedSeries


def _check_template(s: TruncatedSeries, allowed: Callable[[int, int], bool], name: str, tol: float):
    a, b = s.bidegrees()
    mask = np.array([not allowed(int(p), int(q)) for p, q in zip(a, b)])
    bad = np.abs(s.coeffs[mask]) if mask.any() else np.zeros(1)
    if np.max(bad, initial=0.0) > tol:
        raise TemplateError(f"{name}: forbidden coefficient of size {np.max(bad):.3e}")


def truncations(psi_R: TruncatedSeries, omega: TruncatedSeries, psi_P: TruncatedSeries,
                tol: float = TEMPLATE_TOL) -> Truncations:
    """Low-order quasi-diagonal parts of the three normalized expansions."""
    n = psi_R.n
    ident = TruncatedSeries.norm_sq(n, psi_R.T)
    for s, name in ((psi_R, "psi_R"), (omega, "Omega"), (psi_P, "psi_P")):
        if abs(s.coeffs[0] - 1.0) > tol:
            raise TemplateError(f"{name}: constant term {s.coeffs[0]} is not 1")
    _check_template(psi_R + ident, lambda p, q: (p, q) == (0, 0) or (p >= 2 and q >= 2), "psi_R", tol)
    _check_template(omega, lambda p, q: (p, q) == (0, 0) or (p >= 1 and q >= 1), "Omega", tol)
    _check_template(psi_P, lambda p, q: (p, q) == (0, 0) or (p >= 1 and q >= 1), "psi_P", tol)
    r4 = psi_R.filter(lambda p, q: p == q and p <= 2).truncate(4)
    o2 = omega.filter(lambda p, q: p == q and p <= 1).truncate(2)
    p2 = psi_P.filter(lambda p, q: p == q and p <= 1).truncate(2)
    return Truncations(r4, o2, p2)


@dataclass(frozen=True)
class ApproximantData:
    trunc: Truncations
    omega: Callable | TruncatedSeries   # chart volume density, closed form preferred


def approximant(m: int, data: ApproximantData) -> Callable:
    """Function of chart points ``z`` returning ``Psi_R4^m Psi_P2 Omega2 / Omega``."""
    if m < 0:
        raise ValueError("m must be non-negative")
    t = data.trunc

    def T_m(z):
        z = np.asarray(z, dtype=complex)
        om = np.asarray(data.omega(z)).real
        if np.any(om <= 0):
            raise ChartRadiusError("chart volume density is not positive at an evaluation point")
        return ipow(t.psi_R4(z), m) * t.psi_P2(z) * t.omega2(z) / om

    return T_m


def normalized_data(R: HermitianForm, P: HermitianForm, base, T: int = DEFAULT_T):
    """Bochner chart at ``base`` plus the full and truncated expansions."""
    x = bochner_normalize(R, base, T)
    psi_R = restrict_psi(R, x, T)
    phi = diastasis(psi_R)
    _, omega = metric_series(phi)
    psi_P = restrict_psi(P, x, T)
    return x, psi_R, omega, psi_P, truncations(psi_R, omega, psi_P)
