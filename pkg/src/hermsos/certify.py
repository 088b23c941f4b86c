"""Positivity on the sphere, PSD tests, minimal norm-power search and square extraction."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .forms import (HermitianForm, Section, basis, eval_form, fubini_study, monomial_gradients,
                    monomials, multiply, norm_power, sample_sphere)

PSD_TOL = 1e-9
RANK_TOL = 1e-9
ELL_MAX = 64


class HypothesisViolation(ValueError):
    """The form is not strictly positive on the sphere."""

    def __init__(self, msg, value, witness):
        super().__init__(msg)
        self.value, self.witness = value, witness


class SearchExhausted(RuntimeError):
    def __init__(self, ell_max, trajectory):
        super().__init__(f"no sum-of-squares certificate with ell <= {ell_max}")
        self.ell_max, self.trajectory = ell_max, trajectory


class NotPSD(ValueError):
    pass


@dataclass
class Certificate:
    ell: int
    squares: list
    min_eig: float
    residual: float = float("nan")
    product: HermitianForm | None = field(default=None, repr=False)

    def to_json(self) -> dict:
        return {
            "ell": self.ell,
            "min_eig": float(self.min_eig),
            "squares": [{"k": g.k, "coeffs": [[float(complex(c).real), float(complex(c).imag)]
                                              for c in g.coeffs]} for g in self.squares],
            "residual": float(self.residual),
        }

    @classmethod
    def from_json(cls, obj, N: int) -> "Certificate":
        sq = [Section(N, int(s["k"]), tuple(complex(a, b) for a, b in s["coeffs"])) for s in obj["squares"]]
        return cls(int(obj["ell"]), sq, float(obj["min_eig"]), float(obj["residual"]))


def _values_and_grad(C, N, d, z):
    m = monomials(N, d, z)
    dm = monomial_gradients(N, d, z)
    Cm = m.conj() @ C.T                         # (C conj m)_a
    val = np.einsum("...a,...a->...", m, Cm).real
    # d f / d z̄_k = m^T C conj(dm_k); the ascent direction in C^N is its conjugate times 2
    g = np.einsum("...a,ab,...kb->...k", m, C, dm.conj())
    return val, 2.0 * g.conj()


def sphere_min(f: HermitianForm, grid_density: int | None = None, refinement_steps: int = 50,
               seed: int = 0, starts: int = 16):
    """Sampled minimum of ``f(z, z̄)`` on the unit sphere, refined by projected gradient descent."""
    N, d = f.N, f.d
    C = f.C.astype(complex)
    rng = np.random.default_rng(seed)
    count = grid_density if grid_density is not None else 10_000 * N
    pts = sample_sphere(rng, count, N)
    vals = eval_form(f.to_float(), pts, pts).real
    order = np.argsort(vals)[:starts]
    z, v = pts[order].copy(), vals[order].copy()
    step = np.full(len(z), 0.5)
    for _ in range(refinement_steps):
        _, g = _values_and_grad(C, N, d, z)
        g = g - np.sum(g * z.conj(), axis=-1, keepdims=True).real * z   # drop the radial part
        g = g - 1j * np.sum(g * (1j * z).conj(), axis=-1, keepdims=True).real * z  # and the phase
        gn = np.sum(np.abs(g) ** 2, axis=-1)
        t = step * 2.0
        accepted = np.zeros(len(z), bool)
        for _ in range(30):
            trial = z - t[:, None] * g
            trial /= np.linalg.norm(trial, axis=-1, keepdims=True)
            tv, _ = _values_and_grad(C, N, d, trial)
            ok = (tv <= v - 1e-4 * t * gn) & ~accepted
            z[ok], v[ok], step[ok] = trial[ok], tv[ok], t[ok]
            accepted |= ok
            if accepted.all():
                break
            t = np.where(accepted, t, t * 0.5)
    k = int(np.argmin(v))
    return float(v[k]), z[k]


def psd_check(f: HermitianForm, tol: float = PSD_TOL):
    """``(is_psd, min_eig)`` with the threshold relative to the spectral norm."""
    if f.exact and _is_diagonal(f.C):
        diag = [f.C[i, i] for i in range(f.C.shape[0])]
        lo = min(diag)
        scale = max(1.0, float(max(abs(x) for x in diag)))
        return bool(lo >= 0 or float(lo) >= -tol * scale), float(lo)
    C = f.C.astype(complex)
    if not np.all(np.isfinite(C)):
        raise ValueError("coefficient matrix has non-finite entries")
    eig = np.linalg.eigvalsh(0.5 * (C + C.conj().T))
    scale = max(1.0, float(np.max(np.abs(eig))))
    return bool(eig[0] >= -tol * scale), float(eig[0])


def _is_diagonal(C) -> bool:
    off = C.copy()
    for i in range(C.shape[0]):
        off[i, i] = 0
    return not any(bool(x) for x in off.flat)


def positivity_margin(f: HermitianForm, tol: float = PSD_TOL, seed: int = 0):
    """Sphere minimum and whether it clears ``tol`` times the coefficient scale."""
    value, witness = sphere_min(f, seed=seed)
    scale = max(1.0, float(np.max(np.abs(f.C.astype(complex)))))
    return value, witness, value > tol * scale


def minimal_power(f: HermitianForm, ell_max: int = ELL_MAX, tol: float = PSD_TOL,
                  rank_tol: float = RANK_TOL, seed: int = 0, verify: bool = True) -> Certificate:
    """Smallest ``ell`` with ``|z|^(2 ell) f`` a sum of Hermitian squares, with the squares."""
    value, witness, ok = positivity_margin(f, tol, seed)
    if not ok:
        raise HypothesisViolation(f"form is not positive on the sphere (min {value:.3e})", value, witness)
    fs = fubini_study(f.N) if f.exact else fubini_study(f.N).to_float()
    g = f
    trajectory = []
    for ell in range(ell_max + 1):
        if ell:
            g = multiply(fs, g)
        is_psd, lo = psd_check(g, tol)
        trajectory.append(lo)
        if is_psd:
            cert = Certificate(ell, extract_squares(g, rank_tol, tol), lo, product=g)
            if verify:
                cert.residual = verify_certificate(f, cert, seed=seed)
            return cert
    raise SearchExhausted(ell_max, trajectory)


def extract_squares(f_psd: HermitianForm, rank_tol: float = RANK_TOL, psd_tol: float = PSD_TOL) -> list:
    """Sections ``g_j`` with ``f = sum |g_j|^2``; one per retained eigenvalue."""
    is_psd, lo = psd_check(f_psd, psd_tol)
    if not is_psd:
        raise NotPSD(f"matrix is not positive semi-definite (min eig {lo:.3e})")
    C = f_psd.C.astype(complex)
    exact_diag = f_psd.exact and _is_diagonal(f_psd.C)
    if exact_diag or not np.any(C - np.diag(np.diag(C))):
        lam = np.diag(C).real
        vecs = np.eye(len(lam), dtype=complex)
        order = np.arange(len(lam))
    else:
        lam, vecs = np.linalg.eigh(0.5 * (C + C.conj().T))
        order = np.argsort(-lam, kind="stable")
    top = float(np.max(lam)) if lam.size else 0.0
    out = []
    for j in order:
        # exact diagonal data has an exact rank; only float data needs the relative cut
        if lam[j] <= 0 or (not exact_diag and lam[j] <= rank_tol * top):
            continue
        u = vecs[:, j]
        k = int(np.argmax(np.abs(u)))
        u = u * (abs(u[k]) / u[k])
        out.append(Section(f_psd.N, f_psd.d, tuple(np.sqrt(lam[j]) * u)))
    return out


def sum_of_squares(squares, z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    out = np.zeros(z.shape[:-1])
    for g in squares:
        out = out + np.abs(g(z)) ** 2
    return out


def verify_certificate(f: HermitianForm, cert: Certificate, num_samples: int = 1000, seed: int = 0) -> float:
    """Max sampled ``| |z|^(2 ell) f - sum |g_j|^2 |`` on the unit sphere.

    Squares whose degree is not ``f.d + ell`` make the identity meaningless
    off the sphere, so such certificates get an infinite residual.
    """
    if any(g.k != f.d + cert.ell or g.N != f.N for g in cert.squares):
        return float("inf")
    rng = np.random.default_rng(seed)
    z = sample_sphere(rng, num_samples, f.N)
    lhs = eval_form(f.to_float(), z, z).real
    rhs = sum_of_squares(cert.squares, z)
    return float(np.max(np.abs(lhs - rhs)))


def sos_monotone(f: HermitianForm, ell: int, extra: int = 3, tol: float = PSD_TOL) -> list:
    """PSD verdicts for ``|z|^(2k) f`` with ``k = ell .. ell + extra``."""
    g = multiply(norm_power(ell, f.N) if f.exact else norm_power(ell, f.N).to_float(), f)
    fs = fubini_study(f.N) if f.exact else fubini_study(f.N).to_float()
    out = []
    for k in range(extra + 1):
        if k:
            g = multiply(fs, g)
        out.append(psd_check(g, tol)[0])
    return out


def lambda_family(lam, N: int = 2) -> HermitianForm:
    """``|z1|^4 + |z2|^4 - lam |z1 z2|^2``."""
    lam = Fraction(lam) if not isinstance(lam, float) else Fraction(str(lam))
    B = basis(2, 2)
    C = np.full((3, 3), Fraction(0), dtype=object)
    C[B.index((2, 0)), B.index((2, 0))] = Fraction(1)
    C[B.index((0, 2)), B.index((0, 2))] = Fraction(1)
    C[B.index((1, 1)), B.index((1, 1))] = -lam
    return HermitianForm(2, 2, C)
