"""Quadrature laboratory on P^1: operator values, Bochner geometry, the ball/complement split.

P^1 is covered by two closed affine disks ``|w| <= 1`` (``y = (1, w)`` and
``y = (w, 1)``) that meet only along ``|y_0| = |y_1|``.  Each disk carries a
polar rule: Gauss-Legendre in the radius and the equispaced periodic rule in
the angle, which is exact for angular harmonics below the node count.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np

from .forms import (DegenerateInputError, HermitianForm, Section, cauchy_schwarz, eval_form,
                    fubini_study, log_hessian, monomial_gradients, monomials, multiply, norm_power, power,
                    sample_sphere)
from .projective import (ExactScalar, OperatorSetup, _equals_exact, _hermitian_value, gram_matrix,
                         operator_matrix)
from .series import (ApproximantData, ChartPoint, ChartRadiusError, TruncatedSeries, approximant,
                     diastasis, ipow, metric_series, normal_frame, normalized_data, restrict_psi,
                     truncations)


class QuadratureError(RuntimeError):
    def __init__(self, msg, values):
        super().__init__(msg)
        self.values = values


class InfeasibleRadius(ValueError):
    def __init__(self, msg, m0):
        super().__init__(msg)
        self.m0 = m0


# ---------------------------------------------------------------------------
# grids


def polar_rule(r_max: float, radial: int, angular: int):
    """Nodes and Lebesgue weights for the disk ``|w| <= r_max``."""
    x, wx = np.polynomial.legendre.leggauss(radial)
    r = 0.5 * r_max * (x + 1.0)
    wr = 0.5 * r_max * wx * r
    theta = 2.0 * np.pi * np.arange(angular) / angular
    nodes = (r[:, None] * np.exp(1j * theta)[None, :]).reshape(-1)
    weights = np.repeat(wr, angular) * (2.0 * np.pi / angular)
    return nodes, weights


@dataclass(frozen=True)
class QuadratureGrid:
    chart_order: int = 96
    angular_order: int | None = None
    split_radius: float = 1.0

    def __post_init__(self):
        if self.chart_order < 16 or (self.angular_order is not None and self.angular_order < 16):
            raise ValueError("node count per direction must be at least 16")

    @property
    def angular(self) -> int:
        return self.angular_order or self.chart_order

    @cached_property
    def charts(self):
        """``[(y, area_weight)]`` per chart, ``y`` with the chart coordinate equal to 1."""
        out = []
        for c, rad in ((0, self.split_radius), (1, 1.0 / self.split_radius)):
            w, a = polar_rule(rad, self.chart_order, self.angular)
            y = np.stack([np.ones_like(w), w], axis=-1) if c == 0 else np.stack([w, np.ones_like(w)], axis=-1)
            out.append((c, y, a))
        return out

    def measure(self, R: HermitianForm):
        """Unit representatives and weights ``area * Omega`` for the volume form of ``R``."""
        pts, wts = [], []
        for c, y, a in self.charts:
            G = log_hessian(R.to_float(), y)
            k = 1 - c
            dens = G[:, k, k].real
            pts.append(y / np.linalg.norm(y, axis=-1, keepdims=True))
            wts.append(a * dens)
        return np.concatenate(pts), np.concatenate(wts)

    def refined(self, extra: int = 32) -> "QuadratureGrid":
        ang = None if self.angular_order is None else self.angular_order + extra
        return QuadratureGrid(self.chart_order + extra, ang, self.split_radius)


def eval_section(s: Section, y) -> np.ndarray:
    """Section values; sparse binary powers for few terms, homogeneous Horner for dense N = 2."""
    y = np.asarray(y, dtype=complex)
    terms = list(s.items())
    if s.N == 2 and len(terms) > 3:
        c = np.zeros(s.k + 1, dtype=complex)
        for alpha, v in terms:
            c[alpha[1]] = complex(v)
        return _horner_p1(c, y[..., 0], y[..., 1])
    out = np.zeros(y.shape[:-1], dtype=complex)
    for alpha, c in terms:
        term = np.full(y.shape[:-1], complex(c))
        for k, a in enumerate(alpha):
            if a:
                term = term * ipow(y[..., k], a)
        out = out + term
    return out


def _horner_p1(c, u, v):
    """``sum_j c_j u^(D-j) v^j``; the larger coordinate is factored out so the ratio has modulus <= 1."""
    D = len(c) - 1
    out = np.empty(np.broadcast(u, v).shape, dtype=complex)
    first = np.abs(u) >= np.abs(v)
    for mask, lead, other, coeffs in ((first, u, v, c[::-1]), (~first, v, u, c)):
        a, b = lead[mask], other[mask]
        if a.size == 0:
            continue
        w = b / a
        q = np.full(a.shape, coeffs[0])
        for cj in coeffs[1:]:
            q *= w
            q += cj
        out[mask] = q * ipow(a, D)
    return out


def _pair_values(f: HermitianForm, x, y):
    """``f(x, ȳ)`` for broadcastable arrays of points."""
    C = f.C.astype(complex)
    mx = monomials(f.N, f.d, x)
    my = monomials(f.N, f.d, y)
    return np.einsum("...a,ab,...b->...", mx, C, my.conj())


# ---------------------------------------------------------------------------
# operator values


def _q_data(R, P, m):
    return R.to_float(), P.to_float(), m


def k_numeric(R: HermitianForm, P: HermitianForm, m: int, s: Section, t: Section | None = None,
              grid: QuadratureGrid | None = None, method: str = "factorized",
              check: bool = False, tol: float = 1e-8):
    """``K(s, t)`` for ``Q = R^m P`` by tensor quadrature over P^1 x P^1.

    ``direct`` evaluates the double sum node by node.  ``factorized`` rewrites
    the same sum through ``Q(x, ȳ) = m(x)^T C conj(m(y))``, which separates the
    two node sums; both apply the identical product rule.
    """
    grid = grid or QuadratureGrid()
    t = s if t is None else t
    val = _k_numeric(R, P, m, s, t, grid, method)
    if check:
        fine = _k_numeric(R, P, m, s, t, grid.refined(), method)
        if abs(fine - val) > tol * max(abs(fine), 1e-300):
            raise QuadratureError(f"quadrature orders disagree: {val!r} vs {fine!r}", (val, fine))
    return val


def _k_numeric(R, P, m, s, t, grid, method):
    R, P = R.to_float(), P.to_float()
    if R.N != 2:
        raise ValueError("the quadrature laboratory works on P^1 (N = 2)")
    pts, wts = grid.measure(R)
    Rxx = _pair_values(R, pts, pts).real
    Pxx = _pair_values(P, pts, pts).real
    Qxx = ipow(Rxx, m) * Pxx
    sy = wts * eval_section(s, pts) / Qxx
    tx = wts * np.conj(eval_section(t, pts)) / Qxx
    if method == "factorized":
        Q = multiply(power(R, m), P)
        mq = monomials(2, Q.d, pts)
        a = tx @ mq
        b = sy @ mq.conj()
        return complex(a @ Q.C @ b)
    if method != "direct":
        raise ValueError(f"unknown method {method!r}")
    total = 0.0j
    CR, CP = R.C, P.C
    mR, mP = monomials(2, R.d, pts), monomials(2, P.d, pts)
    for lo in range(0, len(pts), 256):
        hi = min(lo + 256, len(pts))
        Rxy = (mR[lo:hi] @ CR) @ mR.conj().T
        Pxy = (mP[lo:hi] @ CP) @ mP.conj().T
        total += tx[lo:hi] @ ((ipow(Rxy, m) * Pxy) @ sy)
    return complex(total)


def k_exact(setup: OperatorSetup, s: Section, t: Section | None = None) -> ExactScalar:
    return _hermitian_value(operator_matrix(setup), s, t)


def norm_numeric(R, P, m, s, grid=None) -> float:
    grid = grid or QuadratureGrid()
    pts, wts = grid.measure(R)
    Q = ipow(_pair_values(R.to_float(), pts, pts).real, m) * _pair_values(P.to_float(), pts, pts).real
    return float(np.sum(wts * np.abs(eval_section(s, pts)) ** 2 / Q))


# ---------------------------------------------------------------------------
# Bochner geometry in closed form


def _affine_frames(R: HermitianForm, x):
    """Chart-normalized base points, chart index and offset matrices ``E_c F``."""
    x = np.atleast_2d(np.asarray(x, dtype=complex))
    N = x.shape[-1]
    c = np.argmax(np.abs(x), axis=-1)
    xh = x / x[np.arange(len(x)), c][:, None]
    G = log_hessian(R.to_float(), xh)
    E = np.zeros((len(x), N, N - 1), dtype=complex)
    for k in range(len(x)):
        E[k, [i for i in range(N) if i != c[k]], np.arange(N - 1)] = 1
    H = np.einsum("pki,pkl,plj->pij", E, G, E.conj())
    Hs = 0.5 * (H + np.conj(np.swapaxes(H, -1, -2)))
    L = np.linalg.cholesky(np.swapaxes(Hs, -1, -2))
    F = np.conj(np.swapaxes(np.linalg.inv(L), -1, -2))
    return xh, c, np.einsum("pki,pij->pkj", E, F)


def bochner_coordinate(R: HermitianForm, x, y, chart_tol: float = 1e-12):
    """Bochner coordinates of ``y`` centred at ``x`` for ``R`` (pairs broadcast along axis 0).

    Uses ``z_j = sum_k conj(A_kj) (d_k R(y, x̄)/R(y, x̄) - d_k R(x, x̄)/R(x, x̄))`` with
    ``d_k`` differentiating the antiholomorphic slot and ``A`` the normalized
    affine offsets; entries with ``R(y, x̄)`` numerically zero are NaN.
    """
    R = R.to_float()
    xh, _, A = _affine_frames(R, x)
    y = np.atleast_2d(np.asarray(y, dtype=complex))
    C = R.C
    mx, my = monomials(R.N, R.d, xh), monomials(R.N, R.d, y)
    dmx = monomial_gradients(R.N, R.d, xh)
    Ryx = np.einsum("pa,ab,pb->p", my, C, mx.conj())
    Rxx = np.einsum("pa,ab,pb->p", mx, C, mx.conj())
    dRyx = np.einsum("pa,ab,pkb->pk", my, C, dmx.conj())
    dRxx = np.einsum("pa,ab,pkb->pk", mx, C, dmx.conj())
    scale = np.sqrt(np.abs(np.einsum("pa,ab,pb->p", my, C, my.conj())) * np.abs(Rxx))
    bad = np.abs(Ryx) <= chart_tol * scale
    with np.errstate(divide="ignore", invalid="ignore"):
        diff = dRyx / Ryx[:, None] - dRxx / Rxx[:, None]
    z = np.einsum("pkj,pk->pj", A.conj(), diff)
    z[bad] = np.nan
    return z


def rho(R: HermitianForm, x, y):
    """``|z(y)|`` in Bochner coordinates at ``x``; raises for a single pair outside the chart."""
    single = np.ndim(x) == 1 and np.ndim(y) == 1
    z = bochner_coordinate(R, x, y)
    r = np.linalg.norm(z, axis=-1)
    if single:
        if not np.isfinite(r[0]):
            raise ChartRadiusError("point lies outside the Bochner chart of the base point")
        return float(r[0])
    return r


def fs_chart_map(x):
    """Unitary Bochner charts for FS on P^1: ``y(z) = U_x (1, z)`` with ``U_x e_0 = x̂``."""
    x = np.atleast_2d(np.asarray(x, dtype=complex))
    x = x / np.linalg.norm(x, axis=-1, keepdims=True)
    a, b = x[:, 0], x[:, 1]
    U = np.empty((len(x), 2, 2), dtype=complex)
    U[:, 0, 0], U[:, 0, 1], U[:, 1, 0], U[:, 1, 1] = a, -b.conj(), b, a.conj()
    return U


# ---------------------------------------------------------------------------
# decomposition


@dataclass
class DecompositionReport:
    m: int
    r: float
    I: complex
    II: complex
    III: complex
    K_ss: complex
    norm_sq: float
    closure_defect: float
    K_numeric: complex = 0j
    exact_reference: bool = False

    def row(self):
        return (self.m, self.r, self.I.real, self.I.imag, self.II.real, self.II.imag, self.III.real,
                self.III.imag, self.K_ss.real, self.K_ss.imag, self.norm_sq, self.closure_defect)

    CSV_HEADER = "m,r,I_re,I_im,II_re,II_im,III_re,III_im,K_re,K_im,norm_sq,defect"


def _fs_power_degree(P: HermitianForm):
    return P.d if _equals_exact(P.to_float(), norm_power(P.d, P.N).to_float()) else None


def decompose(R: HermitianForm, P: HermitianForm, m: int, s: Section, r: float,
              grid: QuadratureGrid | None = None, ball_radial: int | None = None,
              ball_angular: int | None = None) -> DecompositionReport:
    """Split ``K(s, s) - (pi/m) ||s||^2`` into the ball difference, ball approximant and complement.

    For each outer node ``x`` the Bochner ball ``|z| < r`` carries its own
    polar rule; the complement contribution is the full inner integral minus
    the ball part of the raw integrand.
    """
    if m < 1:
        raise ValueError("m must be positive")
    if not r > 0:
        raise ValueError("ball radius must be positive")
    grid = grid or QuadratureGrid()
    nb = ball_radial or max(16, grid.chart_order // 2)
    na = ball_angular or grid.angular
    R, P = R.to_float(), P.to_float()
    if R.N != 2:
        raise ValueError("the decomposition is implemented on P^1 (N = 2)")
    is_fs = np.allclose(R.C, np.eye(2), atol=0, rtol=0) and R.d == 1
    pts, wts = grid.measure(R)
    Q = multiply(power(R, m), P)
    Qxx = _pair_values(Q, pts, pts).real
    s_x = eval_section(s, pts)
    # full inner integral F(x) = conj(s(x))/Q(x,x̄) * sum_y W_y Q(x,ȳ) s(y)/Q(y,ȳ), factorized
    mq = monomials(2, Q.d, pts)
    b = (wts * s_x / Qxx) @ mq.conj()
    F = np.conj(s_x) / Qxx * (mq @ (Q.C @ b))
    K_num = complex(np.sum(wts * F))
    norm_num = float(np.sum(wts * np.abs(s_x) ** 2 / Qxx))

    zb, vb = polar_rule(r, nb, na)
    t2 = np.abs(zb) ** 2
    if is_fs:
        ball_raw, ball_T = _ball_terms_fs(P, m, s, pts, s_x, zb, vb, t2)
    else:
        ball_raw, ball_T = _ball_terms_general(R, P, m, s, pts, s_x, zb, vb)

    I_x = ball_raw - ball_T
    III_x = F - ball_raw
    I = complex(np.sum(wts * I_x))
    e = _fs_power_degree(P) if is_fs else None
    if e is not None:
        setup = OperatorSetup(2, m, e)
        K_ref = complex(float(k_exact(setup, s)))
        norm_sq = float(_hermitian_value(gram_matrix(setup), s))
    else:
        K_ref, norm_sq = K_num, norm_num
    lead = math.pi / m * norm_sq
    II = complex(np.sum(wts * ball_T)) - lead
    III = complex(np.sum(wts * III_x))
    defect = abs(I + II + III - (K_ref - lead))
    return DecompositionReport(m, r, I, II, III, K_ref, norm_sq, float(defect), K_num, e is not None)


def _ball_terms_fs(P, m, s, pts, s_x, zb, vb, t2):
    U = fs_chart_map(pts)
    A = U[:, :, 1]                                   # d y / d z
    GP = log_hessian(P, pts)
    cP = np.einsum("pk,pkl,pl->p", A, GP, A.conj()).real
    lam_base = ipow(1.0 - t2 + t2 * t2, m) * (1.0 - 2.0 * t2)   # Psi_R4^m * Omega2
    omega = (1.0 + t2) ** -2
    psiR_m = (1.0 + t2) ** (-m)
    Pxx = _pair_values(P, pts, pts).real
    ball_raw = np.empty(len(pts), dtype=complex)
    ball_T = np.empty(len(pts), dtype=complex)
    chunk = max(1, 2_000_000 // len(zb))
    for lo in range(0, len(pts), chunk):
        hi = min(lo + chunk, len(pts))
        x = pts[lo:hi]
        y = U[lo:hi, None, :, 0] + U[lo:hi, None, :, 1] * zb[None, :, None]   # (p, k, 2)
        Pyx = _pair_values(P, y, x[:, None, :])
        Pyy = _pair_values(P, y, y).real
        psiP = np.abs(Pyx) ** 2 / (Pxx[lo:hi, None] * Pyy)
        # <y, x> = 1 in this chart, so R(y, x̄)^m = 1
        stuff = eval_section(s, y) * np.conj(s_x[lo:hi, None]) / Pyx
        psiP2 = 1.0 - cP[lo:hi, None] * t2[None, :]
        ball_raw[lo:hi] = (psiR_m * omega)[None, :] * psiP * stuff @ vb
        ball_T[lo:hi] = (lam_base[None, :] * psiP2 * stuff) @ vb
    return ball_raw, ball_T


def _ball_terms_general(R, P, m, s, pts, s_x, zb, vb):
    """Per-node series normalization; slow, intended for coarse grids."""
    ball_raw = np.empty(len(pts), dtype=complex)
    ball_T = np.empty(len(pts), dtype=complex)
    zcol = zb[:, None]
    for i, x in enumerate(pts):
        cp, psi_R, omega, psi_P, tr = normalized_data(R, P, x)
        om = cp.volume_density(R, zcol)
        if np.any(om <= 0):
            raise ChartRadiusError("chart volume density is not positive inside the ball")
        T_m = approximant(m, ApproximantData(tr, lambda z, om=om: om))
        y = cp.point(zcol)
        Ryx = _pair_values(R, y, x)
        Pyx = _pair_values(P, y, x)
        psi = cauchy_schwarz(R, np.broadcast_to(x, y.shape), y)
        psiP = cauchy_schwarz(P, np.broadcast_to(x, y.shape), y)
        stuff = eval_section(s, y) * np.conj(s_x[i]) / (ipow(Ryx, m) * Pyx)
        ball_raw[i] = (ipow(psi, m) * psiP * om * stuff) @ vb
        ball_T[i] = (T_m(zcol) * om * stuff) @ vb
    return ball_raw, ball_T


# ---------------------------------------------------------------------------
# radius schedule


def radius_bounds(m, n: int, r9_hat: float):
    lower = math.sqrt(2 * (n + 1) * math.log(m) / m)
    upper = r9_hat / m ** ((n + 2) / (2 * n + 5))
    return lower, upper


def feasibility_threshold(n: int, r9_hat: float) -> float:
    """Smallest ``m`` from which the radius interval stays nonempty.

    ``log(upper/lower) = log r9 + L/(2(2n+5)) - log(2(n+1)L)/2`` with ``L = log m``
    is convex in ``L`` with its minimum at ``L = 2n + 5``; past the minimum it
    increases, so the crossing there is found by bisection.
    """
    def gap(logm):
        lo, hi = radius_bounds(math.exp(logm), n, r9_hat)
        return math.log(hi) - math.log(lo)

    a = b = 2 * n + 5.0
    if gap(a) >= 0:
        # nonempty at the minimum: feasible for every m >= 2
        return 2.0
    while gap(b) < 0:
        a, b = b, 2 * b
    for _ in range(200):
        c = 0.5 * (a + b)
        a, b = (c, b) if gap(c) < 0 else (a, c)
    return math.exp(b)


def radius_schedule(m: int, n: int = 1, r9_hat: float = 0.5) -> float:
    if m < 2:
        raise ValueError("the schedule needs m >= 2")
    lower, upper = radius_bounds(m, n, r9_hat)
    if lower > upper:
        m0 = feasibility_threshold(n, r9_hat)
        raise InfeasibleRadius(
            f"empty radius interval at m={m}: lower {lower:.4g} > upper {upper:.4g}; "
            f"feasible from m0 ~ {m0:.4g}", m0)
    return math.sqrt(lower * upper)


# ---------------------------------------------------------------------------
# ball integrals


def lemma52(n: int, k: int, a, m: int) -> ExactScalar:
    """``int_{|z| < a^(-1/2)} |z|^(2k) (1 - a|z|^2)^m dV`` in closed form."""
    if n < 1 or k < 0 or m < 0:
        raise ValueError("need n >= 1 and non-negative k, m")
    a = Fraction(a) if not isinstance(a, float) else Fraction(a)
    if a <= 0:
        raise ValueError("a must be positive")
    num = math.factorial(n + k - 1) * math.factorial(m)
    den = math.factorial(n - 1) * math.factorial(m + k + n)
    return ExactScalar(Fraction(num, den) / a ** (n + k), n)


def lemma52_quadrature(n: int, k: int, a, m: int, nodes: int = 96) -> float:
    """Radial reduction with sphere area ``2 pi^n/(n-1)!`` and Gauss-Legendre in ``r``."""
    a = float(a)
    R = 1.0 / math.sqrt(a)
    x, w = np.polynomial.legendre.leggauss(nodes)
    r = 0.5 * R * (x + 1.0)
    w = 0.5 * R * w
    f = r ** (2 * k + 2 * n - 1) * (1.0 - a * r * r) ** m
    return float(2.0 * math.pi ** n / math.factorial(n - 1) * np.sum(w * f))


def ball_rule(n: int, r: float, radial: int = 32, angular: int = 32, polar: int = 16):
    """Nodes ``(M, n)`` and Lebesgue weights on the ball ``|z| < r`` in C^n, n in {1, 2}."""
    if n == 1:
        z, w = polar_rule(r, radial, angular)
        return z[:, None], w
    if n != 2:
        raise ValueError("ball rule implemented for n = 1, 2")
    x, wx = np.polynomial.legendre.leggauss(radial)
    rho_ = 0.5 * r * (x + 1)
    wr = 0.5 * r * wx * rho_ ** 3
    u, wu = np.polynomial.legendre.leggauss(polar)
    tt = 0.25 * np.pi * (u + 1)
    wt = 0.25 * np.pi * wu * np.cos(tt) * np.sin(tt)
    th = 2 * np.pi * np.arange(angular) / angular
    wth = 2 * np.pi / angular
    P, T, A1, A2 = np.meshgrid(rho_, tt, th, th, indexing="ij")
    WP, WT = np.meshgrid(wr, wt, indexing="ij")
    z1 = P * np.cos(T) * np.exp(1j * A1)
    z2 = P * np.sin(T) * np.exp(1j * A2)
    W = (WP * WT)[:, :, None, None] * wth * wth * np.ones_like(A1)
    return np.stack([z1.reshape(-1), z2.reshape(-1)], axis=-1), W.reshape(-1)


def ball_monomial_integral(alpha, beta, r: float, radial: int = 32, angular: int = 32) -> complex:
    n = len(alpha)
    z, w = ball_rule(n, r, radial, angular)
    v = np.ones(len(w), dtype=complex)
    for i in range(n):
        v *= z[:, i] ** alpha[i] * np.conj(z[:, i]) ** beta[i]
    return complex(np.sum(w * v))


def quasi_diagonal_mean_value_test(f_hol, q: TruncatedSeries, r: float, radial: int = 32,
                                   angular: int = 32) -> float:
    """``|int f q dV - f(0) int q dV|`` over ``|z| < r`` for holomorphic ``f``.

    ``f_hol`` maps exponent tuples to coefficients.
    """
    if not q.is_quasi_diagonal():
        raise ValueError("q has terms with |alpha| != |beta|")
    z, w = ball_rule(q.n, r, radial, angular)
    fz = np.zeros(len(w), dtype=complex)
    for alpha, c in f_hol.items():
        term = np.full(len(w), complex(c))
        for i, a in enumerate(alpha):
            term *= z[:, i] ** a
        fz += term
    f0 = complex(f_hol.get((0,) * q.n, 0))
    qz = q(z)
    return float(abs(np.sum(w * fz * qz) - f0 * np.sum(w * qz)))


# ---------------------------------------------------------------------------
# sampled geometric checks


def _near_pairs(rng, count, N, spread):
    x = sample_sphere(rng, count, N)
    xi = rng.normal(size=(count, N)) + 1j * rng.normal(size=(count, N))
    xi -= np.sum(xi * x.conj(), axis=-1, keepdims=True) * x
    xi /= np.linalg.norm(xi, axis=-1, keepdims=True)
    t = spread * rng.random(count)
    y = x + t[:, None] * xi
    return x, y / np.linalg.norm(y, axis=-1, keepdims=True)


@dataclass
class QuasiSymmetryReport:
    num_pairs: int
    max_ratio: float
    r_max: float

    @property
    def ok(self):
        return self.max_ratio <= 2.0


def rho_quasi_symmetry_test(R: HermitianForm, num_pairs: int = 1000, r_max: float = 0.3,
                            seed: int = 0) -> QuasiSymmetryReport:
    """Max of ``rho(y, x)/rho(x, y)`` over sampled pairs with ``rho(x, y) <= r_max``."""
    rng = np.random.default_rng(seed)
    xs, ys, got = [], [], 0
    while got < num_pairs:
        x, y = _near_pairs(rng, 2 * num_pairs, R.N, 1.5 * r_max)
        rxy = rho(R, x, y)
        keep = np.isfinite(rxy) & (rxy <= r_max) & (rxy > 1e-6)
        xs.append(x[keep]), ys.append(y[keep])
        got += int(keep.sum())
    x, y = np.concatenate(xs)[:num_pairs], np.concatenate(ys)[:num_pairs]
    ratio = rho(R, y, x) / rho(R, x, y)
    return QuasiSymmetryReport(num_pairs, float(np.max(ratio)), r_max)


@dataclass
class OffDiagonalReport:
    r: float
    num_pairs: int
    max_psi: float
    bound: float
    witness: tuple | None = None

    @property
    def ok(self):
        return self.max_psi <= self.bound


def off_diagonal_bound_test(R: HermitianForm, r: float, num_samples: int = 2000, seed: int = 0):
    """Max of ``Psi_R(x, y)`` over sampled pairs with ``rho(x, y) >= r`` against ``1 - r^2/2``."""
    rng = np.random.default_rng(seed)
    half = num_samples // 2
    x1, y1 = sample_sphere(rng, half, R.N), sample_sphere(rng, half, R.N)
    x2, y2 = _near_pairs(rng, num_samples - half, R.N, 3.0 * max(r, 0.05))
    x, y = np.concatenate([x1, x2]), np.concatenate([y1, y2])
    rxy = rho(R, x, y)
    far = ~np.isfinite(rxy) | (rxy >= r)
    psi = cauchy_schwarz(R, x[far], y[far])
    bound = 1.0 - r * r / 2.0
    k = int(np.argmax(psi)) if psi.size else None
    max_psi = float(psi[k]) if k is not None else 0.0
    witness = (x[far][k], y[far][k]) if k is not None and max_psi > bound else None
    return OffDiagonalReport(r, int(far.sum()), max_psi, bound, witness)


# ---------------------------------------------------------------------------
# remainder scaling


REMAINDER_KEYS = ("psi_R_quartic_rem5", "psi_R_quadratic_rem4", "psi_P_quadratic_rem3",
                  "psi_P_const_rem2", "omega_quadratic_rem3", "omega_const_rem2")


def remainder_scaling_test(R: HermitianForm, P: HermitianForm, base, radii=None, directions: int = 12,
                           m_values=(1, 4, 16, 64), ball_radii=(0.01, 0.03, 0.1, 0.2, 0.3),
                           T: int = 8) -> dict:
    """Empirical sup of each remainder divided by its power of the Bochner radius.

    Exact values come from the closed-form chart map and density; the
    truncations come from the series at ``base``.
    """
    R, P = R.to_float(), P.to_float()
    x, psi_R, omega_series, psi_P, tr = normalized_data(R, P, base, T)
    n = x.n
    radii = np.geomspace(1e-3, 0.15, 12) if radii is None else np.asarray(radii)
    rng = np.random.default_rng(0)
    dirs = rng.normal(size=(directions, n)) + 1j * rng.normal(size=(directions, n))
    dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
    z = (radii[:, None, None] * dirs[None, :, :]).reshape(-1, n)
    rr = np.linalg.norm(z, axis=-1)
    y = x.point(z)
    xb = np.broadcast_to(x.base, y.shape)
    exact_R = cauchy_schwarz(R, xb, y)
    exact_P = cauchy_schwarz(P, xb, y)
    exact_O = x.volume_density(R, z)
    r4, o2, p2 = tr.psi_R4(z).real, tr.omega2(z).real, tr.psi_P2(z).real
    out = {
        "psi_R_quartic_rem5": np.max(np.abs(exact_R - r4) / rr ** 5),
        "psi_R_quadratic_rem4": np.max(np.abs(exact_R - (1 - rr ** 2)) / rr ** 4),
        "psi_P_quadratic_rem3": np.max(np.abs(exact_P - p2) / rr ** 3),
        "psi_P_const_rem2": np.max(np.abs(exact_P - 1) / rr ** 2),
        "omega_quadratic_rem3": np.max(np.abs(exact_O - o2) / rr ** 3),
        "omega_const_rem2": np.max(np.abs(exact_O - 1) / rr ** 2),
    }
    # pointwise estimates for the approximant and its volume-weighted form
    approx, lam = [], []
    for m in m_values:
        keep = rr <= 0.5 * m ** -0.2
        zm, rm = z[keep], rr[keep]
        if not len(zm):
            continue
        T_m = approximant(m, ApproximantData(tr, lambda q: x.volume_density(R, q)))(zm)
        ratio = T_m / (exact_R[keep] ** m * exact_P[keep])
        approx.append(np.max(np.abs(1 - ratio) / (rm ** 3 + m * rm ** 5)))
        lam_m = ipow(tr.psi_R4(zm), m) * tr.psi_P2(zm) * tr.omega2(zm)
        bound = (rm ** 2 + m * rm ** 4) * (1 - rm ** 2 / 2) ** (m - 1)
        lam.append(np.max(np.abs(lam_m - (1 - rm ** 2) ** m) / bound))
    out["approximant_pointwise"] = max(approx)
    out["lambda_pointwise"] = max(lam)
    for k in (3, 5):
        vals = []
        for rb in ball_radii:
            zb, wb = ball_rule(n, rb, 24, 24, 12)
            dens = x.volume_density(R, zb)
            vals.append(np.sum(wb * np.linalg.norm(zb, axis=-1) ** k * dens) / rb ** (2 * n + k))
        out[f"ball_moment_k{k}"] = max(vals)
    return {k: float(v) for k, v in out.items()}


def calibrate_r9(R: HermitianForm, P: HermitianForm, base, tol_factor: float = 10.0,
                 floor: float = 1e-2) -> float:
    """Largest sampled chart radius over which the quintic remainder ratio stays controlled.

    The reference constant is the sup of ``|Psi_R - Psi_R4|/rho^5`` over
    ``rho <= 0.1`` (at least ``floor``); the radius grows while the ratio stays
    within ``tol_factor`` of it and the chart density stays positive.
    """
    R, P = R.to_float(), P.to_float()
    x, psi_R, omega, psi_P, tr = normalized_data(R, P, base)
    ang = np.exp(2j * np.pi * np.arange(8) / 8)
    dirs = np.eye(x.n)

    def ratio(r):
        z = (r * ang[:, None, None] * dirs[None, :, :]).reshape(-1, x.n)
        if np.any(x.volume_density(R, z) <= 0):
            return math.inf
        y = x.point(z)
        ex = cauchy_schwarz(R, np.broadcast_to(x.base, y.shape), y)
        return float(np.max(np.abs(ex - tr.psi_R4(z).real)) / r ** 5)

    ref = max(max(ratio(r) for r in np.linspace(0.02, 0.1, 5)), floor)
    good = 0.1
    for r in np.linspace(0.1, 0.95, 18):
        if ratio(r) > tol_factor * ref:
            break
        good = float(r)
    return good
