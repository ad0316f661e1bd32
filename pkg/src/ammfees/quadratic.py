"""Quadratic-expansion solver for the stochastic-oracle control problem.

The exponential arrival responses are expanded to second order around a
reference inventory y0 (with constant trade sizes delta_sell, delta_buy and
affine exchange-rate legs), which closes the reduced HJB under the ansatz

    g(t, y, s) = y**2 * a(t) + y * (s * b1(t) + b0(t))
                 + s**2 * c2(t) + s * c1(t) + c0(t).

Collecting the {y**2, y*s, y, s**2, s, 1} coefficients yields one Riccati
equation and five linear ODEs whose constant coefficients (psi_0 .. psi_26)
are hard-coded below; `approx_hjb_residual` certifies the collection by
evaluating the expanded HJB from scratch.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DomainError, NumericalError
from .market import FeePair, MarketParams
from .pool import PoolSpec

__all__ = [
    "LinearizedRates",
    "PsiConstants",
    "QuadCoeffs",
    "linearize_rates",
    "derive_psi",
    "integrate_coeffs",
    "eval_g",
    "fees_quadratic",
    "limit_fees_k0_quadratic",
    "approx_hjb_residual",
    "write_coeff_csv",
    "write_quadratic_fee_csv",
]


@dataclass(frozen=True)
class LinearizedRates:
    """Affine rate legs around y0 plus the data to evaluate the exact ones.

    Z(y)              ~= z0  + z1  * (y - y0)
    Z_plus(y)*d_sell  ~= zp0 + zp1 * (y - y0)
    Z_minus(y)*d_buy  ~= zm0 + zm1 * (y - y0)
    """

    z0: float
    z1: float
    zp0: float
    zp1: float
    zm0: float
    zm1: float
    delta_sell: float
    delta_buy: float
    y0: float
    depth_sq: float

    def __post_init__(self):
        if not (self.z0 > 0 and self.zp0 > 0 and self.zm0 > 0):
            raise DomainError("rate intercepts must be positive")
        if not self.z1 < 0:
            raise DomainError("marginal rate slope must be negative for a CPM")

    def z_lin(self, y):
        return self.z0 + self.z1 * (np.asarray(y, dtype=float) - self.y0)

    def sell_leg_lin(self, y):
        return self.zp0 + self.zp1 * (np.asarray(y, dtype=float) - self.y0)

    def buy_leg_lin(self, y):
        return self.zm0 + self.zm1 * (np.asarray(y, dtype=float) - self.y0)

    def sell_rate_exact(self, y):
        """Z_plus(y) = p^2 / (y^2 + delta_sell * y) for the CPM."""
        y = np.asarray(y, dtype=float)
        return self.depth_sq / (y**2 + self.delta_sell * y)

    def buy_rate_exact(self, y):
        """Z_minus(y) = p^2 / (y^2 - delta_buy * y) for the CPM."""
        y = np.asarray(y, dtype=float)
        return self.depth_sq / (y**2 - self.delta_buy * y)


def linearize_rates(spec: PoolSpec, y0: float, delta_sell: float,
                    delta_buy: float) -> LinearizedRates:
    """First-order expansion of the CPM rate legs around y0."""
    p2 = spec.depth_sq
    if y0 <= delta_buy:
        raise DomainError("y0 must exceed delta_buy")
    den_p = y0**2 + delta_sell * y0
    den_m = y0**2 - delta_buy * y0
    if den_p <= 0 or den_m <= 0:
        raise DomainError("nonpositive denominator in rate expansion")
    return LinearizedRates(
        z0=p2 / y0**2,
        z1=-2 * p2 / y0**3,
        zp0=p2 * delta_sell / den_p,
        zp1=-p2 * delta_sell * (2 * y0 + delta_sell) / den_p**2,
        zm0=p2 * delta_buy / den_m,
        zm1=-p2 * delta_buy * (2 * y0 - delta_buy) / den_m**2,
        delta_sell=float(delta_sell),
        delta_buy=float(delta_buy),
        y0=float(y0),
        depth_sq=float(p2),
    )


@dataclass(frozen=True)
class PsiConstants:
    """The 27 constants of the coefficient ODE system, indexed 0..26.

    0..2 drive the Riccati equation for a, 3..11 the linear pair (b0, b1),
    12..26 the triple (c0, c1, c2).
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (27,) or not np.all(np.isfinite(v)):
            raise ContractError("psi must be 27 finite reals")
        object.__setattr__(self, "values", v)
        v.flags.writeable = False

    def __getitem__(self, i: int) -> float:
        return float(self.values[i])


def derive_psi(params: MarketParams, lin: LinearizedRates) -> PsiConstants:
    """Constants obtained by matching {y^2, ys, y, s^2, s, 1} coefficients.

    Writing the affine legs in absolute y (intercepts ap, am, alpha and
    slopes bp, bm, beta) and lp, lm for the baseline rates damped by the
    half-spread fold, the expanded HJB is a polynomial identity whose
    groups give the formulas below.  They vanish when both baseline rates
    and the penalty weight are zero, and none involves sigma.
    """
    k = params.k
    phi = params.phi
    dp, dm = lin.delta_sell, lin.delta_buy
    lp = params.lambda_sell * math.exp(-k * params.zeta * dp - 1.0)
    lm = params.lambda_buy * math.exp(-k * params.zeta * dm - 1.0)
    bp, bm, beta = lin.zp1, lin.zm1, lin.z1
    ap = lin.zp0 - lin.zp1 * lin.y0
    am = lin.zm0 - lin.zm1 * lin.y0
    alpha = lin.z0 - lin.z1 * lin.y0

    psi = np.empty(27)
    # y^2 group: Riccati
    psi[0] = 0.5 * k * (lp * bp**2 + lm * bm**2) - phi * beta**2
    psi[1] = 2 * k * (lp * dp * bp + lm * dm * bm)
    psi[2] = 2 * k * (lp * dp**2 + lm * dm**2)
    # y group: b0
    psi[3] = lp * bp - lm * bm + k * (lp * ap * bp + lm * am * bm) - 2 * phi * alpha * beta
    psi[4] = 2 * (lp * dp - lm * dm) + k * (lp * dp * (bp * dp + 2 * ap)
                                            + lm * dm * (2 * am - bm * dm))
    psi[5] = 2 * k * (lp * dp**3 - lm * dm**3)
    psi[6] = psi[2]
    psi[7] = 0.5 * psi[1]
    # y*s group: b1
    psi[8] = 2 * phi * beta - 0.5 * psi[1]
    psi[9] = -psi[2]
    psi[10] = psi[2]
    psi[11] = 0.5 * psi[1]
    # constant group: c0
    psi[12] = ((lp + lm) / k + lp * ap - lm * am
               + 0.5 * k * (lp * ap**2 + lm * am**2) - phi * alpha**2)
    psi[13] = lp * dp**2 + lm * dm**2 + k * (lp * ap * dp**2 - lm * am * dm**2)
    psi[14] = 0.5 * k * (lp * dp**4 + lm * dm**4)
    psi[15] = k * (lp * dp**3 - lm * dm**3)
    psi[16] = lp * dp - lm * dm + k * (lp * ap * dp + lm * am * dm)
    psi[17] = 0.25 * psi[2]
    # s group: c1
    psi[18] = 2 * phi * alpha - psi[16]
    psi[19] = -psi[15]
    psi[20] = psi[15]
    psi[21] = -0.5 * psi[2]
    psi[22] = 0.5 * psi[2]
    psi[23] = psi[16]
    # s^2 group: c2
    psi[24] = 0.25 * psi[2] - phi
    psi[25] = -0.5 * psi[2]
    psi[26] = 0.25 * psi[2]
    return PsiConstants(values=psi)


def _coeff_rhs(psi: PsiConstants, sigma: float, q: np.ndarray) -> np.ndarray:
    """Backward ODE right-hand sides for (a, b0, b1, c0, c1, c2)."""
    p = psi.values
    a, b0, b1, c0, c1, c2 = q
    return np.array([
        -(p[0] + p[1] * a + p[2] * a * a),
        -(p[3] + p[4] * a + p[5] * a * a + p[6] * a * b0 + p[7] * b0),
        -(p[8] + p[9] * a + p[10] * a * b1 + p[11] * b1),
        -(p[12] + p[13] * a + p[14] * a * a + p[15] * a * b0 + p[16] * b0
          + p[17] * b0 * b0 + sigma * sigma * c2),
        -(p[18] + p[19] * a + p[20] * a * b1 + p[21] * b0 + p[22] * b0 * b1
          + p[23] * b1),
        -(p[24] + p[25] * b1 + p[26] * b1 * b1),
    ])


@dataclass(frozen=True)
class QuadCoeffs:
    """Coefficient trajectories on a uniform time grid over [0, T].

    a multiplies y**2; b0, b1 assemble the y coefficient s*b1 + b0;
    c0, c1, c2 assemble the constant term s**2*c2 + s*c1 + c0.  All six
    vanish at the terminal time.
    """

    times: np.ndarray
    a: np.ndarray
    b0: np.ndarray
    b1: np.ndarray
    c0: np.ndarray
    c1: np.ndarray
    c2: np.ndarray

    def time_index(self, t: float) -> int:
        return int(np.argmin(np.abs(self.times - t)))

    def row(self, t: float) -> np.ndarray:
        r = self.time_index(t)
        return np.array([self.a[r], self.b0[r], self.b1[r],
                         self.c0[r], self.c1[r], self.c2[r]])


def integrate_coeffs(psi: PsiConstants, params: MarketParams,
                     n_steps: int) -> QuadCoeffs:
    """Classic fixed-step RK4 from the terminal condition back to t = 0.

    The six equations are advanced jointly; their triangular dependency
    (a feeds b0/b1, which feed c0/c1/c2) is respected automatically.
    """
    if n_steps < 100:
        raise ContractError("n_steps must be at least 100")
    t_end = params.horizon
    sigma = params.sigma
    h = t_end / n_steps
    times = np.linspace(0.0, t_end, n_steps + 1)
    q = np.zeros((n_steps + 1, 6))
    for j in range(n_steps, 0, -1):
        x = q[j]
        k1 = _coeff_rhs(psi, sigma, x)
        k2 = _coeff_rhs(psi, sigma, x - 0.5 * h * k1)
        k3 = _coeff_rhs(psi, sigma, x - 0.5 * h * k2)
        k4 = _coeff_rhs(psi, sigma, x - h * k3)
        q[j - 1] = x - (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(q[j - 1])) or abs(q[j - 1, 0]) > 1e12:
            raise NumericalError(
                f"Riccati blow-up near t = {times[j - 1]:.6g}; parameters are "
                "outside the validity region of the quadratic expansion")
    return QuadCoeffs(times=times, a=q[:, 0], b0=q[:, 1], b1=q[:, 2],
                      c0=q[:, 3], c1=q[:, 4], c2=q[:, 5])


def _check_time(t: float, horizon: float) -> None:
    if not 0 <= t <= horizon:
        raise DomainError(f"t={t} outside [0, {horizon}]")


def eval_g(coeffs: QuadCoeffs, t: float, y, s):
    """Reduced value g(t, y, s) from the nearest-time coefficients."""
    _check_time(t, coeffs.times[-1])
    a, b0, b1, c0, c1, c2 = coeffs.row(t)
    y = np.asarray(y, dtype=float)
    s = np.asarray(s, dtype=float)
    out = y**2 * a + y * (s * b1 + b0) + (s**2 * c2 + s * c1 + c0)
    return float(out) if out.ndim == 0 else out


def fees_quadratic(coeffs: QuadCoeffs, lin: LinearizedRates,
                   params: MarketParams, t: float, y, s) -> FeePair:
    """Maximizing fees of the expanded problem; affine in y and in s.

    The denominators use the exact CPM rates at y, not their linearization.
    """
    _check_time(t, coeffs.times[-1])
    a, b0, b1, *_ = coeffs.row(t)
    y = np.asarray(y, dtype=float)
    s = np.asarray(s, dtype=float)
    bhat = s * b1 + b0
    zp = lin.sell_rate_exact(y)
    zm = lin.buy_rate_exact(y)
    k = params.k
    dp, dm = lin.delta_sell, lin.delta_buy
    fee_sell = -((2 * y + dp) * a + bhat) / zp + 1.0 / (k * zp * dp)
    fee_buy = -((-2 * y + dm) * a - bhat) / zm + 1.0 / (k * zm * dm)
    if fee_sell.ndim == 0:
        return FeePair(float(fee_sell), float(fee_buy))
    return FeePair(fee_sell, fee_buy)


def limit_fees_k0_quadratic(lin: LinearizedRates, y) -> FeePair:
    """Small-decay limit of k times the expanded fees: 1 / (rate * size)."""
    y = np.asarray(y, dtype=float)
    p = 1.0 / (lin.sell_rate_exact(y) * lin.delta_sell)
    m = 1.0 / (lin.buy_rate_exact(y) * lin.delta_buy)
    if p.ndim == 0:
        return FeePair(float(p), float(m))
    return FeePair(p, m)


def approx_hjb_residual(coeffs: QuadCoeffs, psi: PsiConstants,
                        lin: LinearizedRates, params: MarketParams,
                        t: float, y: float, s: float) -> float:
    """Relative residual of the expanded HJB at (t, y, s).

    The equation is rebuilt from scratch: affine legs, second-order
    exponential brackets, penalty on the linearized marginal rate, and the
    sigma term; the time derivative of g comes from the psi ODE right-hand
    sides evaluated at the stored coefficients, so a wrong psi shows up as
    a nonzero residual.  Returns |lhs| / max term magnitude.
    """
    _check_time(t, coeffs.times[-1])
    q = coeffs.row(t)
    dq = _coeff_rhs(psi, params.sigma, q)
    a, b0, b1, c0, c1, c2 = q
    k = params.k
    dp, dm = lin.delta_sell, lin.delta_buy
    lp = params.lambda_sell * math.exp(-k * params.zeta * dp - 1.0)
    lm = params.lambda_buy * math.exp(-k * params.zeta * dm - 1.0)

    def g_of(yy: float) -> float:
        return yy**2 * a + yy * (s * b1 + b0) + (s**2 * c2 + s * c1 + c0)

    dtg = y**2 * dq[0] + y * (s * dq[2] + dq[1]) + (s**2 * dq[5] + s * dq[4] + dq[3])
    e_sell = -s * dp + float(lin.sell_leg_lin(y)) + g_of(y + dp) - g_of(y)
    e_buy = s * dm - float(lin.buy_leg_lin(y)) + g_of(y - dm) - g_of(y)
    terms = (
        dtg,
        params.sigma**2 * c2,
        -params.phi * (float(lin.z_lin(y)) - s) ** 2,
        (lp / k) * (1.0 + k * e_sell + 0.5 * (k * e_sell) ** 2),
        (lm / k) * (1.0 + k * e_buy + 0.5 * (k * e_buy) ** 2),
    )
    scale = max(abs(v) for v in terms)
    return abs(sum(terms)) / scale if scale > 0 else abs(sum(terms))


def write_coeff_csv(coeffs: QuadCoeffs, path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", "A", "b0", "b1", "c0", "c1", "c2"])
        for r, t in enumerate(coeffs.times):
            wr.writerow([repr(float(t))] + [repr(float(arr[r])) for arr in
                                            (coeffs.a, coeffs.b0, coeffs.b1,
                                             coeffs.c0, coeffs.c1, coeffs.c2)])


def write_quadratic_fee_csv(coeffs: QuadCoeffs, lin: LinearizedRates,
                            params: MarketParams, times, ys, s: float, path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", "y", "s", "fee_sell", "fee_buy"])
        for t in times:
            fees = fees_quadratic(coeffs, lin, params, float(t), np.asarray(ys), s)
            for y, fs, fb in zip(np.asarray(ys), np.atleast_1d(fees.fee_sell),
                                 np.atleast_1d(fees.fee_buy)):
                wr.writerow([repr(float(t)), repr(float(y)), repr(float(s)),
                             repr(float(fs)), repr(float(fb))])
