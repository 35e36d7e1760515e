"""Finite-size model of the sending-or-not-sending key-generation phase.

Computes, for given channel and protocol settings, the expected counting
rates and effective-event numbers, the bit-flip error rate with its
sampling correction, and the decoy-state/Chernoff estimates of the
single-photon fraction ``Delta1`` and the phase-flip error rate ``e_ph``.

Several of the closed forms subtract two nearly equal exponentials (for
example ``(1-p_d) e^{-x/2} - (1-p_d)^2 e^{-x}`` at small ``x``); they are
evaluated here in algebraically identical ``expm1`` forms so that long
distances do not lose digits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

__all__ = [
    "Infeasible",
    "ChannelParams",
    "SnsParams",
    "FailureProbs",
    "EventCounts",
    "KgpEstimates",
    "bessel_i0",
    "bessel_i0m1",
    "counting_rates",
    "model_decoy_counting_rates",
    "event_counts",
    "bit_flip_error",
    "serfling_margin",
    "chernoff_expected_deltas",
    "chernoff_expected_bounds",
    "chernoff_real_deltas",
    "chernoff_real_bounds",
    "tx_sx",
    "decoy_s1_lower",
    "phase_flip_upper",
    "t_delta_upper",
    "single_photon_fraction_expected",
    "realize_estimates",
    "estimate",
]


class Infeasible(Exception):
    """The configuration cannot produce a meaningful estimate.

    ``reason`` is a short machine-readable code.
    """

    def __init__(self, reason: str, detail: str = ""):
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason
        self.detail = detail


@dataclass(frozen=True)
class ChannelParams:
    """Fiber and detector constants; ``l`` is the source-to-node distance in km."""

    alpha: float = 0.2
    l: float = 50.0
    eta_d: float = 0.5
    p_d: float = 1e-8
    e_d: float = 0.02

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.l < 0:
            raise ValueError("distance must be non-negative")
        if not 0 <= self.eta_d <= 1:
            raise ValueError("eta_d outside [0, 1]")
        if not 0 <= self.p_d < 1:
            raise ValueError("p_d outside [0, 1)")
        if not 0 <= self.e_d < 0.5:
            raise ValueError("e_d outside [0, 0.5)")

    @property
    def eta(self) -> float:
        return 10.0 ** (-self.alpha * self.l / 10.0) * self.eta_d

    @classmethod
    def for_distance(cls, distance_km: float, **kw) -> "ChannelParams":
        """Channel for a full Alice-receiver distance (measurement node midway)."""
        return cls(l=distance_km / 2.0, **kw)


@dataclass(frozen=True)
class SnsParams:
    N: float = 1e12
    mu: float = 0.3
    mu1: float = 0.05
    mu2: float = 0.3
    q: float = 0.05
    p_z: float = 0.7
    p0: float = 0.3
    p1: float = 0.4
    Delta: float = math.pi / 15
    gamma: float = 0.10

    def __post_init__(self):
        for name in ("q", "p_z", "p0", "p1", "gamma"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError(f"{name}={v} outside (0, 1)")
        if not self.p0 + self.p1 < 1:
            raise ValueError("p0 + p1 must be < 1")
        if not 0 < self.mu1 < self.mu2:
            raise ValueError("need 0 < mu1 < mu2")
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if not self.N > 0:
            raise ValueError("N must be positive")
        if not 0 < self.Delta <= 2 * math.pi:
            raise ValueError("Delta outside (0, 2pi]")

    @property
    def p2(self) -> float:
        return 1.0 - self.p0 - self.p1


@dataclass(frozen=True)
class FailureProbs:
    xi: float = 1e-12
    eps_p: float = 1e-10

    def __post_init__(self):
        if not 0 < self.xi < 1 or not 0 < self.eps_p < 1:
            raise ValueError("failure probabilities must lie in (0, 1)")


# -- Bessel I0 -------------------------------------------------------------


def bessel_i0m1(x: float) -> float:
    """I0(x) - 1 without cancellation at small x (power series, x <= 50)."""
    y = 0.25 * x * x
    term = y
    total = 0.0
    k = 1
    while True:
        total += term
        if term <= 1e-17 * total:
            return total
        k += 1
        term *= y / (k * k)


def bessel_i0(x: float) -> float:
    """Modified Bessel function of the first kind, order zero."""
    x = abs(x)
    if x <= 50.0:
        return 1.0 + bessel_i0m1(x)
    # Hankel asymptotic expansion; terms shrink monotonically well past k=20 for x > 50
    z = 8.0 * x
    term = 1.0
    total = 1.0
    for k in range(1, 30):
        term *= (2 * k - 1) ** 2 / (k * z)
        total += term
        if term < 1e-17 * total:
            break
    return math.exp(x) / math.sqrt(2.0 * math.pi * x) * total


# -- counting rates and event numbers ---------------------------------------


def _one_click(p_d: float, x: float) -> float:
    """2[(1-p_d) e^{-x/2} - (1-p_d)^2 e^{-x}], rewritten without cancellation."""
    return 2.0 * (1.0 - p_d) * math.exp(-x) * (math.expm1(0.5 * x) + p_d)


def counting_rates(ch: ChannelParams, p: SnsParams) -> tuple[float, float, float]:
    """(S_C, S_D, S_V): one sender, both senders, neither sender."""
    x = ch.eta * p.mu
    pd = ch.p_d
    s_c = _one_click(pd, x)
    # e^x I0(x) - 1 = expm1(x) I0(x) + (I0(x) - 1)
    ex_i0_m1 = math.expm1(x) * bessel_i0(x) + bessel_i0m1(x)
    s_d = 2.0 * (1.0 - pd) * math.exp(-2.0 * x) * (ex_i0_m1 + pd)
    s_v = 2.0 * pd * (1.0 - pd)
    return s_c, s_d, s_v


def model_decoy_counting_rates(ch: ChannelParams, p: SnsParams) -> tuple[float, float, float, float, float]:
    """Forward model for (S_00, S_01, S_10, S_02, S_20) of the decoy windows."""
    pd = ch.p_d
    s00 = 2.0 * pd * (1.0 - pd)
    s01 = _one_click(pd, ch.eta * p.mu1)
    s02 = _one_click(pd, ch.eta * p.mu2)
    return s00, s01, s01, s02, s02


@dataclass(frozen=True)
class EventCounts:
    n_C: float
    n_D: float
    n_V: float
    N_t: float
    T: float
    n: int


def event_counts(p: SnsParams, rates: tuple[float, float, float]) -> EventCounts:
    s_c, s_d, s_v = rates
    base = p.N * p.p_z**2
    n_c = 2.0 * base * p.q * (1.0 - p.q) * s_c
    n_d = base * p.q**2 * s_d
    n_v = base * (1.0 - p.q) ** 2 * s_v
    n_t = n_c + n_d + n_v
    t = p.gamma * n_t
    if not n_t > t:
        raise Infeasible("no_events", f"N_t={n_t}")
    n = math.floor((n_t - t) / 3.0)
    if n < 1:
        raise Infeasible("no_events", f"n={n}")
    return EventCounts(n_c, n_d, n_v, n_t, t, n)


def bit_flip_error(n_D: float, n_V: float, N_t: float) -> float:
    if not N_t > 0:
        raise ValueError("N_t must be positive")
    return (n_D + n_V) / N_t


def serfling_margin(n: float, T: float, eps_p: float) -> float:
    """sqrt((n - T + 1) ln(1/eps_p) / (2 n T))."""
    if not n >= 1 or not T >= 1:
        raise ValueError("need n >= 1 and T >= 1")
    if not 0 < eps_p <= 1:
        raise ValueError("eps_p outside (0, 1]")
    if n - T + 1 < 0:
        raise ValueError("n - T + 1 must be non-negative")
    return math.sqrt((n - T + 1) * -math.log(eps_p) / (2.0 * n * T))


# -- Chernoff bounds -------------------------------------------------------
#
# Each defining equation is written as  scale * rate(delta) = ln(xi / 2)  with
# rate(0) = 0 and rate strictly decreasing, so bisection applies.  Near 0 the
# rate functions are O(delta^2) differences of O(delta) terms; power series
# are used there.

_SERIES_CUTOFF = 0.01


def _series(d: float, coef) -> float:
    acc = 0.0
    for c in reversed(coef):
        acc = acc * d + c
    return acc * d * d


# coefficients of d^k for k = 2..13
_K = range(2, 14)
_C_EXP_LOWER = [(-1) ** k * (k - 1) / k for k in _K]  # ln(1+d) - d/(1+d)
_C_EXP_UPPER = [(k - 1) / k for k in _K]  # d/(1-d) + ln(1-d)
_C_REAL_UPPER = [(-1) ** k / (k * (k - 1)) for k in _K]  # (1+d) ln(1+d) - d
_C_REAL_LOWER = [1.0 / (k * (k - 1)) for k in _K]  # (1-d) ln(1-d) + d


def _rate_exp_lower(d: float) -> float:
    # ln[(e^d / (1+d)^(1+d))^(1/(1+d))]
    if d < _SERIES_CUTOFF:
        return -_series(d, _C_EXP_LOWER)
    return d / (1.0 + d) - math.log1p(d)


def _rate_exp_upper(d: float) -> float:
    # ln[(e^-d / (1-d)^(1-d))^(1/(1-d))]
    if d < _SERIES_CUTOFF:
        return -_series(d, _C_EXP_UPPER)
    return -d / (1.0 - d) - math.log1p(-d)


def _rate_real_upper(d: float) -> float:
    # ln[e^d / (1+d)^(1+d)]
    if d < _SERIES_CUTOFF:
        return -_series(d, _C_REAL_UPPER)
    return d - (1.0 + d) * math.log1p(d)


def _rate_real_lower(d: float) -> float:
    # ln[e^-d / (1-d)^(1-d)]
    if d < _SERIES_CUTOFF:
        return -_series(d, _C_REAL_LOWER)
    if d >= 1.0:
        return -1.0
    return -d - (1.0 - d) * math.log1p(-d)


_REL_TOL = 1e-10


def _bisect(rate, scale: float, target: float, upper: float | None) -> float:
    """Solve scale * rate(d) = target (< 0) for d > 0.

    ``upper`` is an exclusive bound on d (1 for the lower-tail equations), or
    None for an unbounded bracket that is grown by doubling.
    """
    # initial guess from the quadratic approximation rate(d) ~ -d^2 / 2
    guess = math.sqrt(-2.0 * target / scale)
    lo = 0.0
    hi = guess if upper is None else min(guess, 0.5 * upper)
    while scale * rate(hi) > target:
        lo = hi
        if upper is None:
            hi *= 2.0
        else:
            hi = 0.5 * (hi + upper)
            if upper - hi < 1e-16:
                return hi
    while hi - lo > _REL_TOL * hi:
        mid = 0.5 * (lo + hi)
        if scale * rate(mid) > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _check_xi(xi: float) -> float:
    # xi = 2 is the degenerate per-tail target 1, where every delta is 0
    if not 0 < xi <= 2:
        raise ValueError(f"xi={xi} outside (0, 2]")
    return math.log(xi / 2.0)


def chernoff_expected_deltas(X: float, xi: float) -> tuple[float, float]:
    """(delta_1, delta_2) for estimating an expectation from an observed count X."""
    target = _check_xi(xi)
    if not X > 0:
        raise Infeasible("zero_count", f"X={X}")
    if target == 0.0:
        return 0.0, 0.0
    d1 = _bisect(_rate_exp_lower, X, target, None)
    d2 = _bisect(_rate_exp_upper, X, target, 1.0)
    return d1, d2


def chernoff_expected_bounds(X: float, xi: float) -> tuple[float, float]:
    """(phi_L, phi_U) = (X / (1 + delta_1), X / (1 - delta_2))."""
    d1, d2 = chernoff_expected_deltas(X, xi)
    return X / (1.0 + d1), X / (1.0 - d2)


def chernoff_real_deltas(Y: float, xi: float) -> tuple[float, float | None]:
    """(delta'_1, delta'_2) for bounding a realized count around expectation Y.

    delta'_2 is None when its equation has no root in (0, 1), which happens
    for Y <= ln(2 / xi).
    """
    target = _check_xi(xi)
    if not Y > 0:
        raise Infeasible("zero_count", f"Y={Y}")
    if target == 0.0:
        return 0.0, 0.0
    d1 = _bisect(_rate_real_upper, Y, target, None)
    d2 = None if -Y >= target else _bisect(_rate_real_lower, Y, target, 1.0)
    return d1, d2


def chernoff_real_bounds(Y: float, xi: float) -> tuple[float, float]:
    """(varphi_L, varphi_U) = ((1 - delta'_2) Y, (1 + delta'_1) Y)."""
    d1, d2 = chernoff_real_deltas(Y, xi)
    if d2 is None:
        raise Infeasible("chernoff_no_root", f"Y={Y} <= ln(2/xi)")
    return (1.0 - d2) * Y, (1.0 + d1) * Y


# -- phase-error estimation ---------------------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


def _panel_average(f, half_width: float, panels: int) -> float:
    """Mean of f over [-half_width, half_width] by composite 16-point Gauss-Legendre."""
    edges = np.linspace(-half_width, half_width, panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    rad = 0.5 * (edges[1:] - edges[:-1])
    pts = (mid[:, None] + rad[:, None] * _GL_NODES[None, :]).ravel()
    w = (rad[:, None] * _GL_WEIGHTS[None, :]).ravel()
    return float(np.dot(w, f(pts))) / (2.0 * half_width)


def _average(f, half_width: float, tol: float = 1e-14) -> float:
    panels = 1
    coarse = _panel_average(f, half_width, panels)
    while True:
        panels *= 2
        fine = _panel_average(f, half_width, panels)
        if abs(fine - coarse) <= tol or panels >= 1024:
            return fine
        coarse = fine


@lru_cache(maxsize=4096)
def _tx_sx_cached(eta: float, mu1: float, p_d: float, delta: float) -> tuple[float, float]:
    a = 2.0 * eta * mu1
    half = 0.5 * delta
    # (1/Delta) int e^{-a cos^2} - (1-p_d) e^{-a} = e^{-a} [avg expm1(a sin^2) + p_d]
    avg_s = _average(lambda d: np.expm1(a * np.sin(0.5 * d) ** 2), half)
    avg_c = _average(lambda d: np.expm1(a * np.cos(0.5 * d) ** 2), half)
    scale = (1.0 - p_d) * math.exp(-a)
    t_x = scale * (avg_s + p_d)
    s_x = scale * (avg_c + p_d) + t_x
    return t_x, s_x


def tx_sx(ch: ChannelParams, p: SnsParams) -> tuple[float, float]:
    return _tx_sx_cached(ch.eta, p.mu1, ch.p_d, p.Delta)


def decoy_s1_lower(
    S01_L: float,
    S10_L: float,
    S02_U: float,
    S20_U: float,
    S00_U: float,
    mu1: float,
    mu2: float,
) -> tuple[float, bool]:
    """Lower bound on the single-photon counting rate, ``(s1_L, clamped)``.

    Inputs are already Chernoff-adjusted rates (lower bounds where the
    decoy formula adds, upper bounds where it subtracts).
    """
    if not 0 < mu1 < mu2:
        raise ValueError("need 0 < mu1 < mu2")
    den = mu1 * mu2 * (mu2 - mu1)
    k1 = mu2 * mu2 * math.exp(mu1)
    k2 = mu1 * mu1 * math.exp(mu2)
    k0 = mu2 * mu2 - mu1 * mu1
    s01 = (k1 * S01_L - k2 * S02_U - k0 * S00_U) / den
    s10 = (k1 * S10_L - k2 * S20_U - k0 * S00_U) / den
    s1 = 0.5 * (s01 + s10)
    if s1 < 0.0:
        return 0.0, True
    if s1 > 1.0:
        return 1.0, True
    return s1, False


def phase_flip_upper(T_Delta_U: float, S00_L: float, s1_L: float, mu1: float) -> tuple[float, bool]:
    """Upper bound on the expected phase-flip rate, ``(e_ph_U, clamped)``."""
    if not s1_L > 0:
        raise Infeasible("no_single_photons", "s1_L = 0")
    g = math.exp(-2.0 * mu1)
    v = (T_Delta_U - 0.5 * g * S00_L) / (2.0 * mu1 * g * s1_L)
    if v < 0.0:
        return 0.0, True
    if v > 0.5:
        return 0.5, True
    return v, False


def t_delta_upper(ch: ChannelParams, p: SnsParams, xi: float) -> float:
    n_win = p.Delta / (2.0 * math.pi) * (1.0 - p.p_z) ** 2 * p.p1**2 * p.N
    if n_win < 1.0:
        raise Infeasible("no_phase_windows", f"N_Delta={n_win}")
    t_x, s_x = tx_sx(ch, p)
    per_side = (t_x * (1.0 - 2.0 * ch.e_d) + ch.e_d * s_x) * n_win
    _, phi_u = chernoff_expected_bounds(2.0 * per_side, xi)
    return phi_u / (2.0 * n_win)


def single_photon_fraction_expected(p: SnsParams, s1_L: float, N_t: float) -> float:
    return 2.0 * p.N * p.p_z**2 * p.q * (1.0 - p.q) * p.mu * math.exp(-p.mu) * s1_L / N_t


def realize_estimates(
    delta1_expected: float, eph_expected: float, n: int, xi: float
) -> tuple[float, float, list[str]]:
    """Turn expected-value bounds into realized (Delta1, e_ph) for n bits.

    Returns the two values and a list of clamp diagnostics.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    notes: list[str] = []
    if delta1_expected <= 0.0:
        raise Infeasible("no_single_photons", "expected Delta1 = 0")
    lo, _ = chernoff_real_bounds(n * delta1_expected, xi)
    d1 = lo / n
    if d1 > 1.0:
        notes.append("delta1_clamped")
        d1 = 1.0
    if not d1 > 0.0:
        raise Infeasible("no_single_photons", "realized Delta1 = 0")
    y = n * d1 * eph_expected
    if y > 0.0:
        _, hi = chernoff_real_bounds(y, xi)
        e_ph = hi / (n * d1)
    else:
        e_ph = 0.0
    if e_ph > 0.5:
        notes.append("eph_clamped")
        e_ph = 0.5
    return d1, e_ph, notes


@dataclass
class KgpEstimates:
    S_C: float
    S_D: float
    S_V: float
    counts: EventCounts
    E_T: float
    E: float
    s01_L: float
    s10_L: float
    s1_L: float
    T_X: float
    S_X: float
    N_Delta: float
    T_Delta_U: float
    eph_U: float
    delta1_L: float
    Delta1: float
    e_ph: float
    diagnostics: list[str] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.counts.n


def estimate(ch: ChannelParams, p: SnsParams, fp: FailureProbs) -> KgpEstimates:
    """Run the whole finite-size pipeline; raises Infeasible on dead ends."""
    notes: list[str] = []
    rates = counting_rates(ch, p)
    counts = event_counts(p, rates)
    e_t = bit_flip_error(counts.n_D, counts.n_V, counts.N_t)
    if counts.T < 1.0:
        raise Infeasible("no_events", f"T={counts.T}")
    e = e_t + serfling_margin(counts.n, counts.T, fp.eps_p)
    if e >= 0.5:
        raise Infeasible("bit_error_too_high", f"E={e}")

    s00, s01, s10, s02, s20 = model_decoy_counting_rates(ch, p)
    w = p.N * (1.0 - p.p_z) ** 2
    n00 = w * p.p0 * p.p0
    n01 = w * p.p0 * p.p1
    n02 = w * p.p0 * p.p2

    def lower(rate, windows):
        return chernoff_expected_bounds(rate * windows, fp.xi)[0] / windows

    def upper(rate, windows):
        return chernoff_expected_bounds(rate * windows, fp.xi)[1] / windows

    S01_L, S10_L = lower(s01, n01), lower(s10, n01)
    S02_U, S20_U = upper(s02, n02), upper(s20, n02)
    S00_L, S00_U = chernoff_expected_bounds(s00 * n00, fp.xi)
    S00_L /= n00
    S00_U /= n00

    den = p.mu1 * p.mu2 * (p.mu2 - p.mu1)
    k1 = p.mu2**2 * math.exp(p.mu1)
    k2 = p.mu1**2 * math.exp(p.mu2)
    k0 = p.mu2**2 - p.mu1**2
    s01_l = (k1 * S01_L - k2 * S02_U - k0 * S00_U) / den
    s10_l = (k1 * S10_L - k2 * S20_U - k0 * S00_U) / den
    s1_l, clamped = decoy_s1_lower(S01_L, S10_L, S02_U, S20_U, S00_U, p.mu1, p.mu2)
    if clamped:
        notes.append("s1_clamped")

    t_x, s_x = tx_sx(ch, p)
    n_win = p.Delta / (2.0 * math.pi) * (1.0 - p.p_z) ** 2 * p.p1**2 * p.N
    t_du = t_delta_upper(ch, p, fp.xi)
    eph_u, clamped = phase_flip_upper(t_du, S00_L, s1_l, p.mu1)
    if clamped:
        notes.append("eph_expected_clamped")

    d1_l = single_photon_fraction_expected(p, s1_l, counts.N_t)
    if d1_l > 1.0:
        notes.append("delta1_expected_clamped")
        d1_l = 1.0
    d1, e_ph, more = realize_estimates(d1_l, eph_u, counts.n, fp.xi)
    notes.extend(more)
    return KgpEstimates(
        *rates, counts, e_t, e, s01_l, s10_l, s1_l, t_x, s_x, n_win, t_du, eph_u, d1_l, d1, e_ph, notes
    )
