import math

import mpmath as mp
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from qds_forge.sns_model import (
    ChannelParams,
    FailureProbs,
    Infeasible,
    SnsParams,
    bessel_i0,
    bit_flip_error,
    chernoff_expected_bounds,
    chernoff_expected_deltas,
    chernoff_real_bounds,
    chernoff_real_deltas,
    counting_rates,
    decoy_s1_lower,
    estimate,
    event_counts,
    model_decoy_counting_rates,
    phase_flip_upper,
    realize_estimates,
    serfling_margin,
    t_delta_upper,
    tx_sx,
)

TABLE1 = ChannelParams()
GRID = [(d, mu) for d in (0.0, 50.0, 150.0, 300.0, 600.0) for mu in (0.01, 0.1, 0.4, 1.0)]


def rel(got, want):
    return oracles.rel_err(got, want)


@pytest.mark.parametrize("x", [0.0, 1e-9, 1e-3, 0.5, 1.0, 3.7, 10.0, 25.0, 49.9, 50.0, 50.1, 80.0, 300.0])
def test_bessel_i0(x):
    assert rel(bessel_i0(x), mp.besseli(0, x)) <= 1e-12


def test_bessel_known_values():
    assert bessel_i0(0.0) == 1.0
    assert bessel_i0(1.0) == pytest.approx(1.2660658777520082, rel=1e-15)
    assert bessel_i0(10.0) == pytest.approx(2815.716628466254, rel=1e-13)


@pytest.mark.parametrize("dist,mu", GRID)
def test_counting_rates_oracle(dist, mu):
    ch = ChannelParams.for_distance(dist)
    got = counting_rates(ch, SnsParams(mu=mu))
    want = oracles.counting_rates(oracles.eta(ch.alpha, ch.l, ch.eta_d), mu, ch.p_d)
    for g, w in zip(got, want):
        assert rel(g, w) <= 1e-10


def test_counting_rates_degenerate():
    s_c, s_d, s_v = counting_rates(ChannelParams(eta_d=0.0), SnsParams())
    assert rel(s_c, s_v) <= 1e-10 and rel(s_d, s_v) <= 1e-10
    assert counting_rates(ChannelParams(p_d=0.0), SnsParams(mu=1e-300)) == pytest.approx((0, 0, 0), abs=1e-299)


def test_decoy_forward_model_identities():
    ch = ChannelParams.for_distance(120)
    p = SnsParams(mu=0.3, mu1=0.05, mu2=0.3)
    s00, s01, s10, s02, s20 = model_decoy_counting_rates(ch, p)
    s_c, _, s_v = counting_rates(ch, p)
    assert s00 == s_v and s01 == s10 and s02 == s20
    assert s02 == s_c


def test_event_counts_formulas():
    ch = ChannelParams.for_distance(200)
    p = SnsParams(N=1e12, p_z=0.7, q=0.3)
    rates = counting_rates(ch, p)
    c = event_counts(p, rates)
    N, pz, q = mp.mpf(p.N), mp.mpf(p.p_z), mp.mpf(p.q)
    want_c = 2 * N * pz**2 * q * (1 - q) * rates[0]
    want_d = N * pz**2 * q**2 * rates[1]
    want_v = N * pz**2 * (1 - q) ** 2 * rates[2]
    for g, w in [(c.n_C, want_c), (c.n_D, want_d), (c.n_V, want_v)]:
        assert rel(g, w) <= 1e-14
    assert c.T == pytest.approx(0.1 * c.N_t, rel=1e-15)
    assert c.n == math.floor((c.N_t - c.T) / 3)


def test_event_counts_no_events():
    with pytest.raises(Infeasible) as err:
        event_counts(SnsParams(N=1.0), (1e-12, 1e-12, 1e-12))
    assert err.value.reason == "no_events"


def test_bit_flip_error():
    assert bit_flip_error(0, 0, 10) == 0
    assert bit_flip_error(3, 7, 10) == 1.0
    assert bit_flip_error(2.5, 1.5, 16.0) == 0.25
    with pytest.raises(ValueError):
        bit_flip_error(0, 0, 0)


@pytest.mark.parametrize("n,T,eps", [(10**6, 10**5, 1e-10), (10, 10, 0.3), (12345, 17, 1e-3), (1e9, 2e8, 1e-10)])
def test_serfling_oracle(n, T, eps):
    assert rel(serfling_margin(n, T, eps), oracles.serfling(n, T, eps)) <= 1e-13


def test_serfling_edges():
    assert serfling_margin(100, 10, 1.0) == 0.0
    assert serfling_margin(50, 50, 1e-10) == pytest.approx(math.sqrt(math.log(1e10) / (2 * 50 * 50)), rel=1e-15)
    with pytest.raises(ValueError):
        serfling_margin(0, 1, 0.5)


@pytest.mark.parametrize("X", [3.0, 1e2, 1e4, 1e6, 1e9, 1e13])
def test_chernoff_expected_oracle(X):
    d1, d2 = chernoff_expected_deltas(X, 1e-12)
    w1, w2 = oracles.chernoff_expected(X, 1e-12)
    assert rel(d1, w1) <= 1e-10 and rel(d2, w2) <= 1e-10


@pytest.mark.parametrize("Y", [60.0, 1e3, 1e5, 1e8, 1e12])
def test_chernoff_real_oracle(Y):
    d1, d2 = chernoff_real_deltas(Y, 1e-12)
    w1, w2 = oracles.chernoff_real(Y, 1e-12)
    assert rel(d1, w1) <= 1e-10 and rel(d2, w2) <= 1e-10


def test_chernoff_real_no_lower_root():
    # Y <= ln(2/xi) leaves the lower-tail equation without a root in (0, 1)
    assert chernoff_real_deltas(10.0, 1e-12)[1] is None
    with pytest.raises(Infeasible):
        chernoff_real_bounds(10.0, 1e-12)


@pytest.mark.parametrize("X", [1e3, 1e6, 1e9])
def test_sandwiches(X):
    lo, hi = chernoff_expected_bounds(X, 1e-12)
    assert lo < X < hi
    lo, hi = chernoff_real_bounds(X, 1e-12)
    assert lo < X < hi


def test_relative_width_shrinks():
    def width(X):
        lo, hi = chernoff_expected_bounds(X, 1e-12)
        return (hi - lo) / X

    assert width(1e8) < width(1e4)


def test_chernoff_degenerate_xi():
    assert chernoff_expected_bounds(1234.5, 2.0) == (1234.5, 1234.5)
    assert chernoff_real_bounds(1234.5, 2.0) == (1234.5, 1234.5)
    with pytest.raises(ValueError):
        chernoff_expected_bounds(10.0, 0.0)
    with pytest.raises(Infeasible):
        chernoff_expected_bounds(0.0, 1e-12)


@given(st.floats(1.0, 1e14), st.floats(1e-15, 0.9))
def test_chernoff_widths_shrink_as_xi_grows(X, xi):
    lo1, hi1 = chernoff_expected_bounds(X, xi)
    lo2, hi2 = chernoff_expected_bounds(X, min(2.0, 2 * xi))
    assert lo1 <= lo2 * (1 + 1e-9) and hi2 <= hi1 * (1 + 1e-9)
    assert lo1 < X < hi1


@pytest.mark.parametrize("dist,mu1", [(d, m) for d in (0.0, 200.0, 400.0) for m in (0.01, 0.05, 0.2)])
def test_tx_sx_oracle(dist, mu1):
    ch = ChannelParams.for_distance(dist)
    p = SnsParams(mu1=mu1, mu2=max(0.3, 2 * mu1))
    got = tx_sx(ch, p)
    want = oracles.tx_sx(oracles.eta(ch.alpha, ch.l, ch.eta_d), mu1, ch.p_d, p.Delta)
    assert rel(got[0], want[0]) <= 1e-10 and rel(got[1], want[1]) <= 1e-10


def test_tx_riemann_sum_at_200km():
    ch = ChannelParams.for_distance(200)
    p = SnsParams(mu1=0.05)
    a = 2 * ch.eta * p.mu1
    K = 10**6
    D = p.Delta
    # midpoint sum of (1 - p_d) e^{-a cos^2(d/2)} minus the constant, in terms of expm1 to keep digits
    s = math.fsum(math.expm1(a * math.sin(0.5 * (-D / 2 + (k + 0.5) * D / K)) ** 2) for k in range(K)) / K
    t_x = (1 - ch.p_d) * math.exp(-a) * (s + ch.p_d)
    assert tx_sx(ch, p)[0] == pytest.approx(t_x, rel=1e-10)


def test_tx_sx_degenerate_limits():
    ch = ChannelParams.for_distance(100)
    p = SnsParams(Delta=1e-9)
    a = 2 * ch.eta * p.mu1
    t_x, _ = tx_sx(ch, p)
    # (1-p_d) e^{-a} - (1-p_d)^2 e^{-a}, written without cancellation
    want = (1 - ch.p_d) * ch.p_d * math.exp(-a)
    assert rel(t_x, want) <= 1e-10
    t_x, _ = tx_sx(ChannelParams(eta_d=0.0), SnsParams())
    assert rel(t_x, (1 - 1e-8) * 1e-8) <= 1e-10


# s1 well above the rounding floor of s0 / (mu1 (mu2 - mu1)); below it the inversion is ill-conditioned
@given(st.floats(0.0, 1e-3), st.floats(1e-5, 1e-3), st.floats(1e-2, 0.5), st.floats(1e-2, 0.5))
def test_decoy_inversion_recovers_s1(s0, s1, mu1, gap):
    mu2 = mu1 + gap
    # linear photon-number model: e^{mu} S_0k = S_00 + mu s1
    rate = lambda mu: math.exp(-mu) * (s0 + mu * s1)
    got, clamped = decoy_s1_lower(rate(mu1), rate(mu1), rate(mu2), rate(mu2), s0, mu1, mu2)
    assert not clamped
    assert got == pytest.approx(s1, rel=1e-9)


def test_decoy_oracle_and_clamps():
    args = (2.1e-5, 2.0e-5, 1.1e-4, 1.2e-4, 2e-8, 0.05, 0.3)
    got, _ = decoy_s1_lower(*args)
    assert rel(got, oracles.decoy_s1(*args[:5], 0.05, 0.3)) <= 1e-12
    assert decoy_s1_lower(0, 0, 0, 0, 0, 0.1, 0.2) == (0.0, False)
    assert decoy_s1_lower(0, 0, 1e-3, 1e-3, 0, 0.1, 0.2) == (0.0, True)
    with pytest.raises(ValueError):
        decoy_s1_lower(0, 0, 0, 0, 0, 0.2, 0.2)


def test_decoy_monotone_in_s02():
    base = decoy_s1_lower(2.1e-5, 2.0e-5, 1.1e-4, 1.2e-4, 2e-8, 0.05, 0.3)[0]
    more = decoy_s1_lower(2.1e-5, 2.0e-5, 1.2e-4, 1.2e-4, 2e-8, 0.05, 0.3)[0]
    assert more < base


def test_phase_flip_upper():
    mu1, s00, s1 = 0.05, 2e-8, 1e-3
    g = math.exp(-2 * mu1)
    assert phase_flip_upper(0.5 * g * s00, s00, s1, mu1) == (0.0, False)
    top = 0.5 * g * s00 + 0.5 * (2 * mu1 * g * s1)
    assert phase_flip_upper(top, s00, s1, mu1)[0] == pytest.approx(0.5, rel=1e-14)
    t = 3e-6
    assert phase_flip_upper(t, s00, s1, mu1)[0] == pytest.approx((t - 0.5 * g * s00) / (2 * mu1 * g * s1), rel=1e-15)
    assert phase_flip_upper(1.0, s00, s1, mu1) == (0.5, True)
    with pytest.raises(Infeasible):
        phase_flip_upper(t, s00, 0.0, mu1)


def test_t_delta_upper_composition():
    ch = ChannelParams.for_distance(200)
    p = SnsParams()
    xi = 1e-12
    n_win = p.Delta / (2 * math.pi) * (1 - p.p_z) ** 2 * p.p1**2 * p.N
    t_x, s_x = oracles.tx_sx(oracles.eta(ch.alpha, ch.l, ch.eta_d), p.mu1, ch.p_d, p.Delta)
    side = (t_x * (1 - 2 * ch.e_d) + ch.e_d * s_x) * n_win
    d1, d2 = oracles.chernoff_expected(2 * side, xi)
    assert rel(t_delta_upper(ch, p, xi), 2 * side / (1 - d2) / (2 * n_win)) <= 1e-9


def test_t_delta_upper_misalignment_half():
    ch = ChannelParams.for_distance(100, e_d=0.4999999)
    p = SnsParams()
    _, s_x = tx_sx(ch, p)
    n_win = p.Delta / (2 * math.pi) * (1 - p.p_z) ** 2 * p.p1**2 * p.N
    want = chernoff_expected_bounds(2 * 0.4999999 * s_x * n_win + 2 * tx_sx(ch, p)[0] * 2e-7 * n_win, 1e-12)[1]
    assert t_delta_upper(ch, p, 1e-12) == pytest.approx(want / (2 * n_win), rel=1e-12)


def test_t_delta_too_few_windows():
    with pytest.raises(Infeasible) as err:
        t_delta_upper(TABLE1, SnsParams(N=10.0), 1e-12)
    assert err.value.reason == "no_phase_windows"


def test_realize_estimates():
    d1, e_ph, notes = realize_estimates(0.3, 0.04, 10**7, 1e-12)
    y = 10**7 * 0.3
    assert rel(d1, (1 - oracles.chernoff_real(y, 1e-12)[1]) * y / 10**7) <= 1e-10
    y2 = 10**7 * d1 * 0.04
    assert rel(e_ph, (1 + oracles.chernoff_real(y2, 1e-12)[0]) * y2 / (10**7 * d1)) <= 1e-10
    assert notes == []


def test_realize_degenerate_xi_and_zero():
    assert realize_estimates(0.3, 0.04, 1000, 2.0)[:2] == (0.3, 0.04)
    with pytest.raises(Infeasible) as err:
        realize_estimates(0.0, 0.04, 1000, 1e-12)
    assert err.value.reason == "no_single_photons"


def test_full_pipeline_100km():
    ch = ChannelParams.for_distance(100)
    p = SnsParams(N=1e11, mu=0.4, q=0.05, p_z=0.8)
    est = estimate(ch, p, FailureProbs())
    assert 0 <= est.E_T <= est.E < 0.5
    assert 0 < est.Delta1 <= 1 and 0 <= est.e_ph <= 0.5
    assert est.n == math.floor((est.counts.N_t - est.counts.T) / 3)
    # recompose the final step from the intermediates
    d1, e_ph, _ = realize_estimates(est.delta1_L, est.eph_U, est.n, 1e-12)
    assert (d1, e_ph) == (est.Delta1, est.e_ph)
    assert est.s1_L == pytest.approx(0.5 * (est.s01_L + est.s10_L), rel=1e-15)


def test_s1_nonincreasing_with_distance():
    p = SnsParams(N=1e12)
    prev = math.inf
    for d in range(0, 501, 25):
        s1 = estimate(ChannelParams.for_distance(d), p, FailureProbs()).s1_L
        assert s1 <= prev
        prev = s1


def test_extreme_distance_is_infeasible():
    with pytest.raises(Infeasible):
        estimate(ChannelParams(l=1e4), SnsParams(), FailureProbs())


@pytest.mark.parametrize(
    "kw", [dict(alpha=0.0), dict(l=-1.0), dict(eta_d=1.5), dict(p_d=1.0), dict(e_d=0.5)]
)
def test_channel_validation(kw):
    with pytest.raises(ValueError):
        ChannelParams(**kw)


@pytest.mark.parametrize(
    "kw", [dict(q=0.0), dict(p0=0.6, p1=0.4), dict(mu1=0.3, mu2=0.3), dict(N=0.0), dict(Delta=0.0), dict(mu=0.0)]
)
def test_sns_validation(kw):
    with pytest.raises(ValueError):
        SnsParams(**kw)
