import math
from dataclasses import replace

import pytest

from qds_forge.optimizer import (
    DEFAULT_M,
    N_lattice,
    SearchBounds,
    evaluate,
    minimize_N,
    search,
    sweep,
)
from qds_forge.sns_model import ChannelParams, FailureProbs, SnsParams

FP = FailureProbs()
START = SnsParams(mu=0.4, q=0.05, p_z=0.8)


def test_absurd_distance_is_infeasible():
    pt = evaluate(SnsParams(), ChannelParams(l=1e4), FP)
    assert not pt.feasible and pt.reason
    assert minimize_N(SnsParams(), ChannelParams(l=1e4), FP) is None


def test_doubling_N_halves_R():
    ch = ChannelParams.for_distance(100)
    a = evaluate(replace(START, N=1e11), ch, FP)
    b = evaluate(replace(START, N=2e11), ch, FP)
    assert a.feasible and b.feasible
    assert b.R == a.R / 2 == DEFAULT_M / (2 * 2e11)


def test_feasible_point_meets_target():
    pt = evaluate(replace(START, N=1e11), ChannelParams.for_distance(100), FP)
    assert pt.report.log2_eps <= math.log2(1e-10)
    assert pt.report.epsilon <= 1e-10


@pytest.mark.parametrize("dist", [60.0, 100.0, 200.0])
def test_minimize_N_postconditions(dist):
    ch = ChannelParams.for_distance(dist)
    pt = minimize_N(START, ch, FP)
    assert pt is not None and pt.feasible
    assert not evaluate(replace(START, N=pt.params.N // 2), ch, FP).feasible
    # one lattice step down is already infeasible
    k = round(math.log10(pt.params.N) * 400)
    assert not evaluate(replace(START, N=N_lattice(k - 1, 400)), ch, FP).feasible


def test_feasibility_monotone_in_N_spot_checks():
    ch = ChannelParams.for_distance(150)
    flags = [evaluate(replace(START, N=10.0 ** (e / 4)), ch, FP).feasible for e in range(28, 57)]
    first = flags.index(True)
    assert all(flags[first:])


def test_vacuous_target():
    ch = ChannelParams.for_distance(100)
    pt = minimize_N(START, ch, FP, eps_target=1.0)
    strict = minimize_N(START, ch, FP)
    assert pt.feasible and pt.params.N < strict.params.N
    # below N* the pipeline itself breaks down, not the security target
    below = evaluate(replace(START, N=pt.params.N / 2), ch, FP, eps_target=1.0)
    assert not below.feasible


def test_budget_one_returns_start_evaluation():
    ch = ChannelParams.for_distance(150)
    pt = search(ch, FP, budget=1, start=START)
    direct = evaluate(START, ch, FP)
    assert (pt.params, pt.R, pt.feasible) == (direct.params, direct.R, direct.feasible)
    bad = replace(START, N=1e6)
    pt = search(ch, FP, budget=1, start=bad)
    assert pt.params == bad and not pt.feasible


def test_budget_monotone():
    ch = ChannelParams.for_distance(150)
    prev = 0.0
    for b in (1, 2, 5, 10, 30, 100, 400, 1500):
        pt = search(ch, FP, budget=b, start=START)
        R = pt.R if pt.feasible else 0.0
        assert R >= prev
        prev = R


def test_search_is_deterministic_and_revalidates():
    ch = ChannelParams.for_distance(250)
    a = search(ch, FP, budget=600)
    b = search(ch, FP, budget=600)
    assert a.params == b.params and a.R == b.R
    again = evaluate(a.params, ch, FP)
    assert again.R == a.R and again.report == a.report


def test_search_rejects_zero_budget():
    with pytest.raises(ValueError):
        search(ChannelParams.for_distance(100), FP, budget=0)


def test_search_infeasible_marker():
    pt = search(ChannelParams(l=1e4), FP, budget=50)
    assert not pt.feasible and pt.reason


def test_bounds_respected():
    bounds = SearchBounds(mu=(0.01, 0.5), prob=(0.05, 0.95))
    pt = search(ChannelParams.for_distance(200), FP, budget=800, bounds=bounds)
    p = pt.params
    assert all(0.01 <= v <= 0.5 for v in (p.mu, p.mu1, p.mu2)) and p.mu1 < p.mu2
    assert all(0.05 <= v <= 0.95 for v in (p.q, p.p_z, p.p0, p.p1))


def test_sweep_edge_cases():
    assert sweep([], FP) == []
    one = sweep([150.0], FP, budget=300)
    assert len(one) == 1
    assert one[0].R == search(ChannelParams.for_distance(150), FP, budget=300).R
    with pytest.raises(ValueError):
        sweep([200.0, 100.0], FP)


def test_sweep_keeps_infeasible_tail():
    pts = sweep([200.0, 20000.0], FP, budget=200)
    assert pts[0].feasible and not pts[1].feasible
    assert pts[1].distance_km == 20000.0
