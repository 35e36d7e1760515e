"""Signature-rate optimization over the SNS protocol settings.

``R = m / (2N)``: for a fixed message length the rate is maximal when the
pulse count N is minimal, so the search is an outer derivative-free search
over intensities and probabilities wrapped around an inner smallest-feasible-N
search on a fixed logarithmic lattice.

The search is deterministic.  ``budget`` counts calls to :func:`evaluate` and
the order of those calls does not depend on the budget, so a larger budget
can only improve the result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

from .bitcore import log2_hamming_ball_size
from .protocol import likely_radius
from .security import SecurityReport, guessing_bound, log2_hash_forgery_bound, security_level
from .sns_model import ChannelParams, FailureProbs, Infeasible, KgpEstimates, SnsParams, estimate

__all__ = [
    "RatePoint",
    "SearchBounds",
    "evaluate",
    "minimize_N",
    "search",
    "sweep",
    "N_lattice",
]

DEFAULT_EPS = 1e-10
DEFAULT_M = 10**20


@dataclass(frozen=True)
class RatePoint:
    distance_km: float
    R: float
    params: SnsParams
    report: Optional[SecurityReport]
    feasible: bool
    reason: str = ""
    estimates: Optional[KgpEstimates] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class SearchBounds:
    mu: tuple[float, float] = (1e-4, 1.0)
    prob: tuple[float, float] = (0.01, 0.99)
    N: tuple[float, float] = (1e8, 1e14)
    # lattice points per decade for N
    resolution: int = 400


def evaluate(
    params: SnsParams,
    ch: ChannelParams,
    fp: FailureProbs,
    m: int = DEFAULT_M,
    eps_target: float = DEFAULT_EPS,
) -> RatePoint:
    """Full pipeline: finite-size estimates, likely-set sizes, security bounds."""
    dist = 2.0 * ch.l
    R = m / (2.0 * params.N)
    try:
        est = estimate(ch, params, fp)
    except Infeasible as exc:
        return RatePoint(dist, R, params, None, False, exc.reason)
    # symmetric links: each of e1..e4 is bounded by E
    if 2.0 * est.E >= 0.5:
        return RatePoint(dist, R, params, None, False, "likely_set_error_too_high", est)
    n = est.n
    log2_nx = log2_hamming_ball_size(n, likely_radius(n, est.E, est.E))
    log2_ny = log2_hamming_ball_size(2 * n, likely_radius(2 * n, est.E, est.E))
    p_e, _, log2_pg = guessing_bound(n, est.Delta1, est.e_ph)
    log2_ph = log2_hash_forgery_bound(m, n, log2_nx + log2_ny)
    report = security_level(log2_pg, log2_ph, p_e, n=n, m=m, log2_nx=log2_nx, log2_ny=log2_ny)
    ok = report.log2_eps <= math.log2(eps_target)
    return RatePoint(dist, R, params, report, ok, "" if ok else "epsilon_above_target", est)


def N_lattice(k: int, resolution: int) -> float:
    return 10.0 ** (k / resolution)


class _Exhausted(Exception):
    pass


class _Evaluator:
    """Budgeted evaluate() with best-so-far bookkeeping."""

    def __init__(self, ch, fp, m, eps_target, budget: Optional[int]):
        self.ch, self.fp, self.m, self.eps = ch, fp, m, eps_target
        self.budget = budget
        self.calls = 0
        self.best_raw: Optional[RatePoint] = None
        self.last: Optional[RatePoint] = None

    def __call__(self, params: SnsParams) -> RatePoint:
        if self.budget is not None and self.calls >= self.budget:
            raise _Exhausted
        self.calls += 1
        pt = evaluate(params, self.ch, self.fp, self.m, self.eps)
        self.last = pt
        if pt.feasible and (self.best_raw is None or pt.params.N < self.best_raw.params.N):
            self.best_raw = pt
        return pt


def _min_k(
    feasible_at: Callable[[int], bool], k_lo: int, k_hi: int, hint: Optional[int], resolution: int
) -> Optional[int]:
    """Smallest lattice index with feasible_at true, assuming monotonicity.

    Indices above k_hi are never tried; below k_lo the search keeps stepping
    down a decade at a time until it finds an infeasible index.
    """
    if hint is None:
        if not feasible_at(k_hi):
            return None
        hi = k_hi
        lo = k_lo
        if feasible_at(lo):
            hi = lo
            while True:
                lo = hi - resolution
                if lo < 0 or not feasible_at(lo):
                    break
                hi = lo
            if lo < 0:
                return hi
    else:
        # gallop outward from the hint
        hint = min(max(hint, 0), k_hi)
        step = 1
        if feasible_at(hint):
            hi = hint
            while True:
                lo = hi - step
                if lo < 0:
                    lo = -1
                    break
                if not feasible_at(lo):
                    break
                hi = lo
                step *= 2
            if lo < 0:
                # walk down to 0 by bisection with the implicit infeasible -1
                lo = -1
        else:
            lo = hint
            while True:
                hi = lo + step
                if hi >= k_hi:
                    if not feasible_at(k_hi):
                        return None
                    hi = k_hi
                    break
                if feasible_at(hi):
                    break
                lo = hi
                step *= 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if mid >= 0 and feasible_at(mid):
            hi = mid
        else:
            lo = mid
    return hi


def _minimize(ev: _Evaluator, params: SnsParams, bounds: SearchBounds, hint: Optional[int] = None):
    res = bounds.resolution
    k_lo = math.ceil(math.log10(bounds.N[0]) * res - 1e-9)
    k_hi = math.floor(math.log10(bounds.N[1]) * res + 1e-9)
    cache: dict[int, RatePoint] = {}

    def feasible_at(k: int) -> bool:
        if k not in cache:
            cache[k] = ev(replace(params, N=N_lattice(k, res)))
        return cache[k].feasible

    k = _min_k(feasible_at, k_lo, k_hi, hint, res)
    if k is None:
        return None
    return k, cache[k]


def minimize_N(
    params: SnsParams,
    ch: ChannelParams,
    fp: FailureProbs,
    m: int = DEFAULT_M,
    eps_target: float = DEFAULT_EPS,
    bounds: SearchBounds = SearchBounds(),
) -> Optional[RatePoint]:
    """Smallest lattice N (other settings fixed) meeting the security target.

    Returns None when even the N cap is infeasible.  The lower end of the N
    range is soft: if it is already feasible the search steps further down.
    """
    ev = _Evaluator(ch, fp, m, eps_target, None)
    out = _minimize(ev, params, bounds)
    return None if out is None else out[1]


# -- outer search -----------------------------------------------------------

_LOG_FIELDS = ("mu", "mu1", "mu2")
_PROB_FIELDS = ("q", "p_z", "p0", "p1")
_FIELDS = _LOG_FIELDS + _PROB_FIELDS


def _encode(p: SnsParams) -> tuple[float, ...]:
    out = [math.log(getattr(p, f)) for f in _LOG_FIELDS]
    out += [math.log(getattr(p, f) / (1.0 - getattr(p, f))) for f in _PROB_FIELDS]
    return tuple(out)


def _decode(z: Sequence[float], template: SnsParams, bounds: SearchBounds) -> Optional[SnsParams]:
    vals = {}
    for f, v in zip(_LOG_FIELDS, z[:3]):
        vals[f] = min(max(math.exp(v), bounds.mu[0]), bounds.mu[1])
    for f, v in zip(_PROB_FIELDS, z[3:]):
        vals[f] = min(max(1.0 / (1.0 + math.exp(-v)), bounds.prob[0]), bounds.prob[1])
    if not vals["mu1"] < vals["mu2"] or not vals["p0"] + vals["p1"] < 1.0:
        return None
    return replace(template, **vals)


def _coarse_starts(template: SnsParams) -> list[SnsParams]:
    out = []
    for mu in (0.1, 0.3, 0.6):
        for q in (0.02, 0.05, 0.1):
            for p_z in (0.5, 0.8):
                out.append(replace(template, mu=mu, q=q, p_z=p_z, mu1=0.05, mu2=0.3, p0=0.3, p1=0.4))
    return out


def _key(k: int, pt: RatePoint) -> tuple:
    return (k, pt.report.log2_eps, tuple(getattr(pt.params, f) for f in _FIELDS))


def search(
    ch: ChannelParams,
    fp: FailureProbs,
    m: int = DEFAULT_M,
    budget: int = 10_000,
    start: Optional[SnsParams] = None,
    eps_target: float = DEFAULT_EPS,
    bounds: SearchBounds = SearchBounds(),
) -> RatePoint:
    """Best feasible RatePoint found within ``budget`` evaluations.

    Order: the start point as given, then smallest-N searches from the start
    and from a fixed coarse grid, then coordinate refinement (halving steps)
    from the best of those.  Returns an infeasible point if nothing works.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    template = start if start is not None else SnsParams(N=bounds.N[1])
    ev = _Evaluator(ch, fp, m, eps_target, budget)
    best: Optional[tuple[tuple, RatePoint]] = None

    def consider(params: SnsParams, hint=None):
        nonlocal best
        out = _minimize(ev, params, bounds, hint)
        if out is None:
            return None
        key = _key(out[0], out[1])
        if best is None or key < best[0]:
            best = (key, out[1])
        return key

    try:
        if start is not None:
            ev(start)
        starts = ([start] if start is not None else []) + _coarse_starts(template)
        for s in starts:
            consider(s)
        if best is not None:
            z = list(_encode(best[1].params))
            step = 0.5
            while step > 1e-3:
                improved = False
                for i in range(len(z)):
                    for sign in (1.0, -1.0):
                        cand = list(z)
                        cand[i] += sign * step
                        p = _decode(cand, best[1].params, bounds)
                        if p is None:
                            continue
                        prev = best[0]
                        consider(p, hint=prev[0])
                        if best[0] < prev:
                            z = list(_encode(best[1].params))
                            improved = True
                            break
                if not improved:
                    step *= 0.5
    except _Exhausted:
        pass

    # the evaluation sequence is a prefix of the unbounded one, so the smallest
    # feasible N seen can only shrink as the budget grows
    raw = ev.best_raw
    if best is not None and (raw is None or best[1].params.N <= raw.params.N):
        return best[1]
    if raw is not None:
        return raw
    if ev.last is not None and start is not None and ev.calls == 1:
        return ev.last
    fallback = evaluate(replace(template, N=bounds.N[1]), ch, fp, m, eps_target)
    return replace(fallback, feasible=False, reason=fallback.reason or "no_feasible_point")


def sweep(
    distances: Sequence[float],
    fp: FailureProbs,
    m: int = DEFAULT_M,
    budget: int = 10_000,
    eps_target: float = DEFAULT_EPS,
    bounds: SearchBounds = SearchBounds(),
    channel: Optional[dict] = None,
    start: Optional[SnsParams] = None,
) -> list[RatePoint]:
    """Optimize at each distance, warm-starting from the previous optimum."""
    if list(distances) != sorted(distances):
        raise ValueError("distances must be sorted ascending")
    out: list[RatePoint] = []
    warm = start
    for d in distances:
        ch = ChannelParams.for_distance(d, **(channel or {}))
        pt = search(ch, fp, m, budget, warm, eps_target, bounds)
        out.append(pt)
        if pt.feasible:
            warm = pt.params
    return out
