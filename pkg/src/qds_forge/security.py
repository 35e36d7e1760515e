"""Forgery, repudiation and robustness bounds and the overall security level.

Probabilities such as 2**(-10**6) underflow doubles, so every bound is also
returned as a base-2 logarithm and comparisons are made on the logarithms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bitcore import binary_entropy, inverse_binary_entropy
from .lfsr_hash import collision_bound

__all__ = [
    "SecurityReport",
    "guessing_bound",
    "hash_forgery_bound",
    "log2_hash_forgery_bound",
    "security_level",
]


def _exp2(x: float) -> float:
    return 2.0**x if x > -1100 else 0.0


def guessing_bound(n: int, Delta1: float, e_ph: float) -> tuple[float, float, float]:
    """Return ``(p_e, p_g, log2_p_g)``.

    ``p_e`` solves H2(p_e) = Delta1 * (1 - H2(e_ph)); p_g = 2**(-n H2(p_e)).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 <= Delta1 <= 1.0:
        raise ValueError(f"Delta1={Delta1} outside [0, 1]")
    if not 0.0 <= e_ph <= 0.5:
        raise ValueError(f"e_ph={e_ph} outside [0, 0.5]")
    p_e = inverse_binary_entropy(Delta1 * (1.0 - binary_entropy(e_ph)))
    log2_pg = 0.0 - n * binary_entropy(p_e)
    return p_e, _exp2(log2_pg), log2_pg


def log2_hash_forgery_bound(m: int, n: int, log2_nxny: float) -> float:
    """log2 of 1 - (1 - a)(1 - a**2)**(N - 1), a = m / 2**(n-1), N = n_x n_y.

    Writes 1 - p_h = exp(-(u + v)) with u = -ln(1 - a) and
    v = -(N - 1) ln(1 - a**2) and tracks log2 u, log2 v so nothing underflows.
    """
    if m < 1 or n < 2:
        raise ValueError("need m >= 1 and n >= 2")
    if log2_nxny < 0:
        raise ValueError("n_x * n_y must be >= 1")
    log2_a = math.log2(m) - (n - 1)
    if log2_a >= 0.0:
        return 0.0
    if log2_nxny == 0.0:
        return log2_a
    if log2_a > -500.0:
        a = 2.0**log2_a
        log2_u = math.log2(-math.log1p(-a))
    else:
        log2_u = log2_a
    # log2(N - 1)
    if log2_nxny < 60:
        log2_nm1 = log2_nxny + math.log2(-math.expm1(-log2_nxny * math.log(2)))
    else:
        log2_nm1 = log2_nxny
    if 2.0 * log2_a > -1000.0:
        log2_v = log2_nm1 + math.log2(-math.log1p(-(2.0 ** (2.0 * log2_a))))
    else:
        log2_v = log2_nm1 + 2.0 * log2_a
    s = float(np.logaddexp2(log2_u, log2_v))
    if s < -60.0:
        return s
    if s > 10.0:
        return 0.0
    return math.log2(-math.expm1(-(2.0**s)))


def hash_forgery_bound(m: int, n: int, n_x: int, n_y: int) -> float:
    """Upper bound on Charlie accepting a tampered (M', S'); exact n_x, n_y."""
    if n_x < 1 or n_y < 1:
        raise ValueError("likely-set sizes must be >= 1")
    if n_x * n_y == 1:
        return collision_bound(m, n)
    return min(1.0, _exp2(log2_hash_forgery_bound(m, n, math.log2(n_x * n_y))))


@dataclass(frozen=True)
class SecurityReport:
    p_g: float
    p_e: float
    p_h: float
    p_f: float
    p_re: float
    p_ro: float
    epsilon: float
    log2_pg: float
    log2_ph: float
    log2_eps: float
    n: int | None = None
    m: int | None = None
    log2_nx: float | None = None
    log2_ny: float | None = None

    def lines(self) -> list[str]:
        keys = ("p_g", "p_e", "p_h", "p_f", "p_re", "p_ro", "epsilon", "log2_pg", "log2_ph", "log2_eps",
                "n", "m", "log2_nx", "log2_ny")
        out = []
        for k in keys:
            v = getattr(self, k)
            out.append(f"{k}={v if isinstance(v, int) or v is None else format(v, '.17g')}")
        return out


def security_level(
    log2_pg: float,
    log2_ph: float,
    p_e: float = float("nan"),
    **context,
) -> SecurityReport:
    """Assemble the report: p_f = max(p_g, p_h), p_re = p_ro = 0, eps = p_f."""
    if log2_pg > 0 or log2_ph > 0:
        raise ValueError("probabilities must be <= 1")
    log2_pf = max(log2_pg, log2_ph)
    p_f = _exp2(log2_pf)
    return SecurityReport(
        p_g=_exp2(log2_pg),
        p_e=p_e,
        p_h=_exp2(log2_ph),
        p_f=p_f,
        p_re=0.0,
        p_ro=0.0,
        epsilon=p_f,
        log2_pg=log2_pg,
        log2_ph=log2_ph,
        log2_eps=log2_pf,
        **context,
    )
