"""
Closed-form rate analysis: how much redundancy a random binary code needs,
the asymptotic rate bound, and the largest useful code rate once payload
expansion raises the collision loss.
"""
import math

import numpy as np
from pydantic import BaseModel

SCAN_STEP = 1e-3
TOLERANCE = 1e-6


class FeasibilityResult(BaseModel):
    p_e: float
    r_max: float | None  # None: no rate can recover losses on average
    threshold_used: float

    @property
    def feasible(self) -> bool:
        return self.r_max is not None


def full_rank_excess(delta: float) -> float:
    """Extra columns N − K so a random K×N binary matrix has full rank w.p. ≥ 1 − δ"""
    if not 0.0 < delta <= 1.0:
        raise ValueError(f"failure probability {delta} outside (0, 1]")
    return -math.log2(delta)


def required_received_symbols(k: int, delta: float) -> int:
    """Smallest N with N ≥ K + log2(1/δ)"""
    return k + math.ceil(full_rank_excess(delta))


def asymptotic_rate_bound(p_e: float, n: int, delta: float) -> float:
    """R ≤ n(1 − p_e) / (n − log2 δ), tending to 1 − p_e as n grows"""
    if n < 1:
        raise ValueError("n must be at least 1")
    if not 0.0 <= p_e < 1.0:
        raise ValueError(f"loss probability {p_e} outside [0, 1)")
    return n * (1.0 - p_e) / (n + full_rank_excess(delta))


def _margin(rate: np.ndarray | float, p_e: float) -> np.ndarray | float:
    # g(R) = (1 − p_e)^(1/R) − R; a rate is usable while g > 0
    return (1.0 - p_e) ** (1.0 / rate) - rate


def feasibility_threshold() -> float:
    """Loss where g touches zero (g = g' = 0 at R = 1/e): 1 − exp(−1/e)"""
    return 1.0 - math.exp(-1.0 / math.e)


def max_effective_rate(p_e: float) -> FeasibilityResult:
    """
    Largest R in (0, 1) with R < (1 − p_e)^(1/R). A coarse scan brackets the
    upper root of g, bisection refines it, and the tolerance is subtracted so
    the returned rate sits strictly inside the feasible set.
    """
    if not 0.0 <= p_e < 1.0:
        raise ValueError(f"loss probability {p_e} outside [0, 1)")
    threshold = feasibility_threshold()
    if p_e == 0.0:
        return FeasibilityResult(p_e=p_e, r_max=1.0, threshold_used=threshold)

    grid = np.arange(SCAN_STEP, 1.0 + SCAN_STEP / 2, SCAN_STEP)
    positive = np.nonzero(_margin(grid, p_e) > 0)[0]
    if positive.size == 0:
        return FeasibilityResult(p_e=p_e, r_max=None, threshold_used=threshold)

    lo = float(grid[positive[-1]])
    hi = min(1.0, lo + SCAN_STEP)
    while hi - lo > TOLERANCE:
        mid = 0.5 * (lo + hi)
        if _margin(mid, p_e) > 0:
            lo = mid
        else:
            hi = mid
    return FeasibilityResult(p_e=p_e, r_max=lo - TOLERANCE, threshold_used=threshold)


def rate_curve(p_values: list[float]) -> list[tuple[float, float, float | None]]:
    """(p_e, 1 − p_e, R_max) rows: the maximum rate without and with payload expansion"""
    return [(p, 1.0 - p, max_effective_rate(p).r_max) for p in p_values]
