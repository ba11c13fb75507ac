"""Personalization score and the break-even weighting between two strategies.

A strategy is summarized by a :class:`PerfPair`: its performance on the user's
own data (``local``) and on the pooled data of all users (``global_``).  The
score ``alpha * local + (1 - alpha) * global_`` is affine in ``alpha``, so the
difference between two strategies changes sign at most once on [0, 1].
"""
import enum
import math
from dataclasses import dataclass
from typing import Optional

INDIFFERENCE_TOL = 1e-12


class Orientation(enum.Enum):
    LOWER_IS_BETTER = "lower_is_better"    # losses
    HIGHER_IS_BETTER = "higher_is_better"  # accuracies


class Preference(enum.Enum):
    FIRST = "first"
    SECOND = "second"
    INDIFFERENT = "indifferent"


@dataclass(frozen=True)
class PerfPair:
    local: float
    global_: float
    orientation: Orientation = Orientation.HIGHER_IS_BETTER

    def __post_init__(self):
        if not (math.isfinite(self.local) and math.isfinite(self.global_)):
            raise ValueError("performance values must be finite")


@dataclass(frozen=True)
class AlphaCutoff:
    value: Optional[float]
    preferred_above: Preference
    preferred_below: Preference


def _check_alpha(alpha):
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")


def personalization_score(alpha, perf):
    _check_alpha(alpha)
    return alpha * perf.local + (1.0 - alpha) * perf.global_


def _check_orientation(perf0, perf1):
    if perf0.orientation is not perf1.orientation:
        raise ValueError("cannot compare performances with different orientations")


def _judge(diff, orientation, tol):
    """Preference given score(first) - score(second)."""
    if abs(diff) < tol:
        return Preference.INDIFFERENT
    first_smaller = diff < 0
    if orientation is Orientation.LOWER_IS_BETTER:
        return Preference.FIRST if first_smaller else Preference.SECOND
    return Preference.SECOND if first_smaller else Preference.FIRST


def preferred(alpha, perf0, perf1, tol=INDIFFERENCE_TOL):
    _check_orientation(perf0, perf1)
    diff = personalization_score(alpha, perf0) - personalization_score(alpha, perf1)
    return _judge(diff, perf0.orientation, tol)


def breakeven_alpha(perf0, perf1, tol=INDIFFERENCE_TOL):
    """Weighting at which both strategies score equally, with the preferred side.

    ``value`` is None when the scores never cross inside [0, 1]; the preference
    is then the same on both sides.
    """
    _check_orientation(perf0, perf1)
    p0, g0 = perf0.local, perf0.global_
    p1, g1 = perf1.local, perf1.global_
    if abs(p0 - p1) < tol and abs(g0 - g1) < tol:
        return AlphaCutoff(None, Preference.INDIFFERENT, Preference.INDIFFERENT)
    denom = (p0 - p1) - (g0 - g1)
    alpha = (g1 - g0) / denom if denom != 0.0 else None
    if alpha is None or not 0.0 <= alpha <= 1.0:
        # no crossing in range: the sign of the difference at any alpha decides
        constant = preferred(0.5, perf0, perf1, tol)
        return AlphaCutoff(None, constant, constant)
    # score difference is linear in alpha: one endpoint per side decides it
    above = preferred(1.0, perf0, perf1, tol) if alpha < 1.0 else Preference.INDIFFERENT
    below = preferred(0.0, perf0, perf1, tol) if alpha > 0.0 else Preference.INDIFFERENT
    return AlphaCutoff(alpha, above, below)
