"""Two-state LOS/NLOS chain over distance: estimation, rates, life statistics.

States are 0 (NLOS) and 1 (LOS), observed every delta_d meters along a
flight path.  Per-step switch probabilities p01 and p10 convert to
continuous per-meter rates through p = 1 - exp(-rate * delta_d):

    mu      NLOS -> LOS rate, per meter
    lambda  LOS -> NLOS rate, per meter

Expected life distances are the reciprocal rates; expected life time maps
the LOS life distance through an arbitrary distance-to-time transform
against a unit-exponential mixing variable.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import integrate, stats

__all__ = [
    "StateTrace",
    "TransitionEstimate",
    "MarkovRates",
    "estimate_transitions",
    "pooled_transition_estimate",
    "rates_from_transitions",
    "life_distance_expectations",
    "expected_life_time",
    "run_lengths",
    "fit_exponential",
    "simulate_two_state",
]


@dataclass(frozen=True)
class StateTrace:
    """Equally spaced 0/1 state observations, spacing delta_d meters."""

    delta_d: float
    states: np.ndarray

    def __post_init__(self) -> None:
        if self.delta_d <= 0.0:
            raise ValueError("delta_d must be positive")
        arr = np.asarray(self.states, dtype=np.int8)
        if arr.ndim != 1 or arr.size < 2:
            raise ValueError("states must be a 1-D sequence of length >= 2")
        if not np.isin(arr, (0, 1)).all():
            raise ValueError("states must contain only 0 and 1")
        arr.flags.writeable = False
        object.__setattr__(self, "states", arr)

    def __len__(self) -> int:
        return int(self.states.size)


@dataclass(frozen=True)
class TransitionEstimate:
    """Row-wise ML transition probabilities with their source counts.

    A row with no sources has no estimate; its probabilities are None
    rather than a made-up number.
    """

    p00: float | None
    p01: float | None
    p10: float | None
    p11: float | None
    n0: int
    n1: int

    @classmethod
    def from_counts(cls, n00: int, n01: int, n10: int, n11: int) -> "TransitionEstimate":
        n0 = n00 + n01
        n1 = n10 + n11
        return cls(
            p00=n00 / n0 if n0 else None,
            p01=n01 / n0 if n0 else None,
            p10=n10 / n1 if n1 else None,
            p11=n11 / n1 if n1 else None,
            n0=n0,
            n1=n1,
        )


@dataclass(frozen=True)
class MarkovRates:
    """Per-meter transition rates: mu is NLOS to LOS, lam is LOS to NLOS."""

    mu: float
    lam: float

    def __post_init__(self) -> None:
        if self.mu < 0.0 or self.lam < 0.0:
            raise ValueError("rates must be nonnegative")


def _count_transitions(states: np.ndarray) -> tuple[int, int, int, int]:
    src = states[:-1]
    dst = states[1:]
    n01 = int(np.count_nonzero((src == 0) & (dst == 1)))
    n10 = int(np.count_nonzero((src == 1) & (dst == 0)))
    n00 = int(np.count_nonzero(src == 0)) - n01
    n11 = int(np.count_nonzero(src == 1)) - n10
    return n00, n01, n10, n11


def estimate_transitions(trace: StateTrace) -> TransitionEstimate:
    """Maximum-likelihood transition probabilities from one trace."""
    return TransitionEstimate.from_counts(*_count_transitions(trace.states))


def pooled_transition_estimate(traces: Iterable[StateTrace]) -> TransitionEstimate:
    """Transition probabilities from summed counts of several traces.

    Traces are counted independently, so no transition is invented across
    trace boundaries.  All traces must share the same spacing.
    """
    totals = [0, 0, 0, 0]
    delta_d = None
    for tr in traces:
        if delta_d is None:
            delta_d = tr.delta_d
        elif tr.delta_d != delta_d:
            raise ValueError("traces have mismatched delta_d")
        for i, c in enumerate(_count_transitions(tr.states)):
            totals[i] += c
    if delta_d is None:
        raise ValueError("no traces given")
    return TransitionEstimate.from_counts(*totals)


def rates_from_transitions(est: TransitionEstimate, delta_d: float) -> MarkovRates:
    """Invert p = 1 - exp(-rate * delta_d) for both rows.

    Requires both rows defined and both switch probabilities strictly below
    one; p = 1 has no finite rate.
    """
    if delta_d <= 0.0:
        raise ValueError("delta_d must be positive")
    if est.p01 is None or est.p10 is None:
        raise ValueError("transition row undefined: no sources observed")
    if est.p01 >= 1.0 or est.p10 >= 1.0:
        raise ValueError("switch probability of 1 has no finite rate")
    mu = -math.log1p(-est.p01) / delta_d
    lam = -math.log1p(-est.p10) / delta_d
    return MarkovRates(mu=mu, lam=lam)


def life_distance_expectations(rates: MarkovRates) -> tuple[float, float]:
    """(E[LOS life distance], E[NLOS life distance]) in meters.

    A zero rate means the state is never left; its life distance is inf.
    """
    e_los = 1.0 / rates.lam if rates.lam > 0.0 else math.inf
    e_nlos = 1.0 / rates.mu if rates.mu > 0.0 else math.inf
    return e_los, e_nlos


def expected_life_time(
    rates: MarkovRates, speed_transform: Callable[[float], float]
) -> float:
    """Expected LOS life time in seconds.

    speed_transform maps a distance in meters to a traversal time in
    seconds; the expectation integrates it along an exponential life of
    mean E[LOS life distance]:  integral of f(x * E) * exp(-x) over x >= 0.
    """
    if rates.lam <= 0.0:
        raise ValueError("lambda must be positive for a finite LOS life")
    e_los = 1.0 / rates.lam
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(
                lambda x: speed_transform(x * e_los) * math.exp(-x),
                0.0,
                np.inf,
                epsrel=1e-9,
                limit=200,
            )
        except integrate.IntegrationWarning as exc:
            raise ValueError(f"life-time integral does not converge: {exc}") from None
    if not math.isfinite(val):
        raise ValueError("life-time integral does not converge")
    return val


def run_lengths(trace: StateTrace, state: int) -> np.ndarray:
    """Lengths in meters of maximal runs of the given state.

    Runs touching either end of the trace were truncated by observation,
    not by a transition, so they are dropped.
    """
    if state not in (0, 1):
        raise ValueError("state must be 0 or 1")
    arr = trace.states
    match = (arr == state).astype(np.int8)
    # Pad so every run has an explicit start and stop edge.
    edges = np.diff(np.concatenate(([0], match, [0])))
    starts = np.nonzero(edges == 1)[0]
    stops = np.nonzero(edges == -1)[0]
    keep = (starts > 0) & (stops < arr.size)
    return (stops[keep] - starts[keep]).astype(float) * trace.delta_d


def fit_exponential(runs: Sequence[float] | np.ndarray) -> tuple[float, float]:
    """Fit an exponential to run lengths; returns (rate, KS statistic).

    The rate is the ML estimate 1/mean; the KS statistic compares the
    sample with the fitted distribution.
    """
    arr = np.asarray(runs, dtype=float)
    if arr.size < 2:
        raise ValueError("need at least two runs to fit")
    if np.any(arr <= 0.0):
        raise ValueError("run lengths must be positive")
    mean = float(arr.mean())
    ks = float(stats.kstest(arr, stats.expon(scale=mean).cdf).statistic)
    return 1.0 / mean, ks


def simulate_two_state(
    rates: MarkovRates,
    delta_d: float,
    n_steps: int,
    initial: int = 1,
    seed: int = 0,
) -> StateTrace:
    """Sample a distance-homogeneous two-state chain at spacing delta_d.

    The trace has n_steps observations starting from the given initial
    state; each step switches with probability 1 - exp(-rate * delta_d).
    """
    if delta_d <= 0.0:
        raise ValueError("delta_d must be positive")
    if n_steps < 2:
        raise ValueError("n_steps must be at least 2")
    if initial not in (0, 1):
        raise ValueError("initial state must be 0 or 1")
    p01 = -math.expm1(-rates.mu * delta_d)
    p10 = -math.expm1(-rates.lam * delta_d)
    u = np.random.default_rng(seed).random(n_steps - 1)
    states = np.empty(n_steps, dtype=np.int8)
    states[0] = initial
    s = initial
    for i in range(n_steps - 1):
        if s == 0:
            if u[i] < p01:
                s = 1
        elif u[i] < p10:
            s = 0
        states[i + 1] = s
    return StateTrace(delta_d=delta_d, states=states)
