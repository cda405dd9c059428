"""Monte Carlo experiments: LOS averages, flight traces, parameter sweeps.

Random sampling is organized so results never depend on scheduling.  Every
unit of work draws from its own counter-based substream keyed by
(seed, domain tag, cell index, scene index, chunk index), with a fixed
chunk size; running cells serially or across processes gives bit-identical
numbers.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import analytic
from .los import blocked_states, crossing_counts, crossing_profile, los_mask
from .markov import (
    MarkovRates,
    StateTrace,
    TransitionEstimate,
    fit_exponential,
    rates_from_transitions,
    run_lengths,
)
from .scene import ItuParams, UrbanScene, generate_scene

__all__ = [
    "SweepConfig",
    "SweepRow",
    "SweepResult",
    "scene_seed",
    "sample_uniform_pair",
    "estimate_avg_plos_mc",
    "PathTrace",
    "trace_path",
    "tx_positions",
    "markov_cells",
    "sweep_heights",
    "validate_building_count",
    "validate_distance_pdf",
]

# Domain tags keep substreams for different purposes disjoint.
_TAG_SCENE = 1
_TAG_MC = 2
_TAG_VALIDATE = 3

_MC_CHUNK = 20_000


@dataclass(frozen=True)
class SweepConfig:
    """Everything a height sweep needs besides output handling."""

    params: ItuParams
    tx_heights: tuple[float, ...] = (10.0, 15.0, 20.0, 25.0, 30.0, 50.0)
    rx_heights: tuple[float, ...] = (2.0, 10.0, 20.0, 30.0, 40.0, 50.0)
    n_samples: int = 100_000
    n_scenes: int = 10
    delta_d: float = 2.0
    seed: int = 1

    def __post_init__(self) -> None:
        if not self.tx_heights or not self.rx_heights:
            raise ValueError("height grids must be nonempty")
        if any(h < 0 for h in self.tx_heights + self.rx_heights):
            raise ValueError("heights must be nonnegative")
        if self.n_samples < 1 or self.n_scenes < 1:
            raise ValueError("n_samples and n_scenes must be at least 1")
        if self.delta_d <= 0:
            raise ValueError("delta_d must be positive")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")


def _substream(*key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


def scene_seed(seed: int, scene_index: int) -> int:
    """Derived seed for one scene of a run; stable across schedules."""
    ss = np.random.SeedSequence([seed, _TAG_SCENE, scene_index])
    return int(ss.generate_state(1, np.uint64)[0])


def run_scenes(config: SweepConfig) -> list[UrbanScene]:
    """The n_scenes patches of a run, shared by every sweep cell."""
    return [
        generate_scene(config.params, scene_seed(config.seed, i))
        for i in range(config.n_scenes)
    ]


def sample_uniform_pair(
    patch_side: float, rng: np.random.Generator
) -> tuple[tuple[float, float], tuple[float, float], float]:
    """One pair of uniform ground points in the patch and their distance."""
    x0, y0, x1, y1 = rng.random(4) * patch_side
    d = math.hypot(x1 - x0, y1 - y0)
    return (x0, y0), (x1, y1), d


def _embedded_mask(
    scene: UrbanScene, x: np.ndarray, y: np.ndarray, h: float
) -> np.ndarray:
    """True where a point at height h sits inside a building volume."""
    if scene.n_buildings == 0:
        return np.zeros(x.size, dtype=bool)
    cx = scene.centers_x[np.newaxis, :]
    cy = scene.centers_y[np.newaxis, :]
    hs = scene.half_sides[np.newaxis, :]
    infp = (np.abs(x[:, np.newaxis] - cx) <= hs) & (np.abs(y[:, np.newaxis] - cy) <= hs)
    return (infp & (scene.heights[np.newaxis, :] >= h)).any(axis=1)


def estimate_avg_plos_mc(
    config: SweepConfig,
    tx_h: float,
    rx_h: float,
    cell_index: int = 0,
    scenes: Sequence[UrbanScene] | None = None,
) -> tuple[float, float]:
    """Monte Carlo average LOS probability and binomial 95 percent halfwidth.

    n_samples uniform endpoint pairs are drawn per scene over n_scenes
    scenes; pairs with an endpoint embedded in a building volume are no
    positions an aircraft can occupy and are discarded, so the estimate is
    the LOS fraction over the remaining pairs.  Points above a roof but
    within its footprint stay in.  Sampling is chunked with one substream
    per (seed, cell, scene, chunk), so the estimate does not depend on how
    the work is scheduled.
    """
    if scenes is None:
        scenes = run_scenes(config)
    a = config.params.patch_side
    n_los = 0
    n_valid = 0
    for i, scene in enumerate(scenes):
        done = 0
        chunk = 0
        while done < config.n_samples:
            m = min(_MC_CHUNK, config.n_samples - done)
            rng = _substream(config.seed, _TAG_MC, cell_index, i, chunk)
            x0 = rng.random(m) * a
            y0 = rng.random(m) * a
            x1 = rng.random(m) * a
            y1 = rng.random(m) * a
            ok = ~_embedded_mask(scene, x0, y0, tx_h) & ~_embedded_mask(
                scene, x1, y1, rx_h
            )
            n_los += int(los_mask(scene, x0[ok], y0[ok], tx_h, x1[ok], y1[ok], rx_h).sum())
            n_valid += int(ok.sum())
            done += m
            chunk += 1
    if n_valid == 0:
        raise ValueError("no valid endpoint pairs; scene leaves no free space")
    p = n_los / n_valid
    ci = 1.96 * math.sqrt(p * (1.0 - p) / n_valid)
    return p, ci


# ---------------------------------------------------------------------------
# Flight traces.


@dataclass(frozen=True)
class PathTrace:
    """Serpentine receiver trace: visited points with their LOS states.

    steps are positions in the full serpentine grid ordering; gaps mark
    skipped in-footprint points, which break the path into segments.
    """

    delta_d: float
    steps: np.ndarray
    xs: np.ndarray
    ys: np.ndarray
    states: np.ndarray

    def segments(self) -> list[StateTrace]:
        """Unbroken stretches as StateTrace objects; single points dropped."""
        if self.steps.size == 0:
            return []
        cuts = np.nonzero(np.diff(self.steps) != 1)[0] + 1
        return [
            StateTrace(delta_d=self.delta_d, states=seg)
            for seg in np.split(self.states, cuts)
            if seg.size >= 2
        ]


def _serpentine_grid(patch_side: float, delta_d: float):
    """Grid coordinates in boustrophedon order: (xs, ys) flat arrays."""
    axis = np.arange(0.5 * delta_d, patch_side, delta_d)
    n = axis.size
    xs = np.empty(n * n)
    ys = np.empty(n * n)
    for j in range(n):
        row = axis if j % 2 == 0 else axis[::-1]
        xs[j * n : (j + 1) * n] = row
        ys[j * n : (j + 1) * n] = axis[j]
    return xs, ys


def _street_mask(scene: UrbanScene, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """True where a ground point lies outside every footprint (edges count in)."""
    keep = np.ones(xs.size, dtype=bool)
    if scene.n_buildings == 0:
        return keep
    step = 8192
    cx = scene.centers_x[np.newaxis, :]
    cy = scene.centers_y[np.newaxis, :]
    hs = scene.half_sides[np.newaxis, :]
    for s in range(0, xs.size, step):
        e = min(s + step, xs.size)
        inside = (
            (np.abs(xs[s:e, np.newaxis] - cx) <= hs)
            & (np.abs(ys[s:e, np.newaxis] - cy) <= hs)
        ).any(axis=1)
        keep[s:e] = ~inside
    return keep


def trace_path(
    scene: UrbanScene,
    tx: tuple[float, float, float],
    rx_height: float,
    delta_d: float,
) -> PathTrace:
    """LOS trace of a receiver sweeping the patch at fixed height.

    The receiver visits a serpentine grid of pitch delta_d; points inside
    building footprints are skipped.  tx is the fixed transmitter (x, y, h).
    """
    if delta_d <= 0.0:
        raise ValueError("delta_d must be positive")
    if rx_height < 0.0 or tx[2] < 0.0:
        raise ValueError("heights must be nonnegative")
    xs, ys = _serpentine_grid(scene.params.patch_side, delta_d)
    keep = _street_mask(scene, xs, ys)
    steps = np.nonzero(keep)[0]
    kx = xs[steps]
    ky = ys[steps]
    profile = crossing_profile(scene, tx[0], tx[1], kx, ky)
    states = blocked_states(profile, tx[2], rx_height)
    return PathTrace(delta_d=delta_d, steps=steps, xs=kx, ys=ky, states=states)


def tx_positions(scene: UrbanScene) -> list[tuple[float, float]]:
    """Five transmitter ground positions: center plus the four quarter points.

    Positions landing inside a footprint are nudged out through the nearest
    building edge into the adjacent street.
    """
    a = scene.params.patch_side
    c = a / 2.0
    q = a / 4.0
    raw = [(c, c), (c - q, c - q), (c - q, c + q), (c + q, c - q), (c + q, c + q)]
    return [_nudge_to_street(scene, x, y) for x, y in raw]


def _nudge_to_street(scene: UrbanScene, x: float, y: float) -> tuple[float, float]:
    if not scene.contains_point(x, y):
        return (x, y)
    inside = np.nonzero(
        (np.abs(x - scene.centers_x) <= scene.half_sides)
        & (np.abs(y - scene.centers_y) <= scene.half_sides)
    )[0]
    b = scene.buildings[int(inside[0])]
    gap = max(scene.params.grid_pitch - scene.params.building_side, 0.5)
    # Candidate exits ordered by how far the point is from each edge.
    exits = sorted(
        [
            (x - (b.center_x - b.half_side), "left"),
            ((b.center_x + b.half_side) - x, "right"),
            (y - (b.center_y - b.half_side), "down"),
            ((b.center_y + b.half_side) - y, "up"),
        ]
    )
    for _, side in exits:
        for off in (gap / 4.0, gap / 2.0, 1.0, 2.0, 5.0):
            if side == "left":
                cand = (b.center_x - b.half_side - off, y)
            elif side == "right":
                cand = (b.center_x + b.half_side + off, y)
            elif side == "down":
                cand = (x, b.center_y - b.half_side - off)
            else:
                cand = (x, b.center_y + b.half_side + off)
            if (
                0.0 <= cand[0] <= scene.params.patch_side
                and 0.0 <= cand[1] <= scene.params.patch_side
                and not scene.contains_point(*cand)
            ):
                return cand
    raise ValueError("could not find a street point near the transmitter")


# ---------------------------------------------------------------------------
# Height sweep.


@dataclass(frozen=True)
class SweepRow:
    """One height pair of a sweep; undefined statistics are nan."""

    tx_h: float
    rx_h: float
    plos_mc: float
    plos_ci95: float
    plos_closed: float
    plos_numeric_poly: float
    plos_numeric_gauss: float
    mu: float
    lam: float
    mean_dlos: float
    mean_dnlos: float
    ks_los: float


@dataclass(frozen=True)
class SweepResult:
    config: SweepConfig
    rows: tuple[SweepRow, ...]
    # Side statistics per (tx_h, rx_h), for error bars: run counts, run
    # standard deviations and transition source counts.
    diagnostics: dict = field(default_factory=dict)


@dataclass
class _CellStats:
    """Pooled Markov material for one height pair."""

    counts: list = field(default_factory=lambda: [0, 0, 0, 0])
    los_runs: list = field(default_factory=list)
    nlos_runs: list = field(default_factory=list)


def markov_cells(config: SweepConfig, scenes: Sequence[UrbanScene] | None = None):
    """Pooled transition counts and run lengths for every height pair.

    Traces run over every scene and all five transmitter positions; counts
    and runs are pooled per (tx_h, rx_h).  Returns {(tx_h, rx_h): (
    TransitionEstimate, los_runs, nlos_runs)}.
    """
    if scenes is None:
        scenes = run_scenes(config)
    pairs = [(th, rh) for th in config.tx_heights for rh in config.rx_heights]
    stats: dict[tuple[float, float], _CellStats] = {p: _CellStats() for p in pairs}

    for scene in scenes:
        xs, ys = _serpentine_grid(scene.params.patch_side, config.delta_d)
        keep = _street_mask(scene, xs, ys)
        steps = np.nonzero(keep)[0]
        kx = xs[steps]
        ky = ys[steps]
        cuts = np.nonzero(np.diff(steps) != 1)[0] + 1
        for txx, txy in tx_positions(scene):
            profile = crossing_profile(scene, txx, txy, kx, ky)
            for pair in pairs:
                states = blocked_states(profile, pair[0], pair[1])
                cell = stats[pair]
                for seg in np.split(states, cuts):
                    if seg.size < 2:
                        continue
                    tr = StateTrace(delta_d=config.delta_d, states=seg)
                    est = _count(tr)
                    for i in range(4):
                        cell.counts[i] += est[i]
                    cell.los_runs.append(run_lengths(tr, 1))
                    cell.nlos_runs.append(run_lengths(tr, 0))

    out = {}
    for pair, cell in stats.items():
        est = TransitionEstimate.from_counts(*cell.counts)
        los = np.concatenate(cell.los_runs) if cell.los_runs else np.empty(0)
        nlos = np.concatenate(cell.nlos_runs) if cell.nlos_runs else np.empty(0)
        out[pair] = (est, los, nlos)
    return out


def _count(trace: StateTrace) -> tuple[int, int, int, int]:
    src = trace.states[:-1]
    dst = trace.states[1:]
    n01 = int(np.count_nonzero((src == 0) & (dst == 1)))
    n10 = int(np.count_nonzero((src == 1) & (dst == 0)))
    n00 = int(np.count_nonzero(src == 0)) - n01
    n11 = int(np.count_nonzero(src == 1)) - n10
    return n00, n01, n10, n11


def _rates_or_nan(est: TransitionEstimate, delta_d: float) -> tuple[float, float]:
    try:
        rates = rates_from_transitions(est, delta_d)
        return rates.mu, rates.lam
    except ValueError:
        return math.nan, math.nan


def _mc_cell(args):
    config, tx_h, rx_h, cell_index, scenes = args
    return estimate_avg_plos_mc(config, tx_h, rx_h, cell_index, scenes)


def sweep_heights(
    config: SweepConfig,
    moment_mode: str = "nominal",
    max_workers: int | None = None,
) -> SweepResult:
    """Full result table over the height grids.

    Per pair: Monte Carlo average with CI halfwidth, closed-form and
    numeric-quadrature analytic values (both distance densities), extracted
    Markov rates, empirical mean life distances and the exponential KS
    statistic of the LOS run lengths.
    """
    scenes = run_scenes(config)
    pairs = [(th, rh) for th in config.tx_heights for rh in config.rx_heights]

    jobs = [(config, th, rh, i, scenes) for i, (th, rh) in enumerate(pairs)]
    if max_workers is not None and max_workers > 1:
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            mc = list(pool.map(_mc_cell, jobs))
    else:
        mc = [_mc_cell(j) for j in jobs]

    markov = markov_cells(config, scenes)

    rows = []
    diagnostics = {}
    for (th, rh), (p_mc, ci) in zip(pairs, mc):
        hp = analytic.HeightPair(th, rh)
        closed = analytic.average_p_los_closed(hp, config.params, moment_mode)
        num_poly = analytic.average_p_los_numeric(hp, config.params, "poly")
        num_gauss = analytic.average_p_los_numeric(hp, config.params, "gauss", moment_mode)
        est, los_runs, nlos_runs = markov[(th, rh)]
        mu, lam = _rates_or_nan(est, config.delta_d)
        mean_dlos = float(los_runs.mean()) if los_runs.size else math.nan
        mean_dnlos = float(nlos_runs.mean()) if nlos_runs.size else math.nan
        if los_runs.size >= 2:
            ks = fit_exponential(los_runs)[1]
        else:
            ks = math.nan
        rows.append(
            SweepRow(
                tx_h=th,
                rx_h=rh,
                plos_mc=p_mc,
                plos_ci95=ci,
                plos_closed=closed,
                plos_numeric_poly=num_poly,
                plos_numeric_gauss=num_gauss,
                mu=mu,
                lam=lam,
                mean_dlos=mean_dlos,
                mean_dnlos=mean_dnlos,
                ks_los=ks,
            )
        )
        diagnostics[(th, rh)] = {
            "n0": est.n0,
            "n1": est.n1,
            "p01": est.p01,
            "p10": est.p10,
            "n_los_runs": int(los_runs.size),
            "dlos_std": float(los_runs.std(ddof=1)) if los_runs.size >= 2 else math.nan,
            "n_nlos_runs": int(nlos_runs.size),
        }
    return SweepResult(config=config, rows=tuple(rows), diagnostics=diagnostics)


# ---------------------------------------------------------------------------
# Validation experiments.


def validate_building_count(
    scene: UrbanScene,
    n_links: int,
    lengths_m: Sequence[float] = (100.0, 200.0, 400.0),
    seed: int = 0,
) -> list[tuple[float, float, float]]:
    """Mean crossed-building count against the linear model, per link length.

    Links have fixed horizontal length, uniform position and direction,
    both endpoints inside the patch (rejection sampling).  Returns
    (length_m, empirical_mean, model_mean) per requested length.
    """
    a = scene.params.patch_side
    out = []
    for li, l_m in enumerate(lengths_m):
        if l_m >= a * math.sqrt(2.0):
            raise ValueError(f"link length {l_m} does not fit in the patch")
        rng = _substream(seed, _TAG_VALIDATE, li)
        x0 = np.empty(n_links)
        y0 = np.empty(n_links)
        x1 = np.empty(n_links)
        y1 = np.empty(n_links)
        have = 0
        while have < n_links:
            m = (n_links - have) * 2 + 16
            cx = rng.random(m) * a
            cy = rng.random(m) * a
            theta = rng.random(m) * (2.0 * math.pi)
            ex = cx + l_m * np.cos(theta)
            ey = cy + l_m * np.sin(theta)
            ok = (ex >= 0) & (ex <= a) & (ey >= 0) & (ey <= a)
            take = min(int(ok.sum()), n_links - have)
            sel = np.nonzero(ok)[0][:take]
            x0[have : have + take] = cx[sel]
            y0[have : have + take] = cy[sel]
            x1[have : have + take] = ex[sel]
            y1[have : have + take] = ey[sel]
            have += take
        emp = float(crossing_counts(scene, x0, y0, x1, y1).mean())
        model = analytic.expected_buildings(
            l_m / 1000.0, scene.params.alpha, scene.params.beta
        )
        out.append((float(l_m), emp, model))
    return out


def validate_distance_pdf(n: int, bins: int, seed: int = 0) -> float:
    """L1 distance between sampled pair distances and the polynomial density.

    n uniform point pairs in the unit square; the histogram over [0, 1)
    uses bin fractions of all n samples, the model uses the exact
    antiderivative of the truncated polynomial per bin.  Distances at or
    beyond 1 fall outside every bin, matching the truncation.
    """
    if n < 1 or bins < 1:
        raise ValueError("n and bins must be positive")
    rng = _substream(seed, _TAG_VALIDATE, 999)
    d = np.empty(n)
    have = 0
    while have < n:
        m = min(n - have, 1_000_000)
        p = rng.random((4, m))
        d[have : have + m] = np.hypot(p[2] - p[0], p[3] - p[1])
        have += m
    edges = np.linspace(0.0, 1.0, bins + 1)
    counts, _ = np.histogram(d, bins=edges)
    emp = counts / n

    def antideriv(k: float) -> float:
        return math.pi * k * k - (8.0 / 3.0) * k**3 + 0.5 * k**4

    model = np.diff([antideriv(e) for e in edges])
    return float(np.abs(emp - model).sum())
