"""Command-line front end: config parsing, experiment verbs, CSV emission.

Config files are plain ``key = value`` lines; ``#`` starts a comment.  Every
key has a documented default, so an empty file is a valid config.  All
numeric CSV output uses 6 significant digits, and reruns with the same
config produce byte-identical data rows (only the ``#`` timestamp line of
the metadata file changes).
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass, fields, replace
from datetime import datetime, timezone
from pathlib import Path

from . import __version__, analytic
from .experiments import (
    SweepConfig,
    estimate_avg_plos_mc,
    markov_cells,
    run_scenes,
    scene_seed,
    sweep_heights,
    trace_path,
    tx_positions,
    validate_building_count,
    validate_distance_pdf,
)
from .markov import MarkovRates, estimate_transitions, rates_from_transitions, simulate_two_state
from .scene import ItuParams, generate_scene, scene_to_csv

__all__ = ["ConfigError", "RunConfig", "parse_config", "run_command", "main"]

VERBS = (
    "gen-scene",
    "plos-analytic",
    "plos-mc",
    "trace",
    "fit-markov",
    "sweep",
    "validate",
)


class ConfigError(ValueError):
    """Bad config file: unknown key, malformed line or invalid value."""


@dataclass(frozen=True)
class RunConfig:
    """A full run description; field names double as config-file keys."""

    alpha: float = 0.37
    beta_per_km2: float = 188.0
    gamma_m: float = 13.3
    area_side_m: float = 775.0
    d_correction: float = 0.05
    delta_d_m: float = 2.0
    n_samples: int = 100_000
    n_scenes: int = 10
    seed: int = 1
    tx_heights_m: tuple[float, ...] = (10.0, 15.0, 20.0, 25.0, 30.0, 50.0)
    rx_heights_m: tuple[float, ...] = (2.0, 10.0, 20.0, 30.0, 40.0, 50.0)
    moment_mode: str = "nominal"
    pdf_choice: str = "gauss"
    out_dir: str = "out"

    def itu_params(self) -> ItuParams:
        return ItuParams(
            alpha=self.alpha,
            beta=self.beta_per_km2,
            gamma=self.gamma_m,
            d_correction=self.d_correction,
            patch_side=self.area_side_m,
        )

    def sweep_config(self) -> SweepConfig:
        return SweepConfig(
            params=self.itu_params(),
            tx_heights=self.tx_heights_m,
            rx_heights=self.rx_heights_m,
            n_samples=self.n_samples,
            n_scenes=self.n_scenes,
            delta_d=self.delta_d_m,
            seed=self.seed,
        )


def _parse_float_list(raw: str) -> tuple[float, ...]:
    vals = tuple(float(v) for v in raw.split(",") if v.strip())
    if not vals:
        raise ValueError("empty list")
    return vals


_PARSERS = {
    "alpha": float,
    "beta_per_km2": float,
    "gamma_m": float,
    "area_side_m": float,
    "d_correction": float,
    "delta_d_m": float,
    "n_samples": int,
    "n_scenes": int,
    "seed": int,
    "tx_heights_m": _parse_float_list,
    "rx_heights_m": _parse_float_list,
    "moment_mode": str,
    "pdf_choice": str,
    "out_dir": str,
}


def _validate(cfg: RunConfig) -> None:
    checks = [
        ("alpha", 0.0 < cfg.alpha < 1.0, "must lie in (0, 1)"),
        ("beta_per_km2", cfg.beta_per_km2 > 0.0, "must be positive"),
        ("gamma_m", cfg.gamma_m > 0.0, "must be positive"),
        ("area_side_m", cfg.area_side_m > 0.0, "must be positive"),
        ("d_correction", 0.0 <= cfg.d_correction < 1.0, "must lie in [0, 1)"),
        ("delta_d_m", cfg.delta_d_m > 0.0, "must be positive"),
        ("n_samples", cfg.n_samples >= 1, "must be at least 1"),
        ("n_scenes", cfg.n_scenes >= 1, "must be at least 1"),
        ("seed", cfg.seed >= 0, "must be nonnegative"),
        (
            "tx_heights_m",
            all(h >= 0 for h in cfg.tx_heights_m),
            "heights must be nonnegative",
        ),
        (
            "rx_heights_m",
            all(h >= 0 for h in cfg.rx_heights_m),
            "heights must be nonnegative",
        ),
        (
            "moment_mode",
            cfg.moment_mode in ("nominal", "derived"),
            "must be 'nominal' or 'derived'",
        ),
        ("pdf_choice", cfg.pdf_choice in ("poly", "gauss"), "must be 'poly' or 'gauss'"),
    ]
    for key, ok, msg in checks:
        if not ok:
            raise ConfigError(f"config key {key}: {msg} (got {getattr(cfg, key)!r})")


def parse_config(text: str) -> RunConfig:
    """Parse ``key = value`` lines into a RunConfig, applying defaults.

    Unknown and duplicate keys are rejected; parse errors carry the line
    number and validation errors name the offending key.
    """
    values = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in _PARSERS:
            raise ConfigError(f"line {line_no}: unknown config key {key!r}")
        if key in values:
            raise ConfigError(f"line {line_no}: duplicate config key {key!r}")
        if not val:
            raise ConfigError(f"line {line_no}: empty value for key {key!r}")
        try:
            values[key] = _PARSERS[key](val)
        except ValueError as exc:
            raise ConfigError(f"line {line_no}: bad value for {key!r}: {exc}") from None
    cfg = RunConfig(**values)
    _validate(cfg)
    return cfg


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        cfg = RunConfig()
        _validate(cfg)
        return cfg
    return parse_config(Path(path).read_text())


# ---------------------------------------------------------------------------
# Output helpers.


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, int):
        return str(v)
    f = float(v)
    if math.isnan(f):
        return "nan"
    return f"{f:.6g}"


def _write_csv(path: Path, header: str, rows) -> None:
    lines = [header]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _write_meta(out_dir: Path, verb: str, cfg: RunConfig) -> None:
    lines = [
        f"# generated_at={datetime.now(timezone.utc).isoformat()}",
        "tool=uavlos",
        f"version={__version__}",
        f"verb={verb}",
    ]
    if verb in ("trace", "fit-markov", "sweep"):
        lines.append("rx_ordering=serpentine")
    for f in fields(RunConfig):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = ",".join(_fmt(x) for x in v)
        lines.append(f"{f.name}={_fmt(v) if not isinstance(v, str) else v}")
    (out_dir / "run_meta.txt").write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Verbs.


def _cmd_gen_scene(cfg: RunConfig, out_dir: Path) -> None:
    scene = generate_scene(cfg.itu_params(), cfg.seed)
    scene_to_csv(scene, out_dir / "scene.csv")


def _cmd_plos_analytic(cfg: RunConfig, out_dir: Path) -> None:
    params = cfg.itu_params()
    rows = []
    for th in cfg.tx_heights_m:
        for rh in cfg.rx_heights_m:
            hp = analytic.HeightPair(th, rh)
            rows.append(
                (
                    th,
                    rh,
                    analytic.average_p_los_closed(hp, params, cfg.moment_mode),
                    analytic.average_p_los_numeric(hp, params, "poly"),
                    analytic.average_p_los_numeric(hp, params, "gauss", cfg.moment_mode),
                )
            )
    _write_csv(
        out_dir / "plos_analytic.csv",
        "tx_h_m,rx_h_m,plos_closed,plos_numeric_poly,plos_numeric_gauss",
        rows,
    )


def _cmd_plos_mc(cfg: RunConfig, out_dir: Path) -> None:
    sweep = cfg.sweep_config()
    scenes = run_scenes(sweep)
    rows = []
    cell = 0
    for th in cfg.tx_heights_m:
        for rh in cfg.rx_heights_m:
            p, ci = estimate_avg_plos_mc(sweep, th, rh, cell, scenes)
            rows.append((th, rh, p, ci))
            cell += 1
    _write_csv(out_dir / "plos_mc.csv", "tx_h_m,rx_h_m,plos_mc,plos_ci95", rows)


def _cmd_trace(cfg: RunConfig, out_dir: Path) -> None:
    """One trace: first transmitter position, first heights of each grid."""
    scene = generate_scene(cfg.itu_params(), scene_seed(cfg.seed, 0))
    txx, txy = tx_positions(scene)[0]
    tx_h = cfg.tx_heights_m[0]
    rx_h = cfg.rx_heights_m[0]
    trace = trace_path(scene, (txx, txy, tx_h), rx_h, cfg.delta_d_m)
    rows = zip(
        (int(s) for s in trace.steps),
        trace.xs,
        trace.ys,
        (int(s) for s in trace.states),
    )
    _write_csv(out_dir / "trace.csv", "step,x_m,y_m,state", rows)


_MARKOV_HEADER = (
    "tx_h_m,rx_h_m,p01,p10,mu_per_m,lambda_per_m,mean_dlos_m,mean_dnlos_m,ks_los"
)


def _markov_rows(cfg: RunConfig):
    from .markov import fit_exponential

    sweep = cfg.sweep_config()
    cells = markov_cells(sweep)
    rows = []
    for th in cfg.tx_heights_m:
        for rh in cfg.rx_heights_m:
            est, los_runs, nlos_runs = cells[(th, rh)]
            try:
                rates = rates_from_transitions(est, cfg.delta_d_m)
                mu, lam = rates.mu, rates.lam
            except ValueError:
                mu, lam = math.nan, math.nan
            rows.append(
                (
                    th,
                    rh,
                    est.p01 if est.p01 is not None else math.nan,
                    est.p10 if est.p10 is not None else math.nan,
                    mu,
                    lam,
                    float(los_runs.mean()) if los_runs.size else math.nan,
                    float(nlos_runs.mean()) if nlos_runs.size else math.nan,
                    fit_exponential(los_runs)[1] if los_runs.size >= 2 else math.nan,
                )
            )
    return rows


def _cmd_fit_markov(cfg: RunConfig, out_dir: Path) -> None:
    _write_csv(out_dir / "markov_summary.csv", _MARKOV_HEADER, _markov_rows(cfg))


_SWEEP_HEADER = (
    "tx_h_m,rx_h_m,plos_mc,plos_ci95,plos_closed,plos_numeric_poly,"
    "plos_numeric_gauss,mu_per_m,lambda_per_m,mean_dlos_m,mean_dnlos_m,ks_los"
)


def _cmd_sweep(cfg: RunConfig, out_dir: Path) -> None:
    result = sweep_heights(cfg.sweep_config(), cfg.moment_mode)
    rows = [
        (
            r.tx_h,
            r.rx_h,
            r.plos_mc,
            r.plos_ci95,
            r.plos_closed,
            r.plos_numeric_poly,
            r.plos_numeric_gauss,
            r.mu,
            r.lam,
            r.mean_dlos,
            r.mean_dnlos,
            r.ks_los,
        )
        for r in result.rows
    ]
    _write_csv(out_dir / "sweep.csv", _SWEEP_HEADER, rows)


def _cmd_validate(cfg: RunConfig, out_dir: Path) -> None:
    """Cross-checks of the samplers and estimators against known answers."""
    rows = []

    n = min(cfg.n_samples, 1_000_000)
    l1 = validate_distance_pdf(n=max(n, 10_000), bins=100, seed=cfg.seed)
    rows.append(("distance_pdf_l1", l1, 0.0, l1))

    scene = generate_scene(cfg.itu_params(), scene_seed(cfg.seed, 0))
    limit = cfg.area_side_m * math.sqrt(2.0)
    lengths = [l for l in (100.0, 200.0, 400.0) if l < limit]
    for l_m, emp, model in validate_building_count(
        scene, n_links=min(cfg.n_samples, 100_000), lengths_m=lengths, seed=cfg.seed
    ):
        rel = abs(emp - model) / model if model else math.nan
        rows.append((f"building_count_{int(l_m)}m", emp, model, rel))

    true_rates = MarkovRates(mu=0.05, lam=0.02)
    trace = simulate_two_state(
        true_rates, cfg.delta_d_m, n_steps=50_000, initial=1, seed=cfg.seed
    )
    rec = rates_from_transitions(estimate_transitions(trace), cfg.delta_d_m)
    rows.append(("estimator_mu_per_m", rec.mu, true_rates.mu, abs(rec.mu - 0.05) / 0.05))
    rows.append(
        ("estimator_lambda_per_m", rec.lam, true_rates.lam, abs(rec.lam - 0.02) / 0.02)
    )

    _write_csv(out_dir / "validate.csv", "check,value,reference,rel_err", rows)


_COMMANDS = {
    "gen-scene": _cmd_gen_scene,
    "plos-analytic": _cmd_plos_analytic,
    "plos-mc": _cmd_plos_mc,
    "trace": _cmd_trace,
    "fit-markov": _cmd_fit_markov,
    "sweep": _cmd_sweep,
    "validate": _cmd_validate,
}


def run_command(verb: str, cfg: RunConfig) -> Path:
    """Run one verb; returns the output directory it wrote into."""
    if verb not in _COMMANDS:
        raise ConfigError(f"unknown verb {verb!r}; choose from {', '.join(VERBS)}")
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _COMMANDS[verb](cfg, out_dir)
    _write_meta(out_dir, verb, cfg)
    return out_dir


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="uavlos",
        description="Urban UAV-to-UAV LOS blockage experiments",
    )
    parser.add_argument("verb", choices=VERBS)
    parser.add_argument("--config", type=Path, default=None, help="key = value file")
    parser.add_argument(
        "--out-dir", type=Path, default=None, help="override the configured out_dir"
    )
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.out_dir is not None:
            cfg = replace(cfg, out_dir=str(args.out_dir))
        out = run_command(args.verb, cfg)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"uavlos: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
