#!/usr/bin/env python
"""
run_scenario.py

Run one scenario file and write its rate tables.

A scenario is a TOML document naming the system configuration, how the
channel statistics and STAR-RIS coefficients are drawn, the pipeline
(mc | prop1 | closed | pgam | compare) and an optional sweep over SNR, the
number of panels K or the number of transmit antennas T. The results land in
`<out>/<name>.csv` with a `<name>_manifest.json` describing the run.

Usage:
    python ./src/run_scenario.py run scenarios/case1.toml --threads 4
"""

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd
import scipy
import toml

sys.path.append(os.path.abspath("./src"))

from closed_form import closed_form_rates
from errors import ConfigurationError, RateToolkitError
from freeprob import asymptotic_rates, cauchy_problem, solve_prop2
from linearization import SolverOptions, solve_fixed_point
from mc_rates import TRIAL_COLUMNS, check_sic_order, mc_average
from misc_tools import config_hash
from model import (
    LosGeometry,
    RateOptions,
    SystemConfig,
    ThetaState,
    generate_stats,
    normalize_direct_gain,
)
from pgam import PgamOptions, initial_theta, optimize, random_baseline
from settings import config

logger = logging.getLogger(__name__)

OUTPUT_DIR = config("OUTPUT_DIR")

PIPELINES = ("mc", "prop1", "closed", "pgam", "compare")
SWEEP_AXES = ("snr_db", "K", "T")
RESULT_COLUMNS = ["axis", "value", "source", "I1", "I2", "sum_rate", "t", "stderr_I1", "stderr_I2", "n_trials"]
LOG_FORMAT = "%(asctime)s - %(levelname)s - %(name)s - %(message)s"


@dataclass
class ScenarioSpec:
    name: str
    pipeline: str
    system: SystemConfig
    stats_seed: int
    theta: object = "uniform-split"
    theta_seed: int = 0
    seed: int = 0
    n_trials: int = 1000
    sweep_axis: str = "snr_db"
    sweep_values: tuple = ()
    rayleigh_bs_ris: bool = True
    normalize_direct: bool = True
    geometry: LosGeometry = field(default_factory=LosGeometry)
    rates: RateOptions = field(default_factory=RateOptions)
    solver: SolverOptions = field(default_factory=SolverOptions)
    pgam: PgamOptions = field(default_factory=PgamOptions)
    baseline_trials: int = 0
    dump_residuals: bool = False
    raw: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, doc):
        try:
            scenario = doc["scenario"]
            system = dict(doc["system"])
        except KeyError as exc:
            raise ConfigurationError(f"scenario file lacks the [{exc.args[0]}] table") from exc
        snr_db = system.pop("snr_db", 10.0)
        system["panel_sizes"] = tuple(system.get("panel_sizes", ()))
        try:
            cfg = SystemConfig.from_snr_db(snr_db, **system)
        except TypeError as exc:
            raise ConfigurationError(f"invalid [system] table: {exc}") from exc

        statistics = doc.get("statistics", {})
        geometry = LosGeometry(
            azimuth=tuple(statistics.get("azimuth", LosGeometry.azimuth)),
            elevation=tuple(statistics.get("elevation", LosGeometry.elevation)),
            los_gain=statistics.get("los_gain", LosGeometry.los_gain),
        )
        theta = doc.get("theta", {})
        sweep = doc.get("sweep", {})
        spec = cls(
            name=scenario.get("name", "scenario"),
            pipeline=scenario.get("pipeline", "compare"),
            system=cfg,
            stats_seed=int(statistics.get("seed", 0)),
            theta=theta.get("directive", "uniform-split"),
            theta_seed=int(theta.get("seed", 0)),
            seed=int(scenario.get("seed", 0)),
            n_trials=int(scenario.get("n_trials", 1000)),
            sweep_axis=sweep.get("axis", "snr_db"),
            sweep_values=tuple(sweep.get("values", (snr_db,))),
            rayleigh_bs_ris=bool(statistics.get("rayleigh_bs_ris", True)),
            normalize_direct=bool(statistics.get("normalize_direct", True)),
            geometry=geometry,
            rates=_options(RateOptions, doc.get("rates", {})),
            solver=_options(SolverOptions, doc.get("solver", {})),
            pgam=_options(PgamOptions, {k: v for k, v in doc.get("pgam", {}).items() if k != "baseline_trials"}),
            baseline_trials=int(doc.get("pgam", {}).get("baseline_trials", 0)),
            dump_residuals=bool(doc.get("output", {}).get("dump_residuals", False)),
            raw=doc,
        )
        spec.validate()
        return spec

    @classmethod
    def from_file(cls, path):
        path = Path(path)
        try:
            doc = toml.load(path)
        except (OSError, toml.TomlDecodeError) as exc:
            raise ConfigurationError(f"cannot read scenario {path}: {exc}") from exc
        return cls.from_dict(doc)

    def validate(self):
        if self.pipeline not in PIPELINES:
            raise ConfigurationError(f"unknown pipeline {self.pipeline!r}, expected one of {PIPELINES}")
        if self.sweep_axis not in SWEEP_AXES:
            raise ConfigurationError(f"unknown sweep axis {self.sweep_axis!r}, expected one of {SWEEP_AXES}")
        values = np.asarray(self.sweep_values, dtype=float)
        if values.size == 0:
            raise ConfigurationError("sweep grid is empty")
        steps = np.diff(values)
        if values.size > 1 and not (np.all(steps > 0) or np.all(steps < 0)):
            raise ConfigurationError(f"sweep grid must be strictly monotone, got {list(self.sweep_values)}")
        if self.sweep_axis == "K" and max(self.sweep_values) > self.system.K:
            raise ConfigurationError(f"K sweep reaches {max(self.sweep_values)} but only {self.system.K} panels exist")
        if self.pipeline in ("closed", "pgam") and self.rayleigh_bs_ris:
            raise ConfigurationError(f"pipeline {self.pipeline!r} needs rayleigh_bs_ris = false")
        if self.pipeline in ("mc", "compare") and self.n_trials < 1:
            raise ConfigurationError(f"n_trials must be >= 1, got {self.n_trials}")


def _options(cls, table):
    try:
        return cls(**table)
    except TypeError as exc:
        raise ConfigurationError(f"invalid {cls.__name__} entries: {exc}") from exc


# -------------------------
# Sweep points
# -------------------------
def _prepare(cfg, spec):
    stats = generate_stats(cfg, spec.stats_seed, spec.geometry, rayleigh_bs_ris=spec.rayleigh_bs_ris)
    theta = ThetaState.from_directive(spec.theta, cfg.panel_sizes, spec.theta_seed)
    if spec.normalize_direct:
        stats = normalize_direct_gain(stats, theta)
    return stats, theta


def sweep_points(spec):
    """Yield (value, cfg, stats, theta) for every sweep value, in grid order."""
    cfg = spec.system
    if spec.sweep_axis == "K":
        # nested panels of one master draw, normalized once on the full set
        master, theta = _prepare(cfg, spec)
        for K in spec.sweep_values:
            K = int(K)
            point_cfg = replace(cfg, panel_sizes=cfg.panel_sizes[:K])
            yield K, point_cfg, master.subset_panels(K), theta.subset_panels(K)
    elif spec.sweep_axis == "T":
        for T in spec.sweep_values:
            point_cfg = replace(cfg, T=int(T))
            stats, theta = _prepare(point_cfg, spec)
            yield int(T), point_cfg, stats, theta
    else:
        stats, theta = _prepare(cfg, spec)
        for snr in spec.sweep_values:
            yield float(snr), cfg.with_snr_db(snr), stats, theta


def _row(spec, value, source, report):
    return {
        "axis": spec.sweep_axis,
        "value": value,
        "source": source,
        "I1": report.I1,
        "I2": report.I2,
        "sum_rate": report.sum_rate,
        "t": report.t,
        "stderr_I1": report.stderr_I1,
        "stderr_I2": report.stderr_I2,
        "n_trials": report.n_trials,
    }


def run_point(spec, value, cfg, stats, theta, n_threads=1):
    """Result rows and per-trial / trace frames of one sweep point."""
    rows, extras = [], {}
    pipelines = ("mc", "prop1") if spec.pipeline == "compare" else (spec.pipeline,)
    if spec.pipeline == "compare" and stats.bs_ris_deterministic and cfg.S > 0:
        pipelines += ("closed",)
    if not check_sic_order(stats, theta, cfg):
        logger.warning("user 1 is not the stronger user value=%s; SIC order assumption violated", value)

    if "mc" in pipelines:
        report = mc_average(stats, theta, cfg, spec.n_trials, spec.seed, spec.rates, n_threads=n_threads)
        rows.append(_row(spec, value, "mc", report))
        extras["trials"] = pd.DataFrame(list(report.records), columns=TRIAL_COLUMNS)
    if {"prop1", "closed", "pgam"} & set(pipelines):
        t = solve_prop2(stats, theta, cfg, spec.solver).t
    if "prop1" in pipelines:
        rows.append(_row(spec, value, "prop1", asymptotic_rates(stats, theta, cfg, spec.rates, spec.solver, t=t)))
    if "closed" in pipelines:
        rows.append(_row(spec, value, "closed", closed_form_rates(stats, theta, cfg, spec.rates, spec.solver, t=t)))
    if "pgam" in pipelines:
        theta0 = initial_theta(stats.panel_sizes, spec.theta_seed)
        trace = optimize(stats, cfg, theta0, options=spec.rates, opts=spec.solver, pgam=spec.pgam)
        optimized = closed_form_rates(stats, trace.theta, cfg, spec.rates, spec.solver)
        rows.append(_row(spec, value, "pgam", optimized))
        extras["trace"] = trace.frame()
        if spec.baseline_trials:
            seeds = [int(s) for s in np.random.SeedSequence(spec.seed).generate_state(spec.baseline_trials)]
            baseline = random_baseline(stats, cfg, seeds, spec.rates, spec.solver)
            extras["baseline"] = pd.DataFrame({"seed": seeds, "sum_rate": baseline})
    if spec.dump_residuals and cfg.S > 0:
        lin = cauchy_problem(stats, theta, cfg, spec.solver).lin
        fp = solve_fixed_point(lin, complex(-1.0, spec.solver.spectral_eps), spec.solver)
        extras["residuals"] = fp.residual_frame()
    return rows, extras


# -------------------------
# Output
# -------------------------
def emit_csv(records, path, columns=None):
    """Write records with a header, fixed column order and 12 significant digits."""
    columns = RESULT_COLUMNS if columns is None else columns
    frame = records if isinstance(records, pd.DataFrame) else pd.DataFrame(list(records), columns=columns)
    path = Path(path)
    frame.to_csv(path, index=False, columns=columns, float_format="%.12g", lineterminator="\n", encoding="utf-8")
    return path


def manifest(spec, outputs):
    return {
        "name": spec.name,
        "pipeline": spec.pipeline,
        "config_hash": config_hash(spec.raw),
        "seeds": {"statistics": spec.stats_seed, "theta": spec.theta_seed, "monte_carlo": spec.seed},
        "sweep": {"axis": spec.sweep_axis, "values": list(spec.sweep_values)},
        "rates": asdict(spec.rates),
        "solver": asdict(spec.solver),
        "pgam": asdict(spec.pgam),
        "versions": {"numpy": np.__version__, "scipy": scipy.__version__, "pandas": pd.__version__},
        "outputs": sorted(outputs),
    }


def run(spec, out_dir=OUTPUT_DIR, n_threads=1):
    """Run every sweep point of `spec` and write the tables and the manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows, outputs = [], []
    for index, (value, cfg, stats, theta) in enumerate(sweep_points(spec)):
        logger.info("scenario=%s point=%d %s=%s pipeline=%s", spec.name, index, spec.sweep_axis, value, spec.pipeline)
        point_rows, extras = run_point(spec, value, cfg, stats, theta, n_threads=n_threads)
        rows.extend(point_rows)
        for kind, frame in extras.items():
            path = emit_csv(frame, out_dir / f"{spec.name}_{kind}_{index:02d}.csv", columns=list(frame.columns))
            outputs.append(path.name)

    outputs.append(emit_csv(rows, out_dir / f"{spec.name}.csv").name)
    manifest_path = out_dir / f"{spec.name}_manifest.json"
    with open(manifest_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest(spec, outputs), fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    logger.info("scenario=%s done rows=%d out=%s", spec.name, len(rows), out_dir)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(description="STAR-RIS GSVD-NOMA rate scenarios")
    sub = parser.add_subparsers(dest="command", required=True)
    run_cmd = sub.add_parser("run", help="run a scenario file")
    run_cmd.add_argument("scenario", type=Path, help="TOML scenario file")
    run_cmd.add_argument("--out", type=Path, default=OUTPUT_DIR, help="output directory")
    run_cmd.add_argument(
        "--threads",
        type=int,
        default=config("N_THREADS"),
        help="worker threads for the Monte-Carlo trials of one sweep point; sweep points run in grid order",
    )
    run_cmd.add_argument("--seed", type=int, default=None, help="override the Monte-Carlo seed")
    run_cmd.add_argument("--verbose", action="store_true", help="debug logging")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else getattr(logging, str(config("LOG_LEVEL")).upper(), logging.INFO)
    logging.basicConfig(level=level, format=LOG_FORMAT)
    try:
        spec = ScenarioSpec.from_file(args.scenario)
        if args.seed is not None:
            spec = replace(spec, seed=args.seed)
        return run(spec, args.out, n_threads=args.threads)
    except RateToolkitError as exc:
        logger.error("scenario failed error=%s message=%s", type(exc).__name__, exc)
        return 2
    except OSError as exc:
        logger.error("scenario failed error=%s message=%s", type(exc).__name__, exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
