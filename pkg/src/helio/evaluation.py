"""Upsampling error metric, experiment harness, and report emission.

An experiment run synthesizes one field per (seed, frequency), fits or
trains each requested method on the known subset, and scores the unknown
subset with the summed-magnitude error ratio in dB. "Subjects" are seeds of
the synthetic generator. Network trainings (4 per network method per run)
are independent and can be fanned out over worker processes; results are
assembled in a canonical order so reports do not depend on scheduling.
"""

from __future__ import annotations

import csv
import json
import math
import multiprocessing
from dataclasses import dataclass

import numpy as np

from .geometry import build_extrap_grid, build_interp_grid
from .harmonics import ShFitConfig, default_gamma, sh_fit, sh_order_for_freq, sh_predict
from .network import MlpParams, MlpSpec
from .synth import FieldDataset, SynthSpec, normalize, synth_coeffs, synth_field
from .training import (
    PART_NAMES,
    CollocationSet,
    PhysicsParams,
    TrainConfig,
    TrainingDivergedError,
    assemble,
    pinn_width_for_freq,
    predict,
    split_parts,
    train,
)

ERROR_FLOOR_DB = -300.0

METHODS = ("SH", "NN", "PINN")

PAPER_FREQS_HZ = (2067.0, 4134.0, 6202.0, 8269.0, 10336.0, 12403.0, 14470.0)


@dataclass(frozen=True)
class ShMethodConfig:
    """SH baseline settings; None fields fall back to the built-in rules."""

    order_U: int | None = None
    gamma: float | None = None


@dataclass(frozen=True)
class NetMethodConfig:
    """Shared settings of the NN and PINN methods."""

    depth_L: int = 3
    width_W: int | None = None
    epochs: int = 100_000
    lr: float = 0.001
    log_every: int = 10_000


@dataclass(frozen=True)
class SynthConfig:
    """Synthetic-subject generator settings; order defaults to the rule."""

    order_U: int | None = None
    decay: float = 0.15


@dataclass(frozen=True)
class ReportRow:
    method: str
    spec: str
    freq_hz: float
    seed: int
    error_db: float


@dataclass(frozen=True)
class ErrorReport:
    rows: tuple[ReportRow, ...]

    def __post_init__(self):
        keys = [(r.method, r.spec, r.freq_hz, r.seed) for r in self.rows]
        if len(set(keys)) != len(keys):
            raise ValueError("duplicate (method, spec, freq, seed) rows")


@dataclass
class RunResult:
    """One method on one synthetic subject at one frequency, with artifacts."""

    method: str
    spec: str
    freq_hz: float
    seed: int
    error_db: float
    predictions: np.ndarray | None = None
    truth: np.ndarray | None = None
    known_pressures: np.ndarray | None = None
    model: object | None = None
    failure: str | None = None

    @property
    def row(self) -> ReportRow:
        return ReportRow(self.method, self.spec, self.freq_hz, self.seed, self.error_db)


def upsample_error(truth: np.ndarray, est: np.ndarray) -> float:
    """20 log10 of summed |truth - est| over summed |truth|, floored at -300 dB."""
    truth = np.asarray(truth)
    est = np.asarray(est)
    if truth.shape != est.shape or truth.ndim != 1 or len(truth) == 0:
        raise ValueError("truth and estimate must be equal-length nonempty vectors")
    denom = float(np.sum(np.abs(truth)))
    if denom == 0.0:
        raise ValueError("degenerate error: ground truth is identically zero")
    num = float(np.sum(np.abs(truth - est)))
    if num == 0.0:
        return ERROR_FLOOR_DB
    return max(ERROR_FLOOR_DB, 20.0 * math.log10(num / denom))


def grid_for_scenario(scenario: str):
    if scenario == "interp":
        return build_interp_grid()
    if scenario == "extrap":
        return build_extrap_grid()
    raise ValueError(f"unknown scenario {scenario!r}")


def synthesize_dataset(
    scenario: str, freq_hz: float, seed: int, synth_cfg: SynthConfig | None = None
) -> FieldDataset:
    """Normalized synthetic field on the scenario grid for one subject seed."""
    synth_cfg = synth_cfg or SynthConfig()
    order = synth_cfg.order_U if synth_cfg.order_U is not None else sh_order_for_freq(freq_hz)
    model = synth_coeffs(SynthSpec(order, seed, synth_cfg.decay))
    return normalize(synth_field(model, grid_for_scenario(scenario), freq_hz))


def _sh_spec_string(order: int, gamma: float) -> str:
    return f"U={order},gamma={gamma:g}"


def _net_spec_string(depth: int, width: int, cfg: NetMethodConfig) -> str:
    return f"L={depth},W={width},epochs={cfg.epochs},lr={cfg.lr:g}"


def _part_seed(seed: int, part_index: int) -> int:
    """Distinct deterministic init seed per part, shared by NN and PINN."""
    return seed * len(PART_NAMES) + part_index


def run_sh(scenario: str, ds: FieldDataset, cfg: ShMethodConfig | None = None, seed: int = 0) -> RunResult:
    """Fit the regularized expansion on the known set, score the unknown set."""
    cfg = cfg or ShMethodConfig()
    order = cfg.order_U if cfg.order_U is not None else sh_order_for_freq(ds.freq_hz)
    gamma = cfg.gamma if cfg.gamma is not None else default_gamma(scenario, ds.freq_hz)
    model = sh_fit(ds.known_pressures, ds.known_directions, ShFitConfig(order, gamma))
    est = sh_predict(model, ds.unknown_directions)
    return RunResult(
        method="SH",
        spec=_sh_spec_string(order, gamma),
        freq_hz=ds.freq_hz,
        seed=seed,
        error_db=upsample_error(ds.unknown_pressures, est),
        predictions=est,
        truth=ds.unknown_pressures,
        known_pressures=ds.known_pressures,
        model=model,
    )


def _train_part_task(args):
    """Worker entry: train one part network. Returns (key, params, error)."""
    key, part, colloc_points, phys, cfg = args
    try:
        colloc = CollocationSet(colloc_points) if colloc_points is not None else None
        result = train(part, colloc, phys, cfg)
        return key, result.params, None
    except TrainingDivergedError as exc:
        return key, None, str(exc)


def _net_tasks(method: str, ds: FieldDataset, cfg: NetMethodConfig, seed: int):
    """The four part-training task tuples of one network-method run."""
    width = cfg.width_W if cfg.width_W is not None else pinn_width_for_freq(ds.freq_hz)
    spec = MlpSpec(cfg.depth_L, width)
    phys = PhysicsParams(ds.freq_hz)
    parts = split_parts(ds)
    tasks = []
    for i, name in enumerate(PART_NAMES):
        part = parts[name]
        train_cfg = TrainConfig(
            spec=spec,
            epochs=cfg.epochs,
            lr=cfg.lr,
            pde_loss_enabled=(method == "PINN"),
            seed=_part_seed(seed, i),
            log_every=cfg.log_every,
        )
        colloc_points = part.points if method == "PINN" else None
        key = (method, ds.freq_hz, seed, name)
        tasks.append((key, part, colloc_points, phys, train_cfg))
    return tasks, spec, phys


def _assemble_net_result(
    method: str,
    ds: FieldDataset,
    cfg: NetMethodConfig,
    seed: int,
    spec: MlpSpec,
    phys: PhysicsParams,
    part_params: dict[str, MlpParams | None],
    failures: dict[str, str],
) -> RunResult:
    spec_str = _net_spec_string(spec.depth_L, spec.width_W, cfg)
    if failures:
        detail = "; ".join(f"{name}: {msg}" for name, msg in sorted(failures.items()))
        return RunResult(
            method=method,
            spec=spec_str,
            freq_hz=ds.freq_hz,
            seed=seed,
            error_db=float("nan"),
            known_pressures=ds.known_pressures,
            failure=detail,
        )
    model = assemble(part_params, phys, ds.geometry, ds.scale)
    est = predict(model, ds.unknown_directions)
    return RunResult(
        method=method,
        spec=spec_str,
        freq_hz=ds.freq_hz,
        seed=seed,
        error_db=upsample_error(ds.unknown_pressures, est),
        predictions=est,
        truth=ds.unknown_pressures,
        known_pressures=ds.known_pressures,
        model=model,
    )


def run_experiment_detailed(
    scenario: str,
    methods,
    freqs,
    seeds,
    sh_cfg: ShMethodConfig | None = None,
    net_cfg: NetMethodConfig | None = None,
    synth_cfg: SynthConfig | None = None,
    jobs: int = 1,
    datasets: dict | None = None,
) -> tuple[ErrorReport, list[RunResult]]:
    """Run every (method, freq, seed) combination; returns report and artifacts.

    Fields are synthesized per (freq, seed) unless preloaded ones are passed
    in via datasets. Training aborts become rows with error_db = nan and a
    failure note on the RunResult instead of disappearing.
    """
    methods = list(methods)
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}")
    net_cfg = net_cfg or NetMethodConfig()

    if datasets is None:
        datasets = {
            (f, s): synthesize_dataset(scenario, f, s, synth_cfg) for f in freqs for s in seeds
        }
    else:
        missing = [(f, s) for f in freqs for s in seeds if (f, s) not in datasets]
        if missing:
            raise ValueError(f"datasets missing for (freq, seed) pairs: {missing}")

    results: dict[tuple, RunResult] = {}
    tasks = []
    net_meta = {}
    for f in freqs:
        for s in seeds:
            ds = datasets[(f, s)]
            for method in methods:
                if method == "SH":
                    results[("SH", f, s)] = run_sh(scenario, ds, sh_cfg, seed=s)
                else:
                    run_tasks, spec, phys = _net_tasks(method, ds, net_cfg, s)
                    net_meta[(method, f, s)] = (spec, phys)
                    tasks.extend(run_tasks)

    part_results: dict[tuple, tuple[MlpParams | None, str | None]] = {}
    if tasks:
        if jobs > 1:
            with multiprocessing.get_context("fork").Pool(processes=jobs) as pool:
                for key, params, err in pool.imap_unordered(_train_part_task, tasks):
                    part_results[key] = (params, err)
        else:
            for task in tasks:
                key, params, err = _train_part_task(task)
                part_results[key] = (params, err)

    for (method, f, s), (spec, phys) in net_meta.items():
        ds = datasets[(f, s)]
        part_params, failures = {}, {}
        for name in PART_NAMES:
            params, err = part_results[(method, f, s, name)]
            if err is not None:
                failures[name] = err
            else:
                part_params[name] = params
        results[(method, f, s)] = _assemble_net_result(
            method, ds, net_cfg, s, spec, phys, part_params, failures
        )

    ordered = [results[k] for k in sorted(results, key=lambda k: (k[0], k[1], k[2]))]
    report = ErrorReport(tuple(r.row for r in ordered))
    return report, ordered


def run_experiment(
    scenario: str,
    methods,
    freqs,
    seeds,
    sh_cfg: ShMethodConfig | None = None,
    net_cfg: NetMethodConfig | None = None,
    synth_cfg: SynthConfig | None = None,
    jobs: int = 1,
    datasets: dict | None = None,
) -> ErrorReport:
    """Like run_experiment_detailed but returning only the report rows."""
    report, _ = run_experiment_detailed(
        scenario, methods, freqs, seeds, sh_cfg, net_cfg, synth_cfg, jobs, datasets
    )
    return report


REPORT_HEADER = ["method", "spec", "freq_hz", "seed", "error_db"]


def emit_report(report: ErrorReport, path) -> None:
    """Write the report as CSV in the canonical (method, freq, seed) order."""
    rows = sorted(report.rows, key=lambda r: (r.method, r.freq_hz, r.seed))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_HEADER)
        for r in rows:
            writer.writerow([r.method, r.spec, r.freq_hz, r.seed, r.error_db])


def emit_report_json(report: ErrorReport, path) -> None:
    rows = sorted(report.rows, key=lambda r: (r.method, r.freq_hz, r.seed))
    payload = {
        "rows": [
            {
                "method": r.method,
                "spec": r.spec,
                "freq_hz": r.freq_hz,
                "seed": r.seed,
                "error_db": r.error_db,
            }
            for r in rows
        ]
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)


def load_report(path) -> ErrorReport:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != REPORT_HEADER:
            raise ValueError(f"unexpected report header in {path}: {reader.fieldnames}")
        rows = tuple(
            ReportRow(
                row["method"],
                row["spec"],
                float(row["freq_hz"]),
                int(row["seed"]),
                float(row["error_db"]),
            )
            for row in reader
        )
    return ErrorReport(rows)
