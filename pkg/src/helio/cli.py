"""Batch command-line surface: synthesize datasets, run experiments, compare reports.

Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 numerical
failure. All outputs are written atomically (temp file + rename) and are
deterministic functions of the config, seeds included.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from numpy.linalg import LinAlgError

from .evaluation import (
    NetMethodConfig,
    ShMethodConfig,
    SynthConfig,
    emit_report,
    load_report,
    run_experiment_detailed,
    synthesize_dataset,
)
from .harmonics import save_sh_model
from .synth import read_dataset_csv, write_dataset_csv
from .training import save_quadrant_checkpoint

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERICAL = 4

DEFAULT_CONFIG = {
    "scenario": "interp",
    "frequencies": [2067.0, 4134.0, 6202.0, 8269.0, 10336.0, 12403.0, 14470.0],
    "seeds": [0],
    "methods": ["SH", "NN", "PINN"],
    "synth": {"order_U": None, "decay": 0.15},
    "sh": {"order_U": None, "gamma": None},
    "net": {"depth_L": 3, "width_W": None, "epochs": 100000, "lr": 0.001, "log_every": 10000},
    "dataset_dir": None,
    "out_dir": "helio-out",
}


class ConfigError(ValueError):
    pass


def _require_keys(section: dict, allowed: dict, where: str) -> None:
    unknown = set(section) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}")


def load_config(path) -> dict:
    """Merge a JSON config over the defaults, rejecting unknown keys."""
    try:
        with open(path) as fh:
            user = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(user, dict):
        raise ConfigError("config must be a JSON object")
    _require_keys(user, DEFAULT_CONFIG, "config")
    cfg = json.loads(json.dumps(DEFAULT_CONFIG))
    for key, value in user.items():
        if isinstance(DEFAULT_CONFIG[key], dict) and value is not None:
            if not isinstance(value, dict):
                raise ConfigError(f"config key {key!r} must be an object")
            _require_keys(value, DEFAULT_CONFIG[key], f"config.{key}")
            cfg[key].update(value)
        else:
            cfg[key] = value
    _validate(cfg)
    return cfg


def _validate(cfg: dict) -> None:
    if cfg["scenario"] not in ("interp", "extrap"):
        raise ConfigError(f"scenario must be interp or extrap, got {cfg['scenario']!r}")
    if not cfg["frequencies"] or any(f <= 0 for f in cfg["frequencies"]):
        raise ConfigError("frequencies must be a nonempty list of positive numbers")
    if not cfg["seeds"] or any(not isinstance(s, int) for s in cfg["seeds"]):
        raise ConfigError("seeds must be a nonempty list of integers")
    bad = [m for m in cfg["methods"] if m not in ("SH", "NN", "PINN")]
    if bad:
        raise ConfigError(f"unknown method(s): {bad}")
    if cfg["net"]["epochs"] < 1 or cfg["net"]["lr"] <= 0:
        raise ConfigError("net.epochs must be >= 1 and net.lr positive")


def _method_configs(cfg: dict):
    synth = SynthConfig(order_U=cfg["synth"]["order_U"], decay=cfg["synth"]["decay"])
    sh = ShMethodConfig(order_U=cfg["sh"]["order_U"], gamma=cfg["sh"]["gamma"])
    net = NetMethodConfig(
        depth_L=cfg["net"]["depth_L"],
        width_W=cfg["net"]["width_W"],
        epochs=cfg["net"]["epochs"],
        lr=cfg["net"]["lr"],
        log_every=cfg["net"]["log_every"],
    )
    return synth, sh, net


def _atomic(path: Path, write_fn) -> None:
    """Run write_fn against a temp path, then rename into place."""
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    write_fn(tmp)
    os.replace(tmp, path)


def _dataset_filename(scenario: str, freq_hz: float, seed: int) -> str:
    return f"dataset_{scenario}_f{freq_hz:g}_s{seed}.csv"


def cmd_synth(cfg: dict, out_dir: Path, jobs: int, dry_run: bool) -> int:
    synth_cfg, _, _ = _method_configs(cfg)
    for seed in cfg["seeds"]:
        for freq in cfg["frequencies"]:
            name = _dataset_filename(cfg["scenario"], freq, seed)
            if dry_run:
                print(f"plan: synth {name}")
                continue
            ds = synthesize_dataset(cfg["scenario"], freq, seed, synth_cfg)
            _atomic(out_dir / name, lambda p, d=ds: write_dataset_csv(d, p))
            print(f"wrote {out_dir / name}")
    return EXIT_OK


def cmd_run(cfg: dict, out_dir: Path, jobs: int, dry_run: bool) -> int:
    synth_cfg, sh_cfg, net_cfg = _method_configs(cfg)
    if dry_run:
        for method in cfg["methods"]:
            for freq in cfg["frequencies"]:
                for seed in cfg["seeds"]:
                    print(f"plan: {method} {cfg['scenario']} f={freq:g} seed={seed}")
        print(f"plan: report -> {out_dir / 'report.csv'}")
        return EXIT_OK

    datasets = None
    if cfg["dataset_dir"]:
        datasets = {}
        ddir = Path(cfg["dataset_dir"])
        for freq in cfg["frequencies"]:
            for seed in cfg["seeds"]:
                path = ddir / _dataset_filename(cfg["scenario"], freq, seed)
                if not path.exists():
                    raise FileNotFoundError(f"dataset file missing: {path}")
                datasets[(freq, seed)] = read_dataset_csv(path)

    report, results = run_experiment_detailed(
        cfg["scenario"],
        cfg["methods"],
        cfg["frequencies"],
        cfg["seeds"],
        sh_cfg=sh_cfg,
        net_cfg=net_cfg,
        synth_cfg=synth_cfg,
        jobs=jobs,
        datasets=datasets,
    )
    _atomic(out_dir / "report.csv", lambda p: emit_report(report, p))
    print(f"wrote {out_dir / 'report.csv'}")

    ckpt_dir = out_dir / "checkpoints"
    failures = []
    for res in results:
        if res.failure is not None:
            failures.append(res)
            continue
        stem = f"{res.method}_{cfg['scenario']}_f{res.freq_hz:g}_s{res.seed}"
        if res.method == "SH":
            _atomic(ckpt_dir / f"{stem}.json", lambda p, m=res.model: save_sh_model(m, p))
        else:
            _atomic(ckpt_dir / f"{stem}.json", lambda p, m=res.model: save_quadrant_checkpoint(m, p))
    for res in failures:
        print(
            f"FAILED: {res.method} f={res.freq_hz:g} seed={res.seed}: {res.failure}",
            file=sys.stderr,
        )
    return EXIT_NUMERICAL if failures else EXIT_OK


def _report_keymap(report, method_filter: str | None, which: str) -> dict:
    rows = [r for r in report.rows if method_filter is None or r.method == method_filter]
    if not rows:
        raise ConfigError(f"report {which} has no rows" + (f" for method {method_filter}" if method_filter else ""))
    keyed = {}
    for r in rows:
        key = (r.freq_hz, r.seed)
        if key in keyed:
            raise ConfigError(
                f"report {which} has multiple rows for freq={r.freq_hz:g} seed={r.seed}; "
                "select one method with --method-a/--method-b"
            )
        keyed[key] = r
    return keyed


def cmd_compare(path_a, path_b, method_a: str | None, method_b: str | None, out: Path | None) -> int:
    a = _report_keymap(load_report(path_a), method_a, "A")
    b = _report_keymap(load_report(path_b), method_b, "B")
    common = sorted(set(a) & set(b))
    if not common:
        raise ConfigError("reports share no (freq, seed) keys")

    lines = [["freq_hz", "seed", "error_a_db", "error_b_db", "delta_db"]]
    by_freq: dict[float, list[float]] = {}
    for key in common:
        delta = a[key].error_db - b[key].error_db
        lines.append([f"{key[0]:g}", str(key[1]), str(a[key].error_db), str(b[key].error_db), str(delta)])
        by_freq.setdefault(key[0], []).append(delta)
    for freq in sorted(by_freq):
        mean = sum(by_freq[freq]) / len(by_freq[freq])
        lines.append([f"{freq:g}", "mean", "", "", str(mean)])

    text = "\n".join(",".join(row) for row in lines) + "\n"
    print(text, end="")
    if out is not None:
        _atomic(out, lambda p: p.write_text(text))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="helio", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, required=True, help="JSON config path")
    common.add_argument("--out", type=Path, default=None, help="output directory (overrides config)")
    common.add_argument("--jobs", type=int, default=None, help="parallel trainings (default $HELIO_JOBS or 1)")
    common.add_argument("--dry-run", action="store_true", help="print planned jobs, write nothing")
    common.add_argument("--seed", type=int, default=None, help="replace config seeds with this one")

    sub.add_parser("synth", parents=[common], help="write one dataset CSV per (seed, frequency)")
    sub.add_parser("run", parents=[common], help="run the experiment and write report + checkpoints")

    cmp_p = sub.add_parser("compare", help="per-key error deltas between two reports")
    cmp_p.add_argument("report_a", type=Path)
    cmp_p.add_argument("report_b", type=Path)
    cmp_p.add_argument("--method-a", default=None, help="restrict report A to one method")
    cmp_p.add_argument("--method-b", default=None, help="restrict report B to one method")
    cmp_p.add_argument("--out", type=Path, default=None, help="also write the delta table here")

    sub.add_parser("defaults", help="print the default config JSON")
    return parser


def _resolve_jobs(args) -> int:
    if getattr(args, "jobs", None) is not None:
        return max(1, args.jobs)
    env = os.environ.get("HELIO_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"HELIO_JOBS is not an integer: {env!r}") from exc
    return 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "defaults":
            print(json.dumps(DEFAULT_CONFIG, indent=2))
            return EXIT_OK
        if args.command == "compare":
            return cmd_compare(args.report_a, args.report_b, args.method_a, args.method_b, args.out)

        cfg = load_config(args.config)
        if args.seed is not None:
            cfg["seeds"] = [args.seed]
        out_dir = args.out if args.out is not None else Path(cfg["out_dir"])
        jobs = _resolve_jobs(args)
        if args.command == "synth":
            return cmd_synth(cfg, out_dir, jobs, args.dry_run)
        return cmd_run(cfg, out_dir, jobs, args.dry_run)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ArithmeticError, ValueError, LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
