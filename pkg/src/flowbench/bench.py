"""Benchmark harness: plan a sweep from a TOML config, execute runs,
aggregate records into CSV reports.

plan() expands the Cartesian product of the config axes in a fixed,
documented order (targets, dims, architectures, n_bijectors, hidden,
n_train, repetitions), deduplicating repeated axis values. Each run gets a
seed derived from (master_seed, "run", run_index); targets derive theirs
from (master_seed, "target", kind, dim) so every architecture in a sweep
faces the same target instance.

execute() writes one JSON record per run (atomically, so interrupted
sweeps leave no torn files) and can resume by skipping runs whose record
already exists. A failing run produces a status="failed" record and the
sweep continues. report() turns the records of a sweep into one CSV per
metric plus a plain-text summary naming the best architecture per
(target, dim) under each metric.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .distributions import TARGET_KINDS, make_target
from .errors import ConfigError
from .metrics import MetricConfig, compute_metric_report
from .rng import derive_seed
from .training import ARCHITECTURES, TrainConfig, build_flow, train

import hashlib

__version__ = "0.1.0"

_TRAIN_KEYS = (
    "batch_size",
    "n_stages",
    "max_epochs_per_stage",
    "patience",
    "lr_initial",
    "lr_decay",
    "val_fraction",
    "spline_bins",
    "spline_bound",
    "permutation",
)
_METRIC_KEYS = ("n_batches", "batch_size", "fnorm_samples")
_AXIS_KEYS = (
    "architectures",
    "targets",
    "dims",
    "n_bijectors",
    "hidden",
    "n_train",
    "repetitions",
)


@dataclass
class RunSpec:
    """Everything needed to reproduce one run, seeds included."""

    run_id: str
    run_index: int
    architecture: str
    target: str
    dim: int
    n_bijectors: int
    hidden_sizes: list[int]
    n_train: int
    repetition: int
    seed: int
    target_seed: int
    train_options: dict
    metric_options: dict

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "RunSpec":
        return cls(**obj)


def load_config(path) -> dict:
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _dedup(values: list) -> list:
    seen: list = []
    for v in values:
        if v not in seen:
            seen.append(v)
    return seen


def _require_list(axes: dict, key: str, elem_check, what: str) -> list:
    if key not in axes:
        raise ConfigError(f"[axes] is missing {key!r}")
    value = axes[key]
    if not isinstance(value, list):
        raise ConfigError(f"[axes] {key} must be a list, got {type(value).__name__}")
    for v in value:
        if not elem_check(v):
            raise ConfigError(f"[axes] {key} has invalid entry {v!r} ({what})")
    return _dedup(value)


def plan(config: dict) -> list[RunSpec]:
    """Expand a parsed config into an ordered, seeded list of runs."""
    if "master_seed" not in config or not isinstance(config["master_seed"], int):
        raise ConfigError("config needs an integer master_seed")
    master = config["master_seed"]
    axes = config.get("axes")
    if not isinstance(axes, dict):
        raise ConfigError("config needs an [axes] table")
    unknown = set(axes) - set(_AXIS_KEYS)
    if unknown:
        raise ConfigError(f"unknown [axes] keys: {sorted(unknown)}")

    archs = _require_list(
        axes, "architectures", lambda v: v in ARCHITECTURES, f"one of {ARCHITECTURES}"
    )
    targets = _require_list(
        axes, "targets", lambda v: v in TARGET_KINDS, f"one of {TARGET_KINDS}"
    )
    dims = _require_list(axes, "dims", lambda v: isinstance(v, int) and v >= 1, "int >= 1")
    n_bij = _require_list(
        axes, "n_bijectors", lambda v: isinstance(v, int) and v >= 1, "int >= 1"
    )
    hidden = _require_list(
        axes,
        "hidden",
        lambda v: isinstance(v, list)
        and len(v) >= 1
        and all(isinstance(h, int) and h >= 1 for h in v),
        "non-empty list of ints >= 1",
    )
    n_train = _require_list(
        axes, "n_train", lambda v: isinstance(v, int) and v >= 10, "int >= 10"
    )
    repetitions = axes.get("repetitions", 1)
    if not isinstance(repetitions, int) or repetitions < 0:
        raise ConfigError(f"[axes] repetitions must be an int >= 0, got {repetitions!r}")

    train_options = dict(config.get("train", {}))
    unknown = set(train_options) - set(_TRAIN_KEYS)
    if unknown:
        raise ConfigError(f"unknown [train] keys: {sorted(unknown)}")
    metric_options = dict(config.get("metrics", {}))
    unknown = set(metric_options) - set(_METRIC_KEYS)
    if unknown:
        raise ConfigError(f"unknown [metrics] keys: {sorted(unknown)}")

    runs: list[RunSpec] = []
    index = 0
    for target in targets:
        for dim in dims:
            target_seed = derive_seed(master, "target", target, dim)
            for arch in archs:
                for nb in n_bij:
                    for h in hidden:
                        for nt in n_train:
                            for rep in range(repetitions):
                                seed = derive_seed(master, "run", index)
                                body = {
                                    "architecture": arch,
                                    "target": target,
                                    "dim": dim,
                                    "n_bijectors": nb,
                                    "hidden_sizes": list(h),
                                    "n_train": nt,
                                    "repetition": rep,
                                    "seed": seed,
                                    "target_seed": target_seed,
                                    "train_options": train_options,
                                    "metric_options": metric_options,
                                }
                                digest = hashlib.sha256(
                                    json.dumps(body, sort_keys=True).encode()
                                ).hexdigest()[:12]
                                runs.append(
                                    RunSpec(run_id=digest, run_index=index, **body)
                                )
                                index += 1
    return runs


def _train_config(spec: RunSpec) -> TrainConfig:
    return TrainConfig(
        n_bijectors=spec.n_bijectors,
        hidden_sizes=tuple(spec.hidden_sizes),
        n_train=spec.n_train,
        seed=spec.seed,
        **spec.train_options,
    )


def execute_run(spec: RunSpec, out_dir) -> dict:
    """Train, sample, and score one run; never raises, returns the record."""
    out_dir = Path(out_dir)
    started = time.time()
    record = {
        "run": spec.to_json(),
        "status": "failed",
        "error": None,
        "train": None,
        "metrics": None,
        "checkpoint": None,
        "seconds": 0.0,
        "package_version": __version__,
    }
    try:
        target = make_target(spec.target, spec.dim, spec.target_seed)
        cfg = _train_config(spec)
        model = build_flow(spec.architecture, spec.dim, cfg)
        ckpt = out_dir / "checkpoints" / spec.run_id
        train_report = train(model, target, cfg, checkpoint_path=ckpt)
        record["train"] = train_report.to_json()
        record["checkpoint"] = train_report.checkpoint_path
        if train_report.status != "completed":
            record["error"] = f"training {train_report.status}"
        else:
            mcfg = MetricConfig(**spec.metric_options)
            need = mcfg.eval_samples
            real = target.sample(need, derive_seed(spec.seed, "eval-target")).data
            flow = model.sample(need, derive_seed(spec.seed, "eval-flow"))
            record["metrics"] = compute_metric_report(real, flow, mcfg).__dict__
            record["status"] = "completed"
    except Exception:
        record["error"] = traceback.format_exc(limit=20)
    record["seconds"] = time.time() - started
    return record


def _record_path(out_dir, run_id: str) -> Path:
    return Path(out_dir) / "records" / f"{run_id}.json"


def _write_record(out_dir, record: dict) -> None:
    path = _record_path(out_dir, record["run"]["run_id"])
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(record, sort_keys=True, indent=1) + "\n")
    os.replace(tmp, path)


def _load_record(out_dir, run_id: str) -> dict | None:
    path = _record_path(out_dir, run_id)
    if not path.exists():
        return None
    try:
        return json.loads(path.read_text())
    except (OSError, json.JSONDecodeError):
        return None


def _worker(payload: tuple) -> str:
    spec_obj, out_dir = payload
    record = execute_run(RunSpec.from_json(spec_obj), out_dir)
    _write_record(out_dir, record)
    return record["run"]["run_id"]


def execute(
    runs: list[RunSpec],
    out_dir,
    parallel: int = 1,
    resume: bool = False,
    log=None,
) -> list[dict]:
    """Run a planned sweep, one record file per run; returns the records.

    resume=True skips runs whose record file already parses. parallel=1
    executes in-process (deterministic order); higher values fan runs out
    to worker processes.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    say = log or (lambda msg: None)
    todo: list[RunSpec] = []
    for spec in runs:
        if resume and _load_record(out_dir, spec.run_id) is not None:
            say(f"skip {spec.run_id} (record exists)")
            continue
        todo.append(spec)
    if parallel <= 1:
        for spec in todo:
            say(f"run {spec.run_id}: {spec.architecture} on {spec.target} d={spec.dim}")
            record = execute_run(spec, out_dir)
            _write_record(out_dir, record)
            say(f"  -> {record['status']} in {record['seconds']:.1f}s")
    else:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            payloads = [(spec.to_json(), str(out_dir)) for spec in todo]
            for run_id in pool.map(_worker, payloads):
                say(f"done {run_id}")
    records = []
    for spec in runs:
        record = _load_record(out_dir, spec.run_id)
        if record is not None:
            records.append(record)
    return records


_METRIC_COLUMNS = {
    "ks": [("ks_p_median", "ks_p_median")],
    "wasserstein": [
        ("w_median", "w_median"),
        ("w_median_normalized", "w_median_normalized"),
    ],
    "fnorm": [("f_norm", "f_norm")],
}


def _metric_sort_key(metric: str, value: float) -> float:
    # smaller is better for W and F-norm; KS p should sit near 0.5
    return abs(value - 0.5) if metric == "ks" else value


def _best_column(metric: str) -> str:
    return {"ks": "ks_p_median", "wasserstein": "w_median_normalized", "fnorm": "f_norm"}[
        metric
    ]


def report(out_dir) -> Path:
    """Aggregate the records under out_dir into report/ CSVs and a summary.

    Output bytes are a deterministic function of the record set: rows are
    sorted by (target, dim, architecture, run_index) and floats rendered
    with repr.
    """
    out_dir = Path(out_dir)
    records_dir = out_dir / "records"
    records = []
    for path in sorted(records_dir.glob("*.json")):
        try:
            records.append(json.loads(path.read_text()))
        except (OSError, json.JSONDecodeError):
            continue
    report_dir = out_dir / "report"
    report_dir.mkdir(parents=True, exist_ok=True)

    def sort_key(rec):
        run = rec["run"]
        return (run["target"], run["dim"], run["architecture"], run["run_index"])

    records.sort(key=sort_key)
    completed = [r for r in records if r["status"] == "completed"]

    base_cols = [
        "target",
        "dim",
        "architecture",
        "run_id",
        "n_bijectors",
        "hidden_sizes",
        "n_train",
        "repetition",
    ]
    for metric, value_cols in _METRIC_COLUMNS.items():
        with open(report_dir / f"{metric}.csv", "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(base_cols + [col for col, _ in value_cols])
            for rec in completed:
                run = rec["run"]
                row = [
                    run["target"],
                    run["dim"],
                    run["architecture"],
                    run["run_id"],
                    run["n_bijectors"],
                    "x".join(str(h) for h in run["hidden_sizes"]),
                    run["n_train"],
                    run["repetition"],
                ]
                row += [repr(float(rec["metrics"][key])) for _, key in value_cols]
                writer.writerow(row)

    lines = []
    groups: dict[tuple, list[dict]] = {}
    for rec in completed:
        groups.setdefault((rec["run"]["target"], rec["run"]["dim"]), []).append(rec)
    for (target, dim), recs in sorted(groups.items()):
        lines.append(f"target={target} dim={dim}")
        for metric in _METRIC_COLUMNS:
            key = _best_column(metric)
            best: dict | None = None
            for rec in recs:
                value = float(rec["metrics"][key])
                if best is None or _metric_sort_key(metric, value) < _metric_sort_key(
                    metric, float(best["metrics"][key])
                ):
                    best = rec
            if best is None:
                continue
            run = best["run"]
            hidden = "x".join(str(h) for h in run["hidden_sizes"])
            lines.append(
                f"  {key}: best architecture {run['architecture']}"
                f" ({key}={repr(float(best['metrics'][key]))},"
                f" run {run['run_id']}, n_bijectors={run['n_bijectors']},"
                f" hidden={hidden}, n_train={run['n_train']})"
            )
    failed = [r for r in records if r["status"] != "completed"]
    if failed:
        lines.append("failed runs:")
        for rec in failed:
            lines.append(f"  {rec['run']['run_id']}: {rec['run']['architecture']}"
                         f" on {rec['run']['target']} d={rec['run']['dim']}")
    (report_dir / "summary.txt").write_text("\n".join(lines) + "\n")
    return report_dir


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="flowbench",
        description="Plan, execute, and report normalizing-flow benchmark sweeps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_plan = sub.add_parser("plan", help="expand a config into its run list")
    p_plan.add_argument("--config", required=True)
    p_plan.add_argument("--out", default=None, help="directory for plan.json")

    p_run = sub.add_parser("run", help="execute a sweep")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--parallel", type=int, default=1)
    p_run.add_argument("--resume", action="store_true")

    p_report = sub.add_parser("report", help="aggregate records into CSVs")
    p_report.add_argument("--out", required=True)

    args = parser.parse_args(argv)

    if args.command == "plan":
        runs = plan(load_config(args.config))
        for spec in runs:
            hidden = "x".join(str(h) for h in spec.hidden_sizes)
            print(
                f"{spec.run_id}  {spec.architecture:8s} {spec.target:4s}"
                f" d={spec.dim:<3d} nb={spec.n_bijectors} h={hidden}"
                f" n={spec.n_train} rep={spec.repetition}"
            )
        print(f"{len(runs)} runs")
        if args.out:
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            (out / "plan.json").write_text(
                json.dumps([r.to_json() for r in runs], sort_keys=True, indent=1) + "\n"
            )
        return 0

    if args.command == "run":
        runs = plan(load_config(args.config))
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "plan.json").write_text(
            json.dumps([r.to_json() for r in runs], sort_keys=True, indent=1) + "\n"
        )
        records = execute(
            runs, out, parallel=args.parallel, resume=args.resume, log=print
        )
        done = sum(1 for r in records if r["status"] == "completed")
        print(f"{done}/{len(runs)} runs completed")
        return 0

    if args.command == "report":
        report_dir = report(args.out)
        print((report_dir / "summary.txt").read_text(), end="")
        return 0

    return 2  # pragma: no cover


if __name__ == "__main__":
    sys.exit(main())
