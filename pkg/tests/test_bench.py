"""Sweep planning, execution records, resume, reporting, and the CLI."""

import hashlib
import json

import numpy as np
import pytest

import flowbench.bench as bench
from flowbench.bench import (
    RunSpec,
    execute,
    execute_run,
    load_config,
    main,
    plan,
    report,
    _load_record,
    _write_record,
)
from flowbench.errors import ConfigError
from flowbench.rng import derive_seed
from flowbench.training import TrainReport


def small_config(**overrides) -> dict:
    cfg = {
        "master_seed": 42,
        "axes": {
            "architectures": ["realnvp", "maf"],
            "targets": ["mog"],
            "dims": [1, 2],
            "n_bijectors": [1],
            "hidden": [[4]],
            "n_train": [300],
            "repetitions": 1,
        },
        "train": {
            "n_stages": 1,
            "max_epochs_per_stage": 2,
            "patience": 2,
            "batch_size": 128,
        },
        "metrics": {"n_batches": 2, "batch_size": 50, "fnorm_samples": 100},
    }
    cfg.update(overrides)
    return cfg


def test_plan_count_and_iteration_order():
    cfg = small_config()
    cfg["axes"]["dims"] = [2, 1]
    cfg["axes"]["repetitions"] = 2
    runs = plan(cfg)
    assert len(runs) == 2 * 2 * 1 * 1 * 1 * 2  # archs * dims * reps
    # outermost target, then dim, then architecture, then repetition
    key = [(r.target, r.dim, r.architecture, r.repetition) for r in runs]
    assert key == [
        ("mog", 2, "realnvp", 0),
        ("mog", 2, "realnvp", 1),
        ("mog", 2, "maf", 0),
        ("mog", 2, "maf", 1),
        ("mog", 1, "realnvp", 0),
        ("mog", 1, "realnvp", 1),
        ("mog", 1, "maf", 0),
        ("mog", 1, "maf", 1),
    ]
    assert [r.run_index for r in runs] == list(range(8))


def test_plan_seeds_and_shared_target_seed():
    runs = plan(small_config())
    for r in runs:
        assert r.seed == derive_seed(42, "run", r.run_index)
        assert r.target_seed == derive_seed(42, "target", r.target, r.dim)
    by_dim = {}
    for r in runs:
        by_dim.setdefault(r.dim, set()).add(r.target_seed)
    # all architectures at a (target, dim) share the target seed
    assert all(len(s) == 1 for s in by_dim.values())
    assert by_dim[1] != by_dim[2]


def test_plan_run_ids_are_stable_and_unique():
    a = plan(small_config())
    b = plan(small_config())
    assert [r.run_id for r in a] == [r.run_id for r in b]
    assert len({r.run_id for r in a}) == len(a)
    # the id is the truncated digest of the canonical spec body
    spec = a[0]
    body = spec.to_json()
    del body["run_id"], body["run_index"]
    digest = hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()
    assert spec.run_id == digest[:12]


def test_plan_dedups_axis_values():
    cfg = small_config()
    cfg["axes"]["dims"] = [1, 1, 2, 1]
    runs = plan(cfg)
    assert sorted({r.dim for r in runs}) == [1, 2]
    assert len(runs) == 4  # 2 archs x 2 distinct dims


def test_plan_validation_errors():
    cfg = small_config()
    del cfg["master_seed"]
    with pytest.raises(ConfigError):
        plan(cfg)
    cfg = small_config()
    cfg["axes"]["architectures"] = ["glow"]
    with pytest.raises(ConfigError):
        plan(cfg)
    cfg = small_config()
    cfg["axes"]["bogus"] = [1]
    with pytest.raises(ConfigError):
        plan(cfg)
    cfg = small_config()
    del cfg["axes"]["dims"]
    with pytest.raises(ConfigError):
        plan(cfg)
    cfg = small_config()
    cfg["train"]["weight_decay"] = 0.1
    with pytest.raises(ConfigError):
        plan(cfg)
    cfg = small_config()
    cfg["metrics"]["n_eval"] = 10
    with pytest.raises(ConfigError):
        plan(cfg)
    cfg = small_config()
    cfg["axes"]["hidden"] = [4]  # must be a list of lists
    with pytest.raises(ConfigError):
        plan(cfg)


def test_plan_repetitions_zero_gives_empty_plan():
    cfg = small_config()
    cfg["axes"]["repetitions"] = 0
    assert plan(cfg) == []


def test_record_write_and_load_round_trip(tmp_path):
    record = {"run": {"run_id": "abc123def456"}, "status": "completed"}
    _write_record(tmp_path, record)
    assert _load_record(tmp_path, "abc123def456") == record
    assert _load_record(tmp_path, "nope") is None
    # corrupt record parses to None so resume re-runs it
    path = tmp_path / "records" / "abc123def456.json"
    path.write_text("{broken")
    assert _load_record(tmp_path, "abc123def456") is None


@pytest.fixture(scope="module")
def sweep(tmp_path_factory):
    out = tmp_path_factory.mktemp("sweep")
    cfg = small_config()
    cfg["axes"]["dims"] = [1]
    runs = plan(cfg)
    records = execute(runs, out, parallel=1, resume=False)
    return cfg, runs, out, records


def test_execute_writes_completed_records(sweep):
    cfg, runs, out, records = sweep
    assert len(records) == len(runs) == 2
    for spec, rec in zip(runs, records):
        assert rec["run"]["run_id"] == spec.run_id
        assert rec["status"] == "completed"
        assert rec["error"] is None
        assert rec["train"]["status"] == "completed"
        assert rec["metrics"]["dim"] == spec.dim
        assert (out / "records" / f"{spec.run_id}.json").exists()
        assert (out / "checkpoints" / f"{spec.run_id}.npz").exists()


def test_execute_resume_skips_existing_records(sweep):
    cfg, runs, out, records = sweep
    skipped = []
    execute(runs, out, parallel=1, resume=True, log=skipped.append)
    assert sum("skip" in line for line in skipped) == len(runs)
    # records untouched: same parsed content
    again = [_load_record(out, r.run_id) for r in runs]
    assert again == records


def test_execute_rerun_is_bit_reproducible(sweep, tmp_path):
    cfg, runs, out, records = sweep
    fresh = execute(runs, tmp_path, parallel=1, resume=False)

    def strip_timing(stages):
        return [{k: v for k, v in s.items() if k != "seconds"} for s in stages]

    for a, b in zip(records, fresh):
        assert strip_timing(a["train"]["stages"]) == strip_timing(b["train"]["stages"])
        assert a["metrics"] == b["metrics"]


def test_report_outputs_are_deterministic_bytes(sweep):
    cfg, runs, out, records = sweep
    report_dir = report(out)
    names = ["ks.csv", "wasserstein.csv", "fnorm.csv", "summary.txt"]
    first = {n: (report_dir / n).read_bytes() for n in names}
    report_dir2 = report(out)
    for n in names:
        assert (report_dir2 / n).read_bytes() == first[n]
    ks_lines = first["ks.csv"].decode().splitlines()
    assert ks_lines[0].startswith("target,dim,architecture,run_id")
    assert len(ks_lines) == 1 + len(records)
    w_header = first["wasserstein.csv"].decode().splitlines()[0]
    assert w_header.endswith("w_median,w_median_normalized")
    summary = first["summary.txt"].decode()
    assert "target=mog dim=1" in summary
    assert "best architecture" in summary


def test_execute_parallel_workers_produce_identical_records(sweep, tmp_path):
    cfg, runs, out, records = sweep
    fresh = execute(runs, tmp_path, parallel=2, resume=False)
    assert [r["run"]["run_id"] for r in fresh] == [r["run"]["run_id"] for r in records]
    for a, b in zip(records, fresh):
        assert a["status"] == b["status"] == "completed"
        assert a["metrics"] == b["metrics"]


def test_execute_run_records_failure_without_raising(tmp_path, monkeypatch):
    runs = plan(small_config())

    def boom(model, target, config=None, checkpoint_path=None, verbose=False):
        raise RuntimeError("synthetic failure for testing")

    monkeypatch.setattr(bench, "train", boom)
    record = execute_run(runs[0], tmp_path)
    assert record["status"] == "failed"
    assert "synthetic failure" in record["error"]
    assert record["metrics"] is None


def test_execute_run_marks_diverged_training(tmp_path, monkeypatch):
    runs = plan(small_config())

    def fake_train(model, target, config=None, checkpoint_path=None, verbose=False):
        return TrainReport(status="diverged", n_params=3, diverged_batch=4)

    monkeypatch.setattr(bench, "train", fake_train)
    record = execute_run(runs[0], tmp_path)
    assert record["status"] == "failed"
    assert record["error"] == "training diverged"
    assert record["train"]["diverged_batch"] == 4
    assert record["metrics"] is None


def test_failed_runs_are_listed_in_summary(tmp_path, monkeypatch):
    cfg = small_config()
    cfg["axes"]["architectures"] = ["realnvp"]
    cfg["axes"]["dims"] = [1]
    runs = plan(cfg)

    def boom(model, target, config=None, checkpoint_path=None, verbose=False):
        raise RuntimeError("nope")

    monkeypatch.setattr(bench, "train", boom)
    execute(runs, tmp_path, parallel=1)
    report_dir = report(tmp_path)
    summary = (report_dir / "summary.txt").read_text()
    assert "failed runs:" in summary
    assert runs[0].run_id in summary
    ks_rows = (report_dir / "ks.csv").read_text().splitlines()
    assert len(ks_rows) == 1  # header only, failed runs carry no metrics


CONFIG_TOML = """\
master_seed = 42

[axes]
architectures = ["realnvp"]
targets = ["mog"]
dims = [1]
n_bijectors = [1]
hidden = [[4]]
n_train = [300]
repetitions = 1

[train]
n_stages = 1
max_epochs_per_stage = 2
patience = 2
batch_size = 128

[metrics]
n_batches = 2
batch_size = 50
fnorm_samples = 100
"""


def test_load_config_parses_toml(tmp_path):
    path = tmp_path / "cfg.toml"
    path.write_text(CONFIG_TOML)
    cfg = load_config(path)
    assert cfg["master_seed"] == 42
    assert cfg["axes"]["hidden"] == [[4]]


def test_cli_plan_run_report_end_to_end(tmp_path, capsys):
    cfg_path = tmp_path / "cfg.toml"
    cfg_path.write_text(CONFIG_TOML)
    out = tmp_path / "out"

    assert main(["plan", "--config", str(cfg_path), "--out", str(out)]) == 0
    planned = capsys.readouterr().out
    assert "1 runs" in planned
    plan_file = json.loads((out / "plan.json").read_text())
    assert len(plan_file) == 1

    assert main(["run", "--config", str(cfg_path), "--out", str(out)]) == 0
    ran = capsys.readouterr().out
    assert "1/1 runs completed" in ran

    # resumed run skips the finished record
    assert (
        main(["run", "--config", str(cfg_path), "--out", str(out), "--resume"]) == 0
    )
    assert "skip" in capsys.readouterr().out

    assert main(["report", "--out", str(out)]) == 0
    summary = capsys.readouterr().out
    assert "target=mog dim=1" in summary
    assert (out / "report" / "ks.csv").exists()
