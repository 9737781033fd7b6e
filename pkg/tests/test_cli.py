from __future__ import annotations

import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jigsaw.cli import effective_config, build_parser, main
from jigsaw.engine import AE, Partition, UsageError, run
from jigsaw.io import (BLUE, DARK_BLUE, GREY, RED, ExperimentConfig, PcBlock, Palette, SnapshotImage,
                       artifact_version, format_csv, parse_grid, render_snapshot, write_summary)
from jigsaw.montecarlo import CSV_HEADER, McConfig, estimate_solve
from jigsaw.randomness import EdgeSampler, trial_seed
from jigsaw.topology import ring, torus

RUN = ["run", "--topology", "ring:n=1024", "--sigma", "1", "--tau", "1", "--theta", "inf",
       "--p", "0.2", "--trials", "100", "--seed", "7"]


# ------------------------------------------------------------ CLI behaviour
def test_run_twice_gives_identical_bytes(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(RUN + ["--out", str(a)]) == 0
    assert main(RUN + ["--out", str(b), "--parallelism", "3"]) == 0
    assert a.read_bytes() == b.read_bytes()
    rows = list(csv.DictReader(io.StringIO(a.read_text())))
    assert len(rows) == 1 and rows[0]["topology"] == "ring:n=1024" and rows[0]["seed"] == "7"
    summary = json.loads(a.with_suffix(".json").read_text())
    assert summary["config"]["p"] == 0.2 and summary["config"]["trials"] == 100
    assert summary["version"].startswith(artifact_version().split("+")[0])
    assert summary["wall_clock_s"] >= 0
    assert summary["estimates"][0]["trials"] == 100


def test_run_writes_csv_to_stdout(capsys):
    assert main(RUN[:-4] + ["--trials", "5"]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0] == ",".join(CSV_HEADER)


def test_theory_nu(capsys):
    assert main(["theory", "--const", "nu", "--sigma", "1"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["name"] == "nu" and abs(d["value"] - 3.216) < 1e-3
    assert set(d) >= {"params", "value", "error_estimate", "method"}


@pytest.mark.parametrize("argv,key", [(["--const", "lambda", "--sigma", "1"], math.pi ** 2 / 6),
                                      (["--const", "lb2d"], 2.008),
                                      (["--const", "phi", "--k", "1", "--ell", "0", "--r", "0.3"], 0.51)])
def test_theory_other_constants(capsys, argv, key):
    assert main(["theory"] + argv) == 0
    assert json.loads(capsys.readouterr().out)["value"] == pytest.approx(key, abs=1e-3)


def test_exit_codes(capsys):
    assert main(["frobnicate"]) == 1
    assert main(["run", "--topology", "ring:n=2", "--p", "0.5"]) == 1
    assert main(["run", "--topology", "ring:n=10"]) == 1
    assert main(["run", "--topology", "ring:n=10", "--p", "0.5", "--theta", "banana"]) == 1
    assert main(["sweep", "--topology", "ring:n=10"]) == 1
    assert main(["theory", "--const", "ub2d", "--k", "1", "--ell", "5"]) == 2
    assert main(["pc", "--topology", "ring:n=3", "--pc-lo", "0.9", "--pc-hi", "1.0", "--pc-trials", "50"]) == 2
    assert main(["run", "--topology", "ring:n=10", "--p", "0.5", "--out", "/nonexistent/dir/x.csv"]) == 2
    err = capsys.readouterr().err
    assert "usage error" in err and "error" in err


def test_sweep_rows_follow_the_grid(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["sweep", "--topology", "ring:n=64", "--p-grid", "0.05:0.25:0.1", "--trials", "30",
                 "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert [float(r["p"]) for r in rows] == [0.05, 0.15, 0.25]
    ph = [float(r["p_hat"]) for r in rows]
    assert ph == sorted(ph)


def test_pc_emits_a_bracket(tmp_path, capsys):
    rc = main(["pc", "--topology", "ring:n=3", "--pc-trials", "200", "--pc-tol", "0.05", "--seed", "3"])
    row = json.loads(capsys.readouterr().out)
    assert rc in (0, 2)
    assert row["p_lo"] <= row["p_c_hat"] <= row["p_hi"]
    assert row["status"] in ("converged", "ambiguous")


def test_grow_reports_the_product_bound(capsys):
    assert main(["grow", "--theta", "2", "--p", "0.2", "--box", "16", "--trials", "50"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert 0 <= d["p_hat"] <= 1 and 0 < d["lower_bound"] < 1


def test_render_writes_frames(tmp_path, capsys):
    d = tmp_path / "frames"
    assert main(["render", "--topology", "torus:n=12,d=2", "--p", "0.3", "--out", str(d)]) == 0
    frames = sorted(d.glob("t*.ppm"))
    assert frames[0].name == "t00000.ppm"
    img = SnapshotImage.from_bytes(frames[0].read_bytes())
    assert (img.width, img.height) == (12, 12)
    assert np.all(img.pixels == GREY)
    assert main(["render", "--topology", "ring:n=12", "--p", "0.3", "--out", str(d)]) == 1


def test_run_with_snapshots(tmp_path):
    out = tmp_path / "r.csv"
    assert main(["run", "--topology", "torus:n=10,d=2", "--p", "0.4", "--trials", "3",
                 "--snapshot-every", "2", "--out", str(out)]) == 0
    assert any((tmp_path / "r_frames").glob("*.ppm"))


def test_selftest_passes(capsys):
    assert main(["selftest"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines and all(line.startswith("PASS") for line in lines)


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "jigsaw", "theory", "--const", "lambda"],
                          capture_output=True, text=True, timeout=300)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["value"] == pytest.approx(math.pi ** 2 / 6, abs=1e-6)


# ------------------------------------------------------------ configuration
def test_config_round_trip_and_unknown_keys(tmp_path):
    cfg = ExperimentConfig(topology="torus:n=8,d=2", sigma=2, tau=2, theta=3, p_grid="0.1:0.3:0.1",
                           pc=PcBlock(0.02, 50, 0.0, 0.5), seed=11)
    assert ExperimentConfig.loads(cfg.dumps()) == cfg
    assert ExperimentConfig.loads(cfg.dumps()).dumps() == cfg.dumps()
    with pytest.raises(UsageError):
        ExperimentConfig.from_dict({"topolgy": "ring:n=3"})
    with pytest.raises(UsageError):
        ExperimentConfig.from_dict({"pc": {"tolerance": 0.1}})


def test_every_config_key_has_a_flag():
    flags = {a.dest for a in build_parser()._subparsers._group_actions[0].choices["run"]._actions}
    keys = set(ExperimentConfig().to_dict())
    assert keys - {"pc"} <= flags
    assert {"pc", "pc_tol", "pc_trials", "pc_lo", "pc_hi"} <= flags


def test_flags_override_config(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(ExperimentConfig(topology="ring:n=50", p=0.1, trials=9, seed=4).dumps())
    args = build_parser().parse_args(["run", "--config", str(path), "--trials", "12"])
    cfg = effective_config(args)
    assert (cfg.topology, cfg.p, cfg.trials, cfg.seed) == ("ring:n=50", 0.1, 12, 4)
    args = build_parser().parse_args(["run", "--config", str(path), "--pc", "--pc-tol", "0.03"])
    assert effective_config(args).pc == PcBlock(tol=0.03)


def test_parse_grid():
    assert parse_grid("0.1:0.5:0.1") == [0.1, 0.2, 0.3, 0.4, 0.5]
    assert parse_grid("0.2:0.2:0.1") == [0.2]
    for bad in ("0.1:0.5", "0.5:0.1:0.1", "0.1:0.5:0", "a:b:c"):
        with pytest.raises(UsageError):
            parse_grid(bad)


# ------------------------------------------------------------ writers
def test_empty_rows_give_header_only():
    assert format_csv([]) == ",".join(CSV_HEADER) + "\n"


def test_one_row_has_fourteen_columns():
    est = estimate_solve(McConfig(ring(20), AE, 0.3, 10))
    text = format_csv([est.row(ring(20), AE, 0)])
    rows = list(csv.reader(io.StringIO(text)))
    assert len(rows) == 2 and len(rows[0]) == len(rows[1]) == 14


def test_summary_json_round_trips(tmp_path):
    path = tmp_path / "s.json"
    obj = {"a": np.int64(3), "b": [np.float64(0.5), math.inf], "c": np.array([1, 2]), "d": None}
    write_summary(obj, path)
    back = json.loads(path.read_text())
    assert back["a"] == 3 and back["b"][0] == 0.5 and back["c"] == [1, 2] and back["d"] is None


# ------------------------------------------------------------ snapshots
def test_palette_classes():
    sizes = np.array([1, 2, 9, 10, 99, 100, 5000])
    assert Palette().classify(sizes).tolist() == [0, 1, 1, 2, 2, 3, 3]
    assert Palette(small=3, large=5).classify(np.array([2, 3, 5])).tolist() == [1, 2, 3]


def test_snapshot_all_grey_and_all_red():
    t = torus(12, 2)
    grey = render_snapshot(t, Partition.singletons(t.N).labels)
    assert np.all(grey.pixels == GREY)
    red = render_snapshot(t, np.zeros(t.N, dtype=np.int64))
    assert np.all(red.pixels == RED)
    back = SnapshotImage.from_bytes(red.to_bytes())
    assert (back.width, back.height) == (12, 12) and np.array_equal(back.pixels, red.pixels)
    assert red.to_bytes().startswith(b"P6\n12 12\n255\n")


def test_snapshot_rows_are_y_coordinates():
    t = torus(4, 2)
    labels = np.arange(t.N)
    labels[[t.index((x, 2)) for x in range(4)]] = 99  # row y=2 is one cluster of 4
    img = render_snapshot(t, labels)
    assert np.all(img.pixels[2] == BLUE)
    assert np.all(img.pixels[[0, 1, 3]] == GREY)
    assert DARK_BLUE != BLUE


def test_snapshot_rejects_other_topologies():
    with pytest.raises(UsageError):
        render_snapshot(ring(16), np.zeros(16, dtype=np.int64))
    with pytest.raises(UsageError):
        render_snapshot(torus(3, 3), np.zeros(27, dtype=np.int64))


@given(sizes=st.lists(st.integers(1, 10_000), min_size=1, max_size=50))
@settings(max_examples=100, deadline=None)
def test_palette_is_a_function_of_size_class(sizes):
    pal = Palette()
    cls = pal.classify(np.array(sizes))
    for s, c in zip(sizes, cls):
        assert c == (0 if s == 1 else 1 if s < 10 else 2 if s < 100 else 3)


@pytest.mark.slow
def test_large_cluster_frequency_at_t31():
    # 400x400 torus, AE, p = 0.021: how often a cluster of >= 10^4 cells exists at t = 31
    from jigsaw.engine import JigsawProcess

    t = torus(400, 2)
    hits, largest = 0, []
    for i in range(20):
        proc = JigsawProcess(t, AE, EdgeSampler(trial_seed(2021, i), 0.021), track=False)
        while proc.t < 31 and proc.step():
            pass
        img = render_snapshot(t, proc.labels)
        big = int(np.bincount(proc.labels).max())
        largest.append(big)
        hits += big >= 10_000
        assert np.any(np.all(img.pixels == RED, axis=2)) == (big >= 100)
    print(f"cluster of >= 10^4 cells at t=31 in {hits}/20 runs; largest sizes {sorted(largest)}")
    assert hits > 0
