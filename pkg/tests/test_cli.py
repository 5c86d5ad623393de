import json
import os
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from splitseg.cli import main
from splitseg.pgm import read_pgm, write_pgm

DOCS = Path(__file__).resolve().parent.parent / "docs"


@pytest.fixture
def disk(tmp_path):
    img, truth = tmp_path / "disk.pgm", tmp_path / "truth.pgm"
    assert main(["gen-synthetic", "--size", "48x64", "--radius", "12", "--image-out", str(img), "--truth-out", str(truth)]) == 0
    return img, truth


def test_gen_synthetic_deterministic(tmp_path):
    outs = []
    for k in range(2):
        i, t = tmp_path / f"i{k}.pgm", tmp_path / f"t{k}.pgm"
        assert main(["gen-synthetic", "--noise-sd", "0.3", "--seed", "3", "--image-out", str(i), "--truth-out", str(t)]) == 0
        outs.append((i.read_bytes(), t.read_bytes()))
    assert outs[0] == outs[1]
    assert int(read_pgm(outs[0][1]).sum()) == 2821  # integer disk r=30


def test_segment_model1_mask_and_determinism(disk, tmp_path):
    img, truth = disk
    runs = []
    for k in range(2):
        m, e = tmp_path / f"m{k}.pgm", tmp_path / f"e{k}.csv"
        assert main(["segment", "--model", "1", "--input", str(img), "--mask-out", str(m), "--energy-trace", str(e), "--steps", "30"]) == 0
        runs.append((m.read_bytes(), e.read_bytes()))
    assert runs[0] == runs[1]
    mask = read_pgm(runs[0][0])
    assert set(np.unique(mask)) <= {0.0, 1.0}
    assert b" 255\n" in runs[0][0][:20] or runs[0][0].startswith(b"P5\n64 48\n255\n")
    assert len(runs[0][1].decode().splitlines()) == 31 + 1


def test_segment_model2_trace_rows(tmp_path, capsys):
    img, truth = tmp_path / "hp.pgm", tmp_path / "hpt.pgm"
    assert main(["gen-synthetic", "--shape", "half-plane", "--image-out", str(img), "--truth-out", str(truth)]) == 0
    m, e, u = tmp_path / "m.pgm", tmp_path / "e.csv", tmp_path / "u.pgm"
    code = main(["segment", "--model", "2", "--delta", "2", "--steps", "50", "--input", str(img),
                 "--mask-out", str(m), "--energy-trace", str(e), "--u-out", str(u)])
    assert code == 0
    lines = e.read_text().splitlines()
    assert lines[0] == "step,t,total,data,entropy,interaction"
    assert len(lines) - 1 == 51
    assert main(["metrics", "--pred", str(m), "--truth", str(truth)]) == 0
    assert "dice 1\n" in capsys.readouterr().out


def test_segment_config_file(disk, tmp_path):
    img, _ = disk
    cfg = {"model": 1, "input": str(img), "mask_out": str(tmp_path / "m.pgm"), "params": {"steps": 5}}
    (tmp_path / "run.json").write_text(json.dumps(cfg))
    assert main(["segment", "--config", str(tmp_path / "run.json")]) == 0
    assert (tmp_path / "m.pgm").exists()


def test_segment_exit_codes(disk, tmp_path):
    img, _ = disk
    m = tmp_path / "out.pgm"
    assert main(["segment", "--model", "1", "--input", str(tmp_path / "missing.pgm"), "--mask-out", str(m)]) == 3
    assert main(["segment", "--model", "1", "--input", str(img), "--mask-out", str(m), "--eps", "2"]) == 2
    assert main(["segment", "--model", "1", "--input", str(img), "--mask-out", str(m), "--dt", "-1"]) == 2
    assert main(["segment", "--model", "7"]) == 2
    bad = tmp_path / "bad.pgm"
    bad.write_bytes(b"P5\n4 4\n255\n\x00")
    assert main(["segment", "--model", "1", "--input", str(bad), "--mask-out", str(m)]) == 3
    # a disk is below the critical radius at default lambda; 1 pass cannot converge
    code = main(["segment", "--model", "2", "--input", str(img), "--mask-out", str(m), "--fp-max-iters", "1",
                 "--energy-trace", str(tmp_path / "e.csv")])
    assert code == 4
    assert not m.exists() and not (tmp_path / "e.csv").exists()
    assert not [p for p in os.listdir(tmp_path) if p.endswith(".tmp")]


def test_verify_order(capsys):
    assert main(["verify-order", "--problem", "lie-linear"]) == 0
    assert main(["verify-order", "--problem", "parallel-linear"]) == 0
    out = capsys.readouterr().out
    slopes = [float(line.split()[1]) for line in out.splitlines() if line.startswith("slope")]
    assert len(slopes) == 2 and all(0.9 <= s <= 1.1 for s in slopes)
    assert main(["verify-order", "--problem", "nope"]) == 2
    assert main(["verify-order", "--problem", "lie-linear", "--dts", "0.5", "0.25"]) == 2


def test_export_and_eval(tmp_path, capsys):
    scheme = DOCS / "examples" / "scheme_sequential.json"
    net = tmp_path / "net.json"
    assert main(["export-net", "--scheme", str(scheme), "--out", str(net), "--check"]) == 0
    doc = json.loads(net.read_text())
    assert doc["topology"] == "chain" and len(doc["layers"]) == 2
    assert main(["eval-net", "--model", str(net), "--against", str(scheme)]) == 0
    # corrupt one bias entry by 1e-9: equivalence must fail
    layer = next(layer for layer in doc["layers"] if layer["bias"] is not None)
    bias = layer["bias"]
    if "inline" in bias:
        bias["inline"][0][0] += 1e-9
    else:
        layer["bias"] = {"constant": bias["constant"] + 1e-9}
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    assert main(["eval-net", "--model", str(bad), "--against", str(scheme)]) == 4


def test_export_parallel(tmp_path):
    net = tmp_path / "p.json"
    assert main(["export-net", "--scheme", str(DOCS / "examples" / "scheme_parallel.json"), "--out", str(net), "--check"]) == 0
    doc = json.loads(net.read_text())
    assert doc["topology"] == "parallel-block" and doc["head"] == "average" and len(doc["branches"]) == len(json.loads((DOCS / "examples" / "scheme_parallel.json").read_text())["terms"])


def test_export_bad_scheme(tmp_path):
    p = tmp_path / "s.json"
    p.write_text("{}")
    assert main(["export-net", "--scheme", str(p), "--out", str(tmp_path / "o.json")]) == 2
    assert main(["export-net", "--scheme", str(tmp_path / "none.json"), "--out", str(tmp_path / "o.json")]) == 3


def test_metrics_and_perimeter(disk, tmp_path, capsys):
    img, truth = disk
    assert main(["metrics", "--pred", str(truth), "--truth", str(truth)]) == 0
    assert "accuracy 1\ndice 1\n" in capsys.readouterr().out
    zero = tmp_path / "z.pgm"
    zero.write_bytes(write_pgm(np.zeros((48, 64))))
    assert main(["approx-perimeter", "--mask", str(zero)]) == 0
    assert capsys.readouterr().out.strip() == "0"
    inv = tmp_path / "inv.pgm"
    inv.write_bytes(write_pgm(1 - read_pgm(truth.read_bytes())))
    assert main(["approx-perimeter", "--mask", str(truth)]) == 0
    a = float(capsys.readouterr().out)
    assert main(["approx-perimeter", "--mask", str(inv)]) == 0
    assert abs(float(capsys.readouterr().out) - a) <= 1e-9 * a
    small = tmp_path / "s.pgm"
    small.write_bytes(write_pgm(np.zeros((4, 4))))
    assert main(["metrics", "--pred", str(small), "--truth", str(truth)]) == 2


def test_entry_point_subprocess(tmp_path):
    exe = shutil.which("splitseg")
    cmd = [exe] if exe else [sys.executable, "-m", "splitseg.cli"]
    r = subprocess.run(cmd + ["verify-order", "--problem", "nope"], capture_output=True, text=True)
    assert r.returncode == 2 and "unknown problem" in r.stderr
