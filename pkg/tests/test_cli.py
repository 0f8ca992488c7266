import hashlib
import json
import subprocess
import sys

import numpy as np
import pytest

from ultrapar.cli import run
from ultrapar.grid import GridFunction

SMALL_VERIFY = {
    "grid": {"shape": [17, 17, 17], "levels": [17, 33]},
    "checks": ["caccioppoli", "poincare", "morrey", "decay"],
    "harness": {"members": ["caloric_x1", "frozen_bump", "homog_pole"]},
}


def write(tmp_path, obj, name="run.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def manifest(out):
    return json.loads((out / "manifest.json").read_text())


def test_structure_info(tmp_path, capsys):
    out = tmp_path / "o"
    assert run(["structure-info", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "Q+2 = 6" in text and "E(" in text
    doc = json.loads((out / "structure.json").read_text())
    assert doc["structure"]["doubling_exponent"] == pytest.approx(6.0, abs=1e-9)
    m = manifest(out)
    assert m["exit_status"] == 0 and [f["path"] for f in m["files"]] == ["structure.json"]
    f = m["files"][0]
    assert f["sha256"] == hashlib.sha256((out / "structure.json").read_bytes()).hexdigest()


def test_kernel_eval(tmp_path, capsys):
    out = tmp_path / "o"
    assert run(["kernel-eval", "--config", write(tmp_path, {"kernel": {"points": [[0, 0, 1]]}}),
                "--out", str(out)]) == 0
    doc = json.loads((out / "kernel_eval.json").read_text())
    assert doc["kernel_eval"]["gamma0"][0] == pytest.approx(np.sqrt(3) / (2 * np.pi), abs=1e-12)


def test_kernel_check_small(tmp_path):
    out = tmp_path / "o"
    cfg = write(tmp_path, {"kernel": {"n_paths": 20000, "n_steps": 200}})
    assert run(["kernel-check", "--config", cfg, "--out", str(out)]) == 0
    assert json.loads((out / "kernel_check.json").read_text())["kernel_check"]["passed"]


@pytest.mark.parametrize("method", ["forward", "frozen"])
def test_solve(tmp_path, method):
    out = tmp_path / "o"
    cfg = write(tmp_path, {"grid": {"shape": [17, 17, 17]}, "solver": {"method": method}})
    assert run(["solve", "--config", cfg, "--out", str(out)]) == 0
    u = GridFunction.load(out / "solution.ugf")
    assert u.shape == (17, 17, 17) and np.all(np.isfinite(u.values))
    summary = json.loads((out / "solve.json").read_text())["solve"]
    assert summary["relative_weak_residual"] < 0.2
    assert {f["path"] for f in manifest(out)["files"]} == {"solution.ugf", "solve.json"}


def test_exit_codes(tmp_path):
    assert run(["verify", "--config", write(tmp_path, {"checks": ["holder-continuity"]}),
                "--out", str(tmp_path / "a")]) == 3
    assert run(["solve", "--config", write(tmp_path, {"grid": {"shape": [4, 4, 4]}}),
                "--out", str(tmp_path / "b")]) == 2
    assert run(["solve", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path / "c")]) == 2
    assert run(["solve", "--threads", "0", "--out", str(tmp_path / "d")]) == 2
    cfg = write(tmp_path, {"grid": {"shape": [17, 17, 17]}, "solver": {"dt": 1.0}})
    assert run(["solve", "--config", cfg, "--out", str(tmp_path / "e")]) == 4
    assert manifest(tmp_path / "e")["exit_status"] == 4


def test_verify_failure_keeps_reports(tmp_path):
    cfg = dict(SMALL_VERIFY, checks=["caccioppoli", "morrey"], harness={"members": ["caloric_x1"],
                                                                       "morrey": [[2.2, 9.0]]})
    out = tmp_path / "o"
    assert run(["verify", "--config", write(tmp_path, cfg), "--out", str(out)]) == 4
    doc = json.loads((out / "reports.json").read_text())
    assert [r["verdict"] for r in doc["reports"]][-1] == "failed"


def test_verify_deterministic_across_threads(tmp_path):
    cfg = write(tmp_path, SMALL_VERIFY)
    outs = [tmp_path / "a", tmp_path / "b", tmp_path / "c"]
    for out, th in zip(outs, ("1", "1", "2")):
        assert run(["verify", "--config", cfg, "--out", str(out), "--threads", th]) == 0
    blobs = [(o / "reports.json").read_bytes() for o in outs]
    assert blobs[0] == blobs[1] == blobs[2]
    hashes = [{f["path"]: f["sha256"] for f in manifest(o)["files"]} for o in outs]
    assert hashes[0] == hashes[1] == hashes[2]
    doc = json.loads(blobs[0])
    assert doc["config"]["seed"] == 0 and doc["levels"] == [17, 33]
    assert any(p.startswith("ladder_") for p in hashes[0])


def test_sweep(tmp_path):
    cfg = dict(SMALL_VERIFY, checks=["caccioppoli"], harness={"members": ["caloric_x1"]},
               sweep={"levels": [[9, 17], [17, 33]]})
    out = tmp_path / "o"
    assert run(["sweep", "--config", write(tmp_path, cfg), "--out", str(out)]) == 0
    rows = json.loads((out / "sweep.json").read_text())["sweep"]
    assert [r["levels"] for r in rows] == [[9, 17], [17, 33]]
    assert (out / "sweep_1" / "reports.json").exists()


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "ultrapar", "structure-info", "--out", str(tmp_path)],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "Q+2 = 6" in r.stdout


def test_solve_three_block(tmp_path):
    out = tmp_path / "o"
    cfg = write(tmp_path, {"structure": {"preset": "three_block"}, "grid": {"shape": [9] * 5}})
    assert run(["solve", "--config", cfg, "--out", str(out)]) == 0
    assert GridFunction.load(out / "solution.ugf").shape == (9,) * 5
