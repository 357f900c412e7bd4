from __future__ import annotations

import json
import shutil
import subprocess
from pathlib import Path

import jsonschema
import pytest

from ssmlab.cli import SUMMARY_SCHEMA, run

CONFIGS = Path(__file__).resolve().parents[1] / "demos" / "configs"


def _run(capsys, *argv):
    code = run([str(a) for a in argv])
    out = capsys.readouterr().out.strip().splitlines()
    summary = json.loads(out[-1]) if out else None
    if summary is not None:
        jsonschema.validate(summary, SUMMARY_SCHEMA)
    return code, summary


def test_verify_twindragon(capsys, tmp_path):
    code, s = _run(capsys, "verify", "--config", CONFIGS / "twindragon.json", "--depth", 10, "--out", tmp_path)
    assert code == 0 and s["status"] == "ok"
    assert s["dynamic_self_similarity"] is True and s["convolution_decomposition"] is True


def test_entropy_csv_has_entropy_column(capsys, tmp_path):
    code, s = _run(capsys, "entropy", "--config", CONFIGS / "corners.json", "--levels", "1..12", "--out", tmp_path)
    assert code == 0
    rows = (tmp_path / "entropy.csv").read_text().splitlines()
    assert rows[0].split(",") == ["level", "H_n", "trusted"] and len(rows) == 13
    assert float(rows[1].split(",")[1]) == pytest.approx(1.79248, abs=1e-5)


def test_model_sim_needs_seed(capsys, tmp_path):
    code, s = _run(capsys, "model-sim", "--config", CONFIGS / "random_model.json", "--out", tmp_path)
    assert code == 1 and s["status"] == "invalid" and "seed" in s["error"]


def test_model_sim_with_seed(capsys, tmp_path):
    code, s = _run(capsys, "model-sim", "--config", CONFIGS / "random_model.json", "--seed", 3, "--depth", 6,
                   "--out", tmp_path)
    assert code == 0 and len(s["omega"].split(",")) == 6
    assert (tmp_path / "measure.csv").exists() and (tmp_path / "model.json").exists()


def test_unknown_subcommand(capsys):
    assert run(["frobnicate"]) == 1
    assert "usage" in capsys.readouterr().err


def test_malformed_json_reports_position(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"maps": [\n  {"lambda": 0.5, "t": 0},\n  oops]\n}')
    code, s = _run(capsys, "render", "--config", bad, "--out", tmp_path)
    assert code == 1 and "line 3, column 3" in s["error"]


def test_schema_violation_is_invalid(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"maps": [{"lambda": 0.5}], "probs": [1]}))
    code, s = _run(capsys, "render", "--config", bad, "--out", tmp_path)
    assert code == 1 and "maps/0" in s["error"]


def test_budget_exhaustion(capsys, tmp_path):
    code, s = _run(capsys, "entropy", "--config", CONFIGS / "corners.json", "--depth", 12, "--budget", 1000,
                   "--out", tmp_path)
    assert code == 2 and s["status"] == "budget"


def test_bad_usage_exits_one(capsys, tmp_path):
    assert run(["entropy", "--config", str(CONFIGS / "corners.json"), "--levels", "5..2"]) == 1
    assert run(["entropy", "--config", str(CONFIGS / "corners.json"), "--depth", "-3"]) == 1
    assert run(["render"]) == 1


def test_outputs_are_byte_identical(capsys, tmp_path):
    def once(sub, *extra):
        out = tmp_path / f"{sub}-{len(list(tmp_path.iterdir()))}"
        code, s = _run(capsys, sub, *extra, "--out", out)
        assert code == 0
        return {Path(p).name: Path(p).read_bytes() for p in s["outputs"]}

    for sub, extra in [
        ("render", ("--config", CONFIGS / "twindragon.json", "--depth", 12, "--grid", 128)),
        ("model-sim", ("--config", CONFIGS / "random_model.json", "--seed", 5, "--depth", 7)),
        ("fourier", ("--config", CONFIGS / "interval.json", "--depth", 10, "--levels", "1..6", "--grid", 32)),
        ("ek-scan", ("--config", CONFIGS / "scan.json", "--seed", 1, "--grid", 10)),
    ]:
        assert once(sub, *extra) == once(sub, *extra)


def test_fourier_and_dim(capsys, tmp_path):
    code, s = _run(capsys, "fourier", "--config", CONFIGS / "golden.json", "--depth", 16, "--pisot", 10,
                   "--levels", "1..6", "--grid", 32, "--out", tmp_path)
    assert code == 0 and 0.005 < s["pisot_min"] < 0.05
    # entropy dimension H(1/2, 1/6, 1/6, 1/6) = 1.79: plane saturation needs eps above 0.21
    dim = ("dim", "--config", CONFIGS / "corners.json", "--depth", 8, "--grid", 16, "--out", tmp_path)
    code, s = _run(capsys, *dim, "--tolerance", 0.25)
    assert code == 0 and s["satdim"] == 2 and s["slope"] == pytest.approx(1.79248, abs=1e-4)
    code, s = _run(capsys, *dim, "--tolerance", 0.1)
    assert code == 0 and s["satdim"] < 2


def test_disintegrate_plan(capsys, tmp_path):
    code, s = _run(capsys, "disintegrate", "--config", CONFIGS / "plan.json", "--out", tmp_path)
    assert code == 0 and s["disintegration"] is True and s["split"] is True
    code, s = _run(capsys, "disintegrate", "--config", CONFIGS / "twindragon.json", "--out", tmp_path)
    assert code == 1


def test_ek_scan_needs_seed(capsys, tmp_path):
    code, s = _run(capsys, "ek-scan", "--out", tmp_path)
    assert code == 1


@pytest.mark.skipif(shutil.which("ssm-lab") is None, reason="console script not installed")
def test_console_script(tmp_path):
    proc = subprocess.run(["ssm-lab", "verify", "--config", str(CONFIGS / "interval.json"), "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["dynamic_self_similarity"] is True
