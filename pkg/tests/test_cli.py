import json

import pytest

from anosov_lab.cli import ConfigError, MissingArtifactError, RunConfig, main, run_stage


def test_not_hyperbolic(tmp_path, capsys):
    assert main(["partition", "--matrix", "1,0,0,1", "--out", str(tmp_path)]) == 2
    assert "not hyperbolic" in capsys.readouterr().err


def test_report_on_empty_directory(tmp_path, capsys):
    assert main(["report", "--out", str(tmp_path / "empty")]) == 2
    assert "partition" in capsys.readouterr().err


def test_missing_upstream_names_producer(tmp_path):
    cfg = RunConfig(out=str(tmp_path))
    with pytest.raises(MissingArtifactError, match="partition"):
        run_stage(cfg, "markov")


def test_invalid_config():
    with pytest.raises(ConfigError):
        RunConfig(max_len=[0]).validate()
    with pytest.raises(ConfigError):
        RunConfig(samples=-1).validate()


def test_hash_ignores_output_directory():
    assert RunConfig(out="a").hash == RunConfig(out="b").hash
    assert RunConfig(seed=1).hash != RunConfig(seed=2).hash


def test_staged_run(tmp_path):
    out = str(tmp_path)
    common = ["--out", out, "--diameter", "3/5", "--samples", "50", "--max-len", "4,6",
              "--leafwise-N", "4", "--r1-grid", "0.01,0.1"]
    assert main(["partition"] + common) == 0
    # symbolic is optional for the Markov graph
    assert main(["markov"] + common) == 0
    assert main(["entropy"] + common) == 0
    ent = json.loads((tmp_path / "entropy.json").read_text())
    vals = [s["entropy"] for s in ent["series"]]
    assert vals == sorted(vals)
    assert all(v <= ent["h_top"] + 1e-9 for v in vals)
    assert main(["report"] + common) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["meta"]["config_hash"] == ent["meta"]["config_hash"]
    assert (tmp_path / "words.csv").read_text().startswith("# config_hash=")
