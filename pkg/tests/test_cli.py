"""End-to-end command-line pipeline: configs, exit codes, manifests."""

import json

import pandas as pd
import pytest

from topicdrift.cli import main
from topicdrift.config import ConfigError, parse_config

BASE_CONFIG = """
[corpus]
path = "{corpus}"
min_papers = 10

[window]
mode = "papers"
value = 3

[split]
mode = "career_years"
value = 5
min_past = 2
min_future = 3

[metrics]
quantile = 40.0

[synth]
n_authors = 60
career_min = 12
career_max = 16
ep_effect = 0.3
ed_effect = -0.4
noise_sd = 0.6
quality_sd = 0.3

[seeds]
master = 7

[output]
dir = "{out}"
"""


def write_config(tmp_path, name="run.toml", **overrides):
    out = tmp_path / "out"
    text = BASE_CONFIG.format(corpus=out / "corpus.jsonl", out=out)
    for extra in overrides.get("extra_sections", []):
        text += "\n" + extra
    path = tmp_path / name
    path.write_text(text)
    return path, out


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """One synth + metrics run shared by the read-only CLI tests."""
    tmp_path = tmp_path_factory.mktemp("cli")
    config, out = write_config(tmp_path)
    assert main(["--config", str(config), "synth"]) == 0
    assert main(["--config", str(config), "metrics"]) == 0
    return config, out


# -- config parsing --------------------------------------------------------


def test_unknown_section_rejected():
    with pytest.raises(ConfigError, match="unknown section"):
        parse_config({"corpsu": {}})


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config({"window": {"mode": "papers", "vlaue": 3}})


def test_bad_values_rejected():
    with pytest.raises(ConfigError):
        parse_config({"metrics": {"quantile": 60}})
    with pytest.raises(ConfigError):
        parse_config({"analysis": {"regressions": ["S4", "S99"]}})
    with pytest.raises(ConfigError):
        parse_config({"graph": {"kind": "bogus"}})
    with pytest.raises(ConfigError):
        parse_config({"psw": {"method": "forest"}})


def test_defaults_parse_clean():
    cfg = parse_config({})
    assert cfg.quantile == 50.0 and cfg.seed == 0
    assert cfg.analysis.regressions == ["S4"]


def test_malformed_toml_exits_one(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("[corpus\npath = 3")
    assert main(["--config", str(bad), "validate"]) == 1
    assert "error:" in capsys.readouterr().err


# -- exit codes ------------------------------------------------------------


def test_validate_missing_corpus_exits_one(tmp_path, capsys):
    config, _ = write_config(tmp_path)
    assert main(["--config", str(config), "validate"]) == 1
    assert "corpus file not found" in capsys.readouterr().err


def test_metrics_without_corpus_path_exits_one(tmp_path, capsys):
    cfg = tmp_path / "min.toml"
    cfg.write_text(f'[output]\ndir = "{tmp_path / "o"}"\n')
    assert main(["--config", str(cfg), "metrics"]) == 1


def test_analysis_failure_exits_two(tmp_path, capsys):
    corpus = tmp_path / "tiny.jsonl"
    corpus.write_text(
        '{"paper_id": "p1", "date": "2000-01-01", "authors": ["a"], "codes": ["11.22"]}\n'
    )
    cfg = tmp_path / "tiny.toml"
    cfg.write_text(
        f'[corpus]\npath = "{corpus}"\nmin_papers = 1\n'
        f'[output]\ndir = "{tmp_path / "o"}"\n'
    )
    assert main(["--config", str(cfg), "regress"]) == 2
    assert "analysis error" in capsys.readouterr().err


def test_bad_thread_count_exits_one(tmp_path):
    config, _ = write_config(tmp_path)
    assert main(["--config", str(config), "--threads", "0", "synth"]) == 1


# -- pipeline flow ---------------------------------------------------------


def test_synth_outputs(pipeline):
    _, out = pipeline
    assert (out / "corpus.jsonl").exists()
    manifest = json.loads((out / "synth_manifest.json").read_text())
    assert manifest["counts"]["authors"] == 60
    stage = json.loads((out / "manifest_synth.json").read_text())
    assert stage["stage"] == "synth" and stage["seed"] == 7
    assert set(stage["outputs"]) == {"corpus.jsonl", "synth_manifest.json"}


def test_validate_after_synth(pipeline, capsys):
    config, out = pipeline
    assert main(["--config", str(config), "validate"]) == 0
    report = json.loads((out / "validation.json").read_text())
    assert report["authors"] == 60


def test_metrics_rows(pipeline):
    _, out = pipeline
    rows = pd.read_csv(out / "rows.csv")
    assert len(rows) == 60
    assert {"ep_past", "ed_past", "logcit_future", "group"} <= set(rows.columns)
    assert set(rows["group"]) <= {"A", "B", "C", "D", "excluded"}


def test_graph_and_regress(pipeline, capsys):
    config, out = pipeline
    assert main(["--config", str(config), "graph"]) == 0
    assert (out / "graph_edges.csv").exists()
    assert main(["--config", str(config), "regress"]) == 0
    table = pd.read_csv(out / "regress_S4.csv")
    ep_row = table[table["term"] == "ep_past"].iloc[0]
    assert ep_row["estimate"] > 0  # planted positive propensity effect


def test_psm_and_psw(pipeline):
    config, out = pipeline
    assert main(["--config", str(config), "psm"]) == 0
    summary = json.loads((out / "psm_summary.json").read_text())
    assert summary["pairs"] > 0
    assert main(["--config", str(config), "psw"]) == 0
    psw = json.loads((out / "psw_summary.json").read_text())
    assert psw["baseline"] == "D" and "A" in psw["effects"]


def test_sweep_quantile(pipeline):
    config, out = pipeline
    assert main(
        ["--config", str(config), "sweep", "--dimension", "quantile", "--values", "50,25"]
    ) == 0
    sweep = pd.read_csv(out / "sweep_quantile.csv")
    assert list(sweep["quantile"]) == [50, 25]


def test_null_replicates(pipeline):
    config, out = pipeline
    assert main(["--config", str(config), "null", "--replicates", "2"]) == 0
    summary = json.loads((out / "null_summary.json").read_text())
    assert summary["author_level"]["replicates"] == 2
    done = summary["paper_level"]["replicates"] + summary["paper_level_failed_replicates"]
    assert done == 2


def test_report_outputs(pipeline):
    config, out = pipeline
    assert main(["--config", str(config), "report"]) == 0
    marg = pd.read_csv(out / "marginal_ep_past.csv")
    assert len(marg) == 21
    assert (out / "group_means.csv").exists()


def test_null_without_replicates_fails(pipeline, capsys):
    config, _ = pipeline
    assert main(["--config", str(config), "null"]) == 1


# -- determinism -----------------------------------------------------------


def test_pipeline_idempotent(tmp_path):
    config, out = write_config(tmp_path)
    assert main(["--config", str(config), "synth"]) == 0
    first = (out / "corpus.jsonl").read_bytes()
    first_manifest = json.loads((out / "manifest_synth.json").read_text())
    assert main(["--config", str(config), "synth"]) == 0
    assert (out / "corpus.jsonl").read_bytes() == first
    assert json.loads((out / "manifest_synth.json").read_text()) == first_manifest

    assert main(["--config", str(config), "metrics"]) == 0
    rows1 = (out / "rows.csv").read_bytes()
    assert main(["--config", str(config), "--threads", "3", "metrics"]) == 0
    assert (out / "rows.csv").read_bytes() == rows1


def test_seed_override_changes_output(tmp_path):
    config, out = write_config(tmp_path)
    assert main(["--config", str(config), "synth"]) == 0
    baseline = (out / "corpus.jsonl").read_bytes()
    assert main(["--config", str(config), "--seed", "99", "synth"]) == 0
    assert (out / "corpus.jsonl").read_bytes() != baseline
    stage = json.loads((out / "manifest_synth.json").read_text())
    assert stage["seed"] == 99
