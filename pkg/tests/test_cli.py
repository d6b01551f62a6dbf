import json
import sys

import numpy as np
import pytest

import ordinal_embedding_tool.core.experiments as experiments
from ordinal_embedding_tool.core.embedders import Embedding, EmbedReport
from ordinal_embedding_tool.utils.seeds import rng_for
from ordinal_embedding_tool.utils.serialization import read_cloud, write_embedding


@pytest.fixture()
def cli_module():
    import importlib

    return importlib.import_module("ordinal_embedding_tool.cli.main")


@pytest.fixture()
def cli(cli_module):
    return cli_module.CLI()


@pytest.fixture()
def cloud_file(cli, tmp_path):
    def make(n, seed=3):
        out = tmp_path / f"cloud_{n}"
        assert cli.run(["gen", "--n", str(n), "--seed", str(seed), "--out", str(out)]) == 0
        return str(out / "cloud.json")

    return make


@pytest.fixture()
def fake_embed(monkeypatch):
    def embed(cset, dim, seed, embedder):
        truth = cset.oracle.cloud.points
        noise = 1e-3 * rng_for(seed).standard_normal(truth.shape)
        return Embedding(truth + noise), EmbedReport(0, 0, 0.0)

    monkeypatch.setattr(experiments, "_embed", embed)


def test_setup_parser_and_dispatch(cli):
    args = cli.setup_parser().parse_args(["gen", "--n", "5"])
    assert args.command == "gen"
    assert args.seed is None and args.out == "."


def test_no_command_prints_help(cli, capsys):
    assert cli.run([]) == 0
    assert "ordinal-embedding" in capsys.readouterr().out


def test_gen_writes_cloud(cli, tmp_path):
    rc = cli.run(["gen", "--n", "15", "--dim", "3", "--seed", "4", "--out", str(tmp_path)])
    assert rc == 0
    cloud = read_cloud(str(tmp_path / "cloud.json"))
    assert cloud.points.shape == (15, 3)
    assert cloud.seed == 4


def test_gen_from_experiment_domain(cli, tmp_path):
    config = tmp_path / "experiment.json"
    config.write_text(
        json.dumps({"n_grid": [10], "domain": {"balls": [{"center": [5.0], "radius": 0.5}]}}),
        encoding="utf-8",
    )
    rc = cli.run(["gen", "--n", "8", "--config", str(config), "--out", str(tmp_path)])
    assert rc == 0
    cloud = read_cloud(str(tmp_path / "cloud.json"))
    assert np.all(np.abs(cloud.points[:, 0] - 5.0) < 0.5)


def test_design_exports_comparisons(cli, cloud_file, tmp_path):
    out = tmp_path / "design"
    rc = cli.run(["design", "--cloud", cloud_file(6), "--kind", "triple", "--out", str(out)])
    assert rc == 0
    descriptor = json.loads((out / "design.json").read_text(encoding="utf-8"))
    assert descriptor["kind"] == "triple"
    assert descriptor["query_budget"] == 6 * 6 * 5
    lines = (out / "comparisons.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "i,j,k,l"
    assert len(lines) - 1 == descriptor["query_budget"] // 2


def test_design_too_large_to_export(cli, cloud_file, tmp_path, capsys):
    out = tmp_path / "design"
    rc = cli.run(["design", "--cloud", cloud_file(45), "--out", str(out)])
    assert rc == 0
    assert (out / "design.json").exists()
    assert not (out / "comparisons.csv").exists()
    assert "⚠️" in capsys.readouterr().out


def test_design_missing_parameter_is_usage_error(cli, cloud_file, capsys):
    rc = cli.run(["design", "--cloud", cloud_file(6), "--kind", "knn"])
    assert rc == 2
    assert "❌ Error en design" in capsys.readouterr().out


def test_missing_cloud_file(cli, tmp_path):
    assert cli.run(["design", "--cloud", str(tmp_path / "nope.json")]) == 2


def test_embed_rejection_is_exact(cli, cloud_file, tmp_path):
    out = tmp_path / "embed"
    rc = cli.run(
        ["embed", "--cloud", cloud_file(4), "--embedder", "rejection", "--seed", "1", "--out", str(out)]
    )
    assert rc == 0
    report = json.loads((out / "embed_report.json").read_text(encoding="utf-8"))
    assert report["violations"] == 0
    assert (out / "embedding.json").exists()


def test_embed_csv_output(cli, cloud_file, tmp_path):
    out = tmp_path / "embed"
    rc = cli.run(
        [
            "embed", "--cloud", cloud_file(10), "--kind", "local", "--neighbors", "4",
            "--iterations", "100", "--restarts", "1", "--format", "csv", "--out", str(out),
        ]
    )
    assert rc in (0, 1)
    assert (out / "embedding.csv").read_text(encoding="utf-8").startswith("index,x1,x2")


def test_embed_rejection_guard(cli, cloud_file, capsys):
    rc = cli.run(["embed", "--cloud", cloud_file(9), "--embedder", "rejection"])
    assert rc == 1
    assert "❌ Error en embed" in capsys.readouterr().out


def test_eval_truth_embedding(cli, cloud_file, tmp_path):
    path = cloud_file(12)
    embedding = write_embedding(Embedding(read_cloud(path).points), str(tmp_path / "truth.json"))
    out = tmp_path / "eval"
    rc = cli.run(["eval", "--cloud", path, "--embedding", embedding, "--kind", "triple", "--out", str(out)])
    assert rc == 0
    result = json.loads((out / "eval.json").read_text(encoding="utf-8"))
    assert result["alignment"]["sup_error"] < 1e-8
    assert result["verification"]["violations"] == 0
    assert result["design"]["kind"] == "triple"


def test_rates_needs_config(cli, capsys):
    assert cli.run(["rates"]) == 2
    assert "--config" in capsys.readouterr().out


def test_rates_invalid_config(cli, tmp_path):
    config = tmp_path / "bad.json"
    config.write_text(json.dumps({"n_grid": [10, 5]}), encoding="utf-8")
    assert cli.run(["rates", "--config", str(config)]) == 2


def test_rates_with_overrides(cli, tmp_path, fake_embed):
    config = tmp_path / "experiment.json"
    config.write_text(
        json.dumps({"n_grid": [20, 40], "trials": 2, "output_dir": str(tmp_path / "ignored")}),
        encoding="utf-8",
    )
    out = tmp_path / "rates"
    rc = cli.run(["rates", "--config", str(config), "--seed", "0", "--format", "csv", "--out", str(out)])
    assert rc == 0
    assert (out / "rates.csv").exists() and (out / "rates.svg").exists()
    assert not (out / "summary.json").exists()
    assert not (tmp_path / "ignored").exists()


def test_rates_failed_gate(cli, tmp_path, fake_embed):
    config = tmp_path / "experiment.json"
    config.write_text(
        json.dumps({"n_grid": [20, 40], "trials": 1, "ratio_gate": 1e-9, "output_dir": str(tmp_path / "r")}),
        encoding="utf-8",
    )
    assert cli.run(["rates", "--config", str(config)]) == 1
    summary = json.loads((tmp_path / "r" / "summary.json").read_text(encoding="utf-8"))
    assert summary["gates"] == {"ratio": False}


def test_rates_eps_increase_fails(cli, tmp_path, fake_embed, monkeypatch, capsys):
    monkeypatch.setattr(experiments, "hausdorff_density", lambda cloud, domain, resolution: 0.01 * cloud.n)
    config = tmp_path / "experiment.json"
    config.write_text(
        json.dumps({"n_grid": [20, 40], "trials": 1, "output_dir": str(tmp_path / "r")}),
        encoding="utf-8",
    )
    assert cli.run(["rates", "--config", str(config)]) == 1
    assert "ε_n" in capsys.readouterr().out
    summary = json.loads((tmp_path / "r" / "summary.json").read_text(encoding="utf-8"))
    assert summary["eps_monotone"] is False
    assert summary["eps_increases"] == [[0, 40]]


def test_lemmas_table(cli, tmp_path, capsys):
    out = tmp_path / "lemmas"
    rc = cli.run(["lemmas", "--only", "simplex", "inter-vol", "--seed", "2", "--out", str(out)])
    assert rc == 0
    assert "simplex" in capsys.readouterr().out
    checks = json.loads((out / "lemmas.json").read_text(encoding="utf-8"))
    assert [c["status"] for c in checks] == ["pass", "pass"]


def test_lemmas_collinear_injection(cli):
    assert cli.run(["lemmas", "--only", "barycenter", "--inject-collinear"]) == 0


def test_main_exits_with_code(cli_module, monkeypatch):
    monkeypatch.setattr(sys, "argv", ["ordinal-embedding", "rates"])
    with pytest.raises(SystemExit) as info:
        cli_module.main()
    assert info.value.code == 2
