import json
from pathlib import Path

import pytest

from locco.cli import EXIT_CONFIG, EXIT_MISSING, EXIT_OK, EXIT_RUNTIME, main
from locco.data import ConfigInvalid, DataFormatError, MissingArtifact, load_config, parse_config, read_pairs
from locco.presets import toy_config

TINY = """\
# synthetic toy run
data_dir = data
artifact_dir = runs
toy_entities = 4
toy_relations = 2
toy_facts = 8
n_supervised = 8
n_unlabeled = 12
n_val = 6
n_test = 6
K = 2
N = 3
lr = 0.01          # silver-phase step
warmup_lr = 0.01
warmup_epochs = 2
batch_size = 4
embed_size = 8
hidden_size = 8
max_len = 24
generator_epochs = 1
"""


def test_parse_config_fields_and_paths(tmp_path):
    cfg = parse_config(TINY, tmp_path, environ={})
    assert cfg.iteration.K == 2 and cfg.iteration.lr == 0.01
    assert cfg.data_dir == tmp_path / "data" and cfg.artifact_dir == tmp_path / "runs"
    assert cfg.split_path("unlabeled") == tmp_path / "data" / "unlabeled.txt"


def test_environment_overrides(tmp_path):
    cfg = parse_config(TINY, tmp_path, environ={"LOCCO_SEED": "7", "LOCCO_ARTIFACT_DIR": "/abs/out"})
    assert cfg.iteration.seed == 7 and cfg.artifact_dir == Path("/abs/out")


def test_toy_preset():
    cfg = parse_config("preset = toy\nK = 2\n", environ={})
    assert cfg.iteration == toy_config(K=2)


@pytest.mark.parametrize("text", ["bogus = 1", "K = many", "K = 0", "domain = amr", "preset = huge", "no equals"])
def test_invalid_configs(text):
    with pytest.raises(ConfigInvalid):
        parse_config(text, environ={})


def test_optional_values():
    assert parse_config("warmup_lr = none", environ={}).iteration.warmup_lr is None
    assert parse_config("carry_counts = yes", environ={}).iteration.carry_counts is True


def test_missing_config_file(tmp_path):
    with pytest.raises(MissingArtifact):
        load_config(tmp_path / "nope.cfg")


def test_read_pairs_errors(tmp_path):
    path = tmp_path / "p.tsv"
    path.write_text("text without tab\n")
    with pytest.raises(DataFormatError):
        read_pairs(path)
    path.write_text("text\t<S> a <O> b\n")
    with pytest.raises(DataFormatError):
        read_pairs(path)
    with pytest.raises(MissingArtifact):
        read_pairs(tmp_path / "absent.tsv")


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    (root / "run.cfg").write_text(TINY)
    return root


def cli(workspace, *args):
    return main([args[0], str(workspace / "run.cfg"), *args[1:]])


def test_cli_pipeline(workspace, capsys):
    assert cli(workspace, "gen-toy") == EXIT_OK
    assert (workspace / "data" / "train.tsv").exists()
    assert cli(workspace, "gen-toy") == EXIT_CONFIG  # refuses to overwrite
    assert cli(workspace, "gen-toy", "--overwrite") == EXIT_OK

    assert cli(workspace, "iterate", "--i", "2") == EXIT_MISSING
    assert cli(workspace, "warmup") == EXIT_OK
    assert cli(workspace, "iterate", "--i", "2") == EXIT_MISSING
    assert cli(workspace, "iterate", "--i", "1") == EXIT_OK
    first = (workspace / "runs" / "iter-1" / "parser.ckpt").read_bytes()
    assert cli(workspace, "iterate", "--i", "1") == EXIT_CONFIG
    assert cli(workspace, "iterate", "--i", "1", "--overwrite") == EXIT_OK
    assert (workspace / "runs" / "iter-1" / "parser.ckpt").read_bytes() == first

    capsys.readouterr()
    assert cli(workspace, "run", "--resume", "--report") == EXIT_OK
    out = capsys.readouterr().out
    assert "2,test,exact_match," in out
    assert (workspace / "runs" / "iterations.png").stat().st_size > 0
    assert json.loads((workspace / "runs" / "history.json").read_text())[-1]["iteration"] == 2

    assert cli(workspace, "eval", "--split", "validation") == EXIT_OK
    assert "2,validation,exact_match," in capsys.readouterr().out
    assert cli(workspace, "eval", "--checkpoint", str(workspace / "missing.ckpt")) == EXIT_MISSING

    assert cli(workspace, "train-generator", "--toy") == EXIT_OK
    assert "3,test,text_exact_match," in capsys.readouterr().out
    assert (workspace / "runs" / "generator-flip" / "generator.ckpt").exists()


def test_cli_ablate(workspace, capsys):
    if not (workspace / "data" / "train.tsv").exists():
        assert cli(workspace, "gen-toy") == EXIT_OK
    code = cli(workspace, "ablate", "--seeds", "0,1", "--methods", "full,unit_typo")
    assert code == EXIT_CONFIG
    assert cli(workspace, "ablate", "--seeds", "0", "--toy") == EXIT_OK
    out = capsys.readouterr().out
    table = (workspace / "runs" / "ablation" / "table.tsv").read_text().splitlines()
    assert len(table) == 7  # header plus the six methods
    assert (workspace / "runs" / "ablation" / "ablation.png").stat().st_size > 0
    assert "figure\t" in out


def test_cli_error_codes(tmp_path, capsys):
    assert main(["warmup", str(tmp_path / "absent.cfg")]) == EXIT_MISSING
    (tmp_path / "bad.cfg").write_text("bogus = 3\n")
    assert main(["warmup", str(tmp_path / "bad.cfg")]) == EXIT_CONFIG
    (tmp_path / "c.cfg").write_text("supervised = t.tsv\nartifact_dir = out\n")
    (tmp_path / "t.tsv").write_text("x\t<S> a <R> b <O> c\n")
    (tmp_path / "broken.ckpt").write_bytes(b"not a checkpoint\n")
    assert main(["eval", str(tmp_path / "c.cfg"), "--checkpoint", str(tmp_path / "broken.ckpt"),
                 "--split", "train"]) == EXIT_RUNTIME
    assert "runtime failure" in capsys.readouterr().err
