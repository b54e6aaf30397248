"""End-to-end tests of the command line: outputs, configuration layers and exit codes."""

import json
from pathlib import Path

import pytest

from wikg.cli import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, main
from wikg.services.checkpoint_service import read_checkpoint


def _gen(out, *extra):
    return main([
        "-q", "gen", "--out", str(out), "--bags", "8", "--min-instances", "6",
        "--max-instances", "8", "--d-in", "4", "--folds", "2", *extra,
    ])


def _stdout_json(capsys):
    return json.loads(capsys.readouterr().out)


@pytest.fixture
def manifest(tmp_path, capsys):
    assert _gen(tmp_path / "data") == EXIT_OK
    return _stdout_json(capsys)["manifest"]


def test_gen_writes_dataset(tmp_path, capsys):
    assert _gen(tmp_path / "a") == EXIT_OK
    result = _stdout_json(capsys)
    assert result["n_bags"] == 8 and result["folds"] == [0, 1] and result["d_in"] == 4
    assert len(list((tmp_path / "a" / "bags").glob("*.wkgb"))) == 8

    assert _gen(tmp_path / "b") == EXIT_OK
    for name in ("manifest.csv", "dataset.json", "bags/bag_00003.wkgb"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_gen_cannot_stratify(tmp_path, capsys):
    code = main(["-q", "gen", "--out", str(tmp_path), "--bags", "3", "--folds", "4"])
    assert code == EXIT_USAGE
    assert "wikg gen:" in capsys.readouterr().err


def test_gradcheck_single_op(capsys):
    assert main(["-q", "gradcheck", "--op", "softmax"]) == EXIT_OK
    result = _stdout_json(capsys)
    assert result["passed"] and result["n_checks"] == 1


def test_gradcheck_failure_names_the_ops(tmp_path, capsys):
    out = tmp_path / "gradcheck.json"
    code = main(["-q", "gradcheck", "--op", "softmax,tanh", "--tol", "1e-14", "--out", str(out)])
    assert code == EXIT_FAILURE
    result = _stdout_json(capsys)
    assert result["failed"] and set(result["failed"]) <= {"softmax", "tanh"}
    assert json.loads(out.read_text())["failed"] == result["failed"]


def test_unknown_gradcheck_op_is_a_usage_error(capsys):
    assert main(["-q", "gradcheck", "--op", "conv2d"]) == EXIT_USAGE


def test_missing_manifest(tmp_path, capsys):
    code = main(["-q", "train", "--manifest", str(tmp_path / "nope.csv")])
    assert code == EXIT_USAGE
    assert "nope.csv" in capsys.readouterr().err


def test_policy_conflict(manifest, capsys):
    code = main(["-q", "train", "--manifest", manifest, "--model", "mean", "--policy", "knn-cos"])
    assert code == EXIT_USAGE


def test_unknown_flag():
    with pytest.raises(SystemExit) as info:
        main(["train", "--manifest", "m.csv", "--bogus"])
    assert info.value.code == 2


def test_verbose_and_quiet_conflict(capsys):
    with pytest.raises(SystemExit) as info:
        main(["-v", "-q", "gradcheck", "--op", "tanh"])
    assert info.value.code == 2
    assert "not allowed with" in capsys.readouterr().err


def test_flags_override_config_file(manifest, tmp_path, capsys):
    config = tmp_path / "run.toml"
    config.write_text('epochs = 1\nprecision = "float64"\n\n[model]\nk = 2\nd_model = 4\n')
    code = main([
        "-q", "train", "--manifest", manifest, "--config", str(config),
        "--k", "3", "--out", str(tmp_path / "run"),
    ])
    assert code == EXIT_OK
    result = _stdout_json(capsys)
    stored, tensors = read_checkpoint(result["checkpoint_path"])
    assert stored.k == 3
    assert stored.d_model == 4
    assert stored.d_in == 4
    assert all(str(a.dtype) == "float64" for a in tensors.values())


def test_unknown_config_key(manifest, tmp_path, capsys):
    config = tmp_path / "run.toml"
    config.write_text("epochs = 1\nbogus = 3\n")
    code = main(["-q", "train", "--manifest", manifest, "--config", str(config)])
    assert code == EXIT_USAGE


def test_cv_sweep_eval_and_export(manifest, tmp_path, capsys):
    common = ["--epochs", "1", "--d-model", "4", "--precision", "float64", "--folds", "2"]

    assert main(["-q", "cv", "--manifest", manifest, "--out", str(tmp_path / "cv"), "--k", "2", *common]) == EXIT_OK
    result = _stdout_json(capsys)
    assert set(result["summary"]) == {"accuracy", "auc", "weighted_f1"}
    assert (tmp_path / "cv" / "cv_summary.txt").read_text().startswith("metric")

    assert main(["-q", "sweep", "--manifest", manifest, "--out", str(tmp_path / "sweep"), "--k", "2,3", *common]) == EXIT_OK
    assert [row["k"] for row in _stdout_json(capsys)["rows"]] == [2, 3]
    assert (tmp_path / "sweep" / "sweep.csv").is_file()

    checkpoint = str(tmp_path / "cv" / "fold_0" / "checkpoint.wkgc")
    code = main(["-q", "eval", "--checkpoint", checkpoint, "--manifest", manifest, "--fold", "0", "--out", str(tmp_path / "eval")])
    assert code == EXIT_OK
    assert _stdout_json(capsys)["n_eval"] == 4
    assert json.loads((tmp_path / "eval" / "metrics.json").read_text())["n_eval"] == 4

    assert main(["-q", "external", "--manifest", manifest, "--cv-dir", str(tmp_path / "cv")]) == EXIT_OK
    assert len(_stdout_json(capsys)["per_checkpoint"]) == 2

    bag = str(Path(manifest).parent / "bags" / "bag_00000.wkgb")
    out = tmp_path / "graph.dot"
    code = main(["-q", "export-graph", "--checkpoint", checkpoint, "--bag", bag, "--format", "dot", "--out", str(out)])
    assert code == EXIT_OK
    result = _stdout_json(capsys)
    assert result["edges"] == result["n"] * 2
    dot = out.read_text()
    assert dot.startswith("digraph wikg {")
    # node labels come from the generator sidecar
    assert "0: " in dot


def test_sweep_k_beyond_smallest_bag(manifest, tmp_path, capsys):
    code = main(["-q", "sweep", "--manifest", manifest, "--out", str(tmp_path), "--k", "40", "--epochs", "1"])
    assert code == EXIT_FAILURE
