"""
Quick test to verify project structure, imports, command validation and
configuration layering.
"""

import pytest
from pydantic import ValidationError


def test_imports():
    """Test that all imports work"""
    # Core
    from wikg.core.config import settings, build_train_config
    from wikg.core.validation import validate_command, CommandName
    from wikg.core.logging import RunAudit

    # Engine
    from wikg.engine import Tape, Tensor, derive_rng
    from wikg.engine.gradcheck import gradcheck

    # Services
    from wikg.services.model_service import WikgModel
    from wikg.services.baseline_service import BaselineModel
    from wikg.services.train_service import cross_validate

    # Tools
    from wikg.tools.command_registry import execute_command, AVAILABLE_COMMANDS

    # Schemas
    from wikg.schemas.responses import BagRequest, PredictResponse

    # Routers
    from wikg.routers.inference_router import router as inference_router

    assert inference_router.prefix == "/inference"


def test_command_validation():
    """Test whitelist and argument validation"""
    from wikg.core.validation import validate_command

    # Valid call
    is_valid, error = validate_command("gradcheck", {"op": "softmax,tanh"})
    assert is_valid, f"Valid call rejected: {error}"

    # Unknown command
    is_valid, error = validate_command("rm", {})
    assert not is_valid
    assert "not in whitelist" in error

    # Unknown argument
    is_valid, error = validate_command("gradcheck", {"tolerance": 1e-3})
    assert not is_valid
    assert "tolerance" in error

    # Unknown gradient check
    is_valid, error = validate_command("gradcheck", {"op": "conv2d"})
    assert not is_valid

    # Missing required argument
    is_valid, error = validate_command("gen", {})
    assert not is_valid
    assert "out" in error

    # Policy only applies to wikg
    is_valid, error = validate_command("benchmark", {"out": "x", "model": "abmil", "policy": "knn-dist"})
    assert not is_valid


def test_parse_command_args(tmp_path):
    from wikg.core.validation import CommandName, parse_command_args
    from wikg.schemas.commands import GenArgs, SweepArgs

    name, args = parse_command_args("gen", {"out": str(tmp_path)})
    assert name is CommandName.GEN
    assert isinstance(args, GenArgs)
    assert (args.bags, args.min_instances, args.max_instances, args.d_in, args.folds) == (400, 30, 80, 384, 4)

    manifest = tmp_path / "manifest.csv"
    manifest.write_text("bag_path,label,fold\n")
    _, args = parse_command_args("sweep", {"manifest": str(manifest), "k_values": "2, 4,6"})
    assert isinstance(args, SweepArgs)
    assert args.k_values == [2, 4, 6]

    for bad in ("", "2,2", "0,3", "two"):
        with pytest.raises(ValueError):
            parse_command_args("sweep", {"manifest": str(manifest), "k_values": bad})


def test_configuration():
    """Test configuration loading"""
    from wikg.core.config import settings, TrainConfig

    assert settings.output_dir
    assert settings.precision.value in ("float32", "float64")

    # published defaults
    config = TrainConfig()
    assert (config.epochs, config.lr, config.weight_decay, config.batch_size) == (100, 1e-4, 1e-5, 1)
    assert (config.model.k, config.model.d_model, config.model.dropout_p) == (6, 512, 0.3)
    with pytest.raises(ValidationError):
        TrainConfig(batch_size=4)


def test_config_layers(tmp_path):
    """Defaults < TOML file < flags, with the model table merged key by key"""
    from wikg.core.config import build_train_config, load_config_file

    path = tmp_path / "run.toml"
    path.write_text('epochs = 5\nlr = 0.01\n\n[model]\nk = 4\nreadout = "max"\n')
    layers = [{"model": {"d_in": 16}}, load_config_file(path), {"lr": 0.02, "model": {"k": 2}}]
    config = build_train_config(layers)
    assert config.epochs == 5
    assert config.lr == 0.02
    assert config.model.k == 2
    assert config.model.readout.value == "max"
    assert config.model.d_in == 16

    with pytest.raises(FileNotFoundError):
        load_config_file(tmp_path / "missing.toml")
    with pytest.raises(ValidationError):
        build_train_config([{"model": {"depth": 3}}])


def test_commands_registry():
    """Test commands are registered"""
    from wikg.core.validation import CommandName
    from wikg.tools.command_registry import AVAILABLE_COMMANDS

    for name in CommandName:
        assert name.value in AVAILABLE_COMMANDS, f"Command '{name.value}' not registered"


def test_execute_command_reports_errors(tmp_path):
    from wikg.tools.command_registry import RUNTIME, VALIDATION, execute_command

    outcome = execute_command("nope", {})
    assert outcome["success"] is False
    assert outcome["error_kind"] == VALIDATION

    checkpoint = tmp_path / "bad.wkgc"
    checkpoint.write_bytes(b"NOPE")
    bag = tmp_path / "b.wkgb"
    bag.write_bytes(b"NOPE")
    outcome = execute_command("export-graph", {"checkpoint": str(checkpoint), "bag": str(bag)})
    assert outcome["success"] is False
    assert outcome["error_kind"] == RUNTIME
    assert outcome["error"].startswith("FormatError")

    outcome = execute_command("gradcheck", {"op": ["tanh"]})
    assert outcome["success"] is True
    assert outcome["result"]["passed"]
