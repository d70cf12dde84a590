import json
from pathlib import Path

import numpy as np
import pytest

from frepdet.cli import main
from frepdet.spectral import read_grid, read_profile


def _tree(root):
    root = Path(root)
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def _synth(out, seed=7, n=12, size=16):
    argv = ["synth-data", "--family", "checkerboard", "--amplitude", "0.25", "--n", str(n), "--size", str(size),
            "--seed", str(seed), "--channels", "1", "--out", str(out)]
    assert main(argv) == 0


def test_no_arguments_is_usage_error(capsys):
    assert main([]) == 1
    assert "usage" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [["bogus"], ["synth-data", "--nope"], ["spectrum", "--input", "x", "--mode", "3d"],
                                  ["synth-data", "--family", "stripes", "--amplitude", "1", "--n", "1",
                                   "--size", "8", "--seed", "0"]])
def test_usage_errors_exit_one(argv, tmp_path, monkeypatch):
    monkeypatch.setenv("FREPDET_OUTPUT_ROOT", str(tmp_path))
    assert main(argv) == 1


def test_runtime_errors_exit_two(tmp_path):
    (tmp_path / "real").mkdir()
    assert main(["train", "--data", str(tmp_path), "--out", str(tmp_path / "o")]) == 2
    assert main(["evaluate", "--checkpoint", str(tmp_path / "none.ckpt"), "--scenario", str(tmp_path / "s"),
                 "--out", str(tmp_path / "r.jsonl")]) == 2


def test_synth_data_is_byte_identical(tmp_path):
    _synth(tmp_path / "a")
    _synth(tmp_path / "b")
    a, b = _tree(tmp_path / "a"), _tree(tmp_path / "b")
    assert a == b and len(a) == 25
    manifest = json.loads(a["manifest.json"])
    assert manifest["seed"] == 7 and manifest["config"]["n_per_class"] == 12
    assert set(manifest["outputs"]) == set(a) - {"manifest.json"}


def test_default_output_root(tmp_path, monkeypatch):
    monkeypatch.setenv("FREPDET_OUTPUT_ROOT", str(tmp_path / "root"))
    assert main(["synth-data", "--family", "grid", "--amplitude", "0.1", "--n", "1", "--size", "8",
                 "--seed", "0", "--period", "4"]) == 0
    assert (tmp_path / "root" / "synth-data" / "manifest.json").exists()


def test_spectrum_modes(tmp_path):
    _synth(tmp_path / "d")
    before = _tree(tmp_path / "d")
    assert main(["spectrum", "--input", str(tmp_path / "d"), "--mode", "1d", "--out", str(tmp_path / "s1")]) == 0
    real = read_profile(tmp_path / "s1" / "profile_real.csv")
    fake = read_profile(tmp_path / "s1" / "profile_fake.csv")
    assert fake[-1] > 10 * real[-1]  # the (N/2, N/2) corner cell
    assert main(["spectrum", "--input", str(tmp_path / "d" / "real"), "--mode", "2d",
                 "--out", str(tmp_path / "s2")]) == 0
    assert read_grid(tmp_path / "s2" / "spectrum_all.grid").shape == (16, 16)
    assert _tree(tmp_path / "d") == before  # inputs untouched


def test_train_evaluate_perturb_end_to_end(tmp_path):
    _synth(tmp_path / "train", seed=1, n=16)
    _synth(tmp_path / "held", seed=2, n=6)
    (tmp_path / "cfg.yaml").write_text("image_size: 16\nchannels: 1\nbatch_size: 8\nepochs: 5\nlambda: 0.25\n"
                                       "generator_preset: tiny\ndiscriminator_preset: tiny\n"
                                       "classifier_preset: tiny\nlr_discriminator: 0.0001\n")
    out = tmp_path / "run"
    assert main(["train", "--config", str(tmp_path / "cfg.yaml"), "--data", str(tmp_path / "train"),
                 "--eval-data", str(tmp_path / "held"), "--epochs", "2", "--seed", "4", "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    # flag beats file beats default
    assert manifest["config"]["epochs"] == 2 and manifest["config"]["lambda"] == 0.25
    assert manifest["config"]["lr_generator"] == 1e-4 and manifest["seed"] == 4
    assert "checkpoints/last.ckpt" in manifest["outputs"]
    last = json.loads((out / "metrics.jsonl").read_text().splitlines()[-1])

    (tmp_path / "sc.json").write_text(json.dumps({"scenario_id": "held", "dataset": {"dir": str(tmp_path / "held")}}))
    assert main(["evaluate", "--checkpoint", str(out / "checkpoints" / "last.ckpt"),
                 "--scenario", str(tmp_path / "sc.json"), "--out", str(tmp_path / "rep.jsonl")]) == 0
    rep = json.loads((tmp_path / "rep.jsonl").read_text())
    assert rep["accuracy"] == last["eval_acc"]
    assert (tmp_path / "rep.jsonl.manifest.json").exists()

    img = sorted((tmp_path / "held" / "fake").iterdir())[0]
    assert main(["perturb", "--checkpoint", str(out / "checkpoints" / "last.ckpt"), "--image", str(img),
                 "--out", str(tmp_path / "pert")]) == 0
    names = set(_tree(tmp_path / "pert"))
    assert names == {"input.png", "perturbation.grid", "perturbed.png", "profile_input.csv",
                     "profile_perturbed.csv", "manifest.json"}
    assert read_grid(tmp_path / "pert" / "perturbation.grid").shape == (16, 16)
    assert np.isfinite(read_profile(tmp_path / "pert" / "profile_perturbed.csv")).all()
