"""Command-line entry point: ``frepdet {train,evaluate,spectrum,perturb,synth-data}``.

Exit codes: 0 success, 1 usage error, 2 runtime error raised by the library.
Every run writes ``manifest.json`` (resolved config, seed, sha256 of outputs)
into its output directory.  ``FREPDET_OUTPUT_ROOT`` sets the default root
for runs that are not given ``--out``.
"""
import argparse
import dataclasses
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .errors import ConfigError, FrepdetError

log = logging.getLogger("frepdet")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for runtime failures here
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _output_root():
    return Path(os.environ.get("FREPDET_OUTPUT_ROOT", "runs"))


def _out_dir(args, command):
    out = Path(args.out) if args.out else _output_root() / command
    out.mkdir(parents=True, exist_ok=True)
    return out


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir, command, config, seed, exclude=("manifest.json",)):
    """Hash every file under ``out_dir`` (sorted) next to the resolved config."""
    out_dir = Path(out_dir)
    files = sorted(p for p in out_dir.rglob("*") if p.is_file() and p.name not in exclude)
    manifest = {
        "command": command,
        "version": __version__,
        "seed": seed,
        "config": config,
        "outputs": {p.relative_to(out_dir).as_posix(): _sha256(p) for p in files},
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


# --------------------------------------------------------------------------
# train

_TRAIN_FLAG_NAMES = {"lam": "lambda"}


def _bool(text):
    low = str(text).lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _add_train_overrides(p):
    from .trainer import TrainConfig

    for f in dataclasses.fields(TrainConfig):
        name = _TRAIN_FLAG_NAMES.get(f.name, f.name)
        kind = {float: float, int: int, bool: _bool, str: str}[type(f.default)]
        p.add_argument("--" + name.replace("_", "-"), dest="ov_" + f.name, type=kind, default=None,
                       metavar=name.upper())


def resolve_train_config(config_path, args):
    """Flags override the config file, which overrides the defaults."""
    from .trainer import TrainConfig

    values = {}
    if config_path:
        loaded = yaml.safe_load(Path(config_path).read_text()) or {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"{config_path}: expected a key-value mapping")
        values.update(loaded)
        if "lambda" in values:
            values["lam"] = values.pop("lambda")
    for key, val in vars(args).items():
        if key.startswith("ov_") and val is not None:
            values[key[3:]] = val
    return TrainConfig.from_dict(values)


def cmd_train(args):
    from .checkpoint import save_checkpoint
    from .data import load_dataset
    from .trainer import train

    cfg = resolve_train_config(args.config, args)
    out = _out_dir(args, "train")
    dataset = load_dataset(args.data, cfg.image_size, channels=cfg.channels)
    eval_set = load_dataset(args.eval_data, cfg.image_size, channels=cfg.channels) if args.eval_data else None
    (out / "config.yaml").write_text(yaml.safe_dump(cfg.to_dict(), sort_keys=True))
    metrics = out / "metrics.jsonl"
    metrics.unlink(missing_ok=True)
    state, records = train(cfg, dataset, eval_dataset=eval_set, checkpoint_dir=out / "checkpoints",
                           log_path=metrics)
    if not records:
        # zero epochs: still leave a loadable checkpoint behind
        save_checkpoint(state, out / "checkpoints" / "last.ckpt")
    config = {**cfg.to_dict(), "data": str(args.data), "eval_data": args.eval_data and str(args.eval_data)}
    write_manifest(out, "train", config, cfg.seed)
    if records:
        print(json.dumps(records[-1]))
    return EXIT_OK


# --------------------------------------------------------------------------
# evaluate

def cmd_evaluate(args):
    from .checkpoint import load_checkpoint
    from .evaluate import load_scenarios, run_scenario, write_reports

    state = load_checkpoint(args.checkpoint)
    scenarios = load_scenarios(args.scenario)
    reports = [run_scenario(state.generator, state.classifier, sc) for sc in scenarios]
    out_file = Path(args.out)
    out_file.parent.mkdir(parents=True, exist_ok=True)
    write_reports(reports, scenarios, out_file)
    for rep in reports:
        print(json.dumps(dataclasses.asdict(rep)))
    manifest = {
        "command": "evaluate",
        "version": __version__,
        "seed": state.config.seed,
        "config": {"checkpoint": str(args.checkpoint), "checkpoint_sha256": _sha256(args.checkpoint),
                   "scenarios": scenarios, "train_config": state.config.to_dict()},
        "outputs": {out_file.name: _sha256(out_file)},
    }
    Path(str(out_file) + ".manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


# --------------------------------------------------------------------------
# spectrum

def _spectrum_groups(input_dir, size, channels):
    from .data import _image_files, load_dataset, read_image, resize

    root = Path(input_dir)
    if (root / "real").is_dir() and (root / "fake").is_dir():
        items = load_dataset(root, size, channels=channels)
        return {"real": [it.image for it in items if it.label == 0],
                "fake": [it.image for it in items if it.label == 1]}
    if not root.is_dir():
        raise ConfigError(f"{root} is not a directory")
    images = [read_image(p) for p in _image_files(root)]
    if not images:
        raise ConfigError(f"no images in {root}")
    if size:
        images = [resize(im, size) if im.shape[:2] != (size, size) else im for im in images]
    return {"all": images}


def cmd_spectrum(args):
    from .spectral import mean_radial_profile, mean_spectrum_2d, write_grid, write_profile

    out = _out_dir(args, "spectrum")
    for name, images in _spectrum_groups(args.input, args.size, args.channels).items():
        if args.mode == "1d":
            write_profile(mean_radial_profile(images, mode=args.profile), out / f"profile_{name}.csv")
        else:
            write_grid(mean_spectrum_2d(images), out / f"spectrum_{name}.grid")
    config = {"input": str(args.input), "mode": args.mode, "size": args.size, "channels": args.channels,
              "profile": args.profile}
    write_manifest(out, "spectrum", config, None)
    return EXIT_OK


# --------------------------------------------------------------------------
# perturb

def cmd_perturb(args):
    from .checkpoint import load_checkpoint
    from .data import _match_channels, quantize, read_image, resize, write_image
    from .frepgan import apply_perturbation, generate_perturbation
    from .spectral import radial_power_spectrum, write_grid, write_profile

    state = load_checkpoint(args.checkpoint)
    h, w, c = state.generator.image_shape
    x = _match_channels(read_image(args.image), c)
    if x.shape[:2] != (h, w):
        x = quantize(resize(x, h))
    pmap = generate_perturbation(state.generator, x)
    perturbed = apply_perturbation(x, pmap)
    out = _out_dir(args, "perturb")
    write_image(x, out / "input.png")
    write_grid(pmap, out / "perturbation.grid")
    # the PNG is clipped to the displayable range; the profile uses the raw sum
    write_image(np.clip(perturbed, -1.0, 1.0), out / "perturbed.png")
    write_profile(radial_power_spectrum(x), out / "profile_input.csv")
    write_profile(radial_power_spectrum(perturbed), out / "profile_perturbed.csv")
    config = {"checkpoint": str(args.checkpoint), "checkpoint_sha256": _sha256(args.checkpoint),
              "image": str(args.image), "image_shape": [h, w, c]}
    write_manifest(out, "perturb", config, state.config.seed)
    return EXIT_OK


# --------------------------------------------------------------------------
# synth-data

def cmd_synth(args):
    from .data import FAMILIES, SyntheticArtifactSpec, save_dataset, synthesize_toy_dataset

    if args.family not in FAMILIES or args.family == "none":
        raise UsageError(f"--family must be one of {sorted(set(FAMILIES) - {'none'})}")
    band = tuple(args.band) if args.band else None
    fake = SyntheticArtifactSpec(args.family, args.amplitude, radial_band=band, period=args.period,
                                 base_texture_seed=args.base_texture_seed)
    real = SyntheticArtifactSpec(base_texture_seed=args.base_texture_seed)
    items = synthesize_toy_dataset(real, fake, args.n, args.size, args.seed, channels=args.channels)
    out = _out_dir(args, "synth-data")
    save_dataset(items, out)
    config = {"family": args.family, "amplitude": args.amplitude, "radial_band": band, "period": args.period,
              "base_texture_seed": args.base_texture_seed, "n_per_class": args.n, "size": args.size,
              "channels": args.channels}
    write_manifest(out, "synth-data", config, args.seed)
    return EXIT_OK


# --------------------------------------------------------------------------

def build_parser():
    p = _Parser(prog="frepdet", description="Frequency-perturbation deepfake detector toolkit.")
    p.add_argument("--version", action="version", version=f"frepdet {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    t = sub.add_parser("train", help="train G, D and C from a config file")
    t.add_argument("--config", help="YAML/JSON key-value file with TrainConfig fields")
    t.add_argument("--data", required=True, help="dataset root with real/ and fake/")
    t.add_argument("--eval-data", help="held-out dataset root (default: split off the training data)")
    t.add_argument("--out")
    _add_train_overrides(t)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="score a checkpoint on scenario descriptors")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--scenario", required=True, help="JSON object, list, or JSON lines")
    e.add_argument("--out", required=True, help="report file (JSON lines)")
    e.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("spectrum", help="mean radial (1d) or 2-D log spectra of an image folder")
    s.add_argument("--input", required=True)
    s.add_argument("--mode", choices=("1d", "2d"), default="1d")
    s.add_argument("--profile", choices=("mean", "sum"), default="mean", help="per-bin mean or sum (1d)")
    s.add_argument("--size", type=int, help="resize images to this size first")
    s.add_argument("--channels", type=int, choices=(1, 3))
    s.add_argument("--out")
    s.set_defaults(func=cmd_spectrum)

    q = sub.add_parser("perturb", help="write x, G(x), x+G(x) and their radial profiles")
    q.add_argument("--checkpoint", required=True)
    q.add_argument("--image", required=True)
    q.add_argument("--out")
    q.set_defaults(func=cmd_perturb)

    d = sub.add_parser("synth-data", help="write a synthetic real/fake toy dataset")
    d.add_argument("--family", required=True)
    d.add_argument("--amplitude", type=float, required=True)
    d.add_argument("--n", type=int, required=True, help="images per class")
    d.add_argument("--size", type=int, required=True)
    d.add_argument("--seed", type=int, required=True)
    d.add_argument("--period", type=int, default=2)
    d.add_argument("--band", type=float, nargs=2, metavar=("LO", "HI"), help="ring radial band")
    d.add_argument("--base-texture-seed", type=int, default=0)
    d.add_argument("--channels", type=int, choices=(1, 3), default=3)
    d.add_argument("--out")
    d.set_defaults(func=cmd_synth)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (FrepdetError, OSError, yaml.YAMLError) as exc:
        print(f"frepdet: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
