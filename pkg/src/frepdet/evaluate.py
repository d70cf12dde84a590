"""Scenario runner: apply a transform chain to a dataset and score it.

A scenario is a declarative dict, stored next to its report so every row can
be re-run::

    {"scenario_id": "hue",
     "dataset": {"dir": "data/test"}                # or {"synthetic": {...}}
     "transforms": [{"kind": "hue", "magnitude": 0.1}, {"kind": "resize", "size": 16}],
     "families": ["none", "ring"]}                  # optional source_tag filter
"""
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .classifier import predict_many
from .data import (FAKE, REAL, SUITE_DEFAULTS, ManipulationSpec, SyntheticArtifactSpec, load_dataset,
                   manipulate, resize, synthesize_toy_dataset)
from .errors import ConfigError, InvalidDatasetError
from .metrics import accuracy, average_precision


@dataclass
class EvalReport:
    scenario_id: str
    accuracy: float
    average_precision: float
    n_real: int
    n_fake: int


def _spec(d):
    d = dict(d)
    if d.get("radial_band") is not None:
        d["radial_band"] = tuple(d["radial_band"])
    return SyntheticArtifactSpec(**d)


def resolve_dataset(ref, image_size, channels):
    if "items" in ref:
        return list(ref["items"])
    if "dir" in ref:
        return load_dataset(ref["dir"], image_size, channels=channels)
    if "synthetic" in ref:
        s = ref["synthetic"]
        return synthesize_toy_dataset(_spec(s.get("real", {})), _spec(s["fake"]), s["n_per_class"],
                                      s.get("size", image_size), s["seed"], channels=s.get("channels", channels))
    raise ConfigError(f"scenario dataset needs 'dir' or 'synthetic', got {sorted(ref)}")


def apply_transforms(image, transforms, model_size):
    x = image
    for t in transforms:
        t = dict(t)
        kind = t.pop("kind")
        if kind == "resize":
            x = resize(x, t["size"])
        else:
            x = manipulate(x, ManipulationSpec(kind, float(t["magnitude"])))
    if x.shape[:2] != (model_size, model_size):
        x = resize(x, model_size)
    return x


def run_scenario(g, c, scenario):
    h, w, ch = g.image_shape
    items = resolve_dataset(scenario["dataset"], h, ch)
    fams = scenario.get("families")
    if fams is not None:
        items = [it for it in items if it.source_tag in fams]
    if not items:
        raise InvalidDatasetError(f"scenario {scenario.get('scenario_id')!r} selects no images")
    transforms = scenario.get("transforms", [])
    images = [apply_transforms(it.image, transforms, h) for it in items]
    labels = np.array([it.label for it in items])
    probs = predict_many(g, c, images)
    ap = average_precision(probs, labels) if (labels == FAKE).any() else float("nan")
    return EvalReport(
        scenario_id=str(scenario.get("scenario_id", "scenario")),
        accuracy=accuracy(probs, labels),
        average_precision=ap,
        n_real=int((labels == REAL).sum()),
        n_fake=int((labels == FAKE).sum()),
    )


def manipulation_suite(dataset_ref, magnitudes=None):
    """Original plus one scenario per manipulation kind."""
    mags = {**SUITE_DEFAULTS, **(magnitudes or {})}
    out = [{"scenario_id": "original", "dataset": dataset_ref, "transforms": []}]
    for kind, m in mags.items():
        out.append({"scenario_id": f"manip-{kind}", "dataset": dataset_ref,
                    "transforms": [{"kind": kind, "magnitude": m}]})
    return out


def resolution_suite(dataset_ref, sizes):
    """Downscale to each size; the runner scales back to the model size."""
    return [{"scenario_id": f"res-{s}", "dataset": dataset_ref, "transforms": [{"kind": "resize", "size": s}]}
            for s in sizes]


def load_scenarios(path):
    """A JSON object, a JSON list, or JSON lines."""
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        data = [json.loads(ln) for ln in text.splitlines() if ln.strip()]
    return data if isinstance(data, list) else [data]


def write_reports(reports, scenarios, path):
    with open(path, "w") as fh:
        for rep, sc in zip(reports, scenarios):
            sc = {k: v for k, v in sc.items() if k != "dataset" or "items" not in v}
            fh.write(json.dumps({**asdict(rep), "scenario": sc}) + "\n")
