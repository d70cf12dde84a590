"""Checkpoint container.

Layout::

    b"FRPDCKPT" | uint32 version | uint64 header length | JSON header | payload

The header names every tensor (section, name, dtype, shape, offset) and
carries the architecture descriptors, config, counters, loss history and a
SHA-256 of the payload. Sections: ``generator``, ``discriminator``,
``classifier`` and ``optim/<net>`` for Adam state.
"""
import hashlib
import json
import struct
from pathlib import Path

import numpy as np
import torch

from . import nets
from .errors import CheckpointError
from .frepgan import LossBreakdown

MAGIC = b"FRPDCKPT"
VERSION = 1
_PREFIX = struct.Struct("<8sIQ")


def _optim_tensors(opt):
    out = {}
    for idx, st in opt.state_dict()["state"].items():
        for key, val in st.items():
            out[f"{idx}.{key}"] = val if torch.is_tensor(val) else torch.tensor(val)
    return out


def _sections(state):
    secs = {}
    for name in ("generator", "discriminator", "classifier"):
        secs[name] = dict(state.net(name).state_dict())
        secs[f"optim/{name}"] = _optim_tensors(state.optimizers[name])
    return secs


def save_checkpoint(state, path):
    entries, chunks, offset = [], [], 0
    for section, tensors in _sections(state).items():
        for name, t in tensors.items():
            arr = t.detach().cpu().contiguous().numpy()
            raw = arr.tobytes()
            entries.append({"section": section, "name": name, "dtype": arr.dtype.str,
                            "shape": list(arr.shape), "offset": offset, "nbytes": len(raw)})
            chunks.append(raw)
            offset += len(raw)
    payload = b"".join(chunks)
    header = {
        "version": VERSION,
        "config": state.config.to_dict(),
        "descriptors": {n: state.net(n).descriptor for n in ("generator", "discriminator", "classifier")},
        "optimizer_groups": {n: [{k: v for k, v in g.items() if k != "params"}
                                 for g in state.optimizers[n].state_dict()["param_groups"]]
                             for n in state.optimizers},
        "step": state.step,
        "epoch": state.epoch,
        "history": [b.as_dict() for b in state.history],
        "tensors": entries,
        "payload_nbytes": len(payload),
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
    }
    hbytes = json.dumps(header).encode("utf-8")
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(_PREFIX.pack(MAGIC, VERSION, len(hbytes)))
        fh.write(hbytes)
        fh.write(payload)
    tmp.replace(path)


def read_container(path):
    """Parse and verify a checkpoint; returns ``(header, {section: {name: ndarray}})``."""
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read {path}: {exc}") from exc
    if len(blob) < _PREFIX.size:
        raise CheckpointError("file too short for a checkpoint header")
    magic, version, hlen = _PREFIX.unpack_from(blob)
    if magic != MAGIC:
        raise CheckpointError("bad magic: not a checkpoint file")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} (expected {VERSION})")
    start = _PREFIX.size + hlen
    if len(blob) < start:
        raise CheckpointError("truncated checkpoint header")
    try:
        header = json.loads(blob[_PREFIX.size:start].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint header: {exc}") from exc
    payload = blob[start:]
    if len(payload) != header.get("payload_nbytes"):
        raise CheckpointError(f"payload is {len(payload)} bytes, header says {header.get('payload_nbytes')}")
    if hashlib.sha256(payload).hexdigest() != header.get("payload_sha256"):
        raise CheckpointError("payload checksum mismatch")
    sections = {}
    for e in header["tensors"]:
        raw = payload[e["offset"]:e["offset"] + e["nbytes"]]
        arr = np.frombuffer(raw, dtype=np.dtype(e["dtype"])).reshape(e["shape"]).copy()
        sections.setdefault(e["section"], {})[e["name"]] = arr
    return header, sections


def load_checkpoint(path):
    from .trainer import TrainConfig, TrainState, make_optimizers

    header, sections = read_container(path)
    try:
        config = TrainConfig.from_dict(header["config"])
        modules = {}
        for name in ("generator", "discriminator", "classifier"):
            m = nets.build(header["descriptors"][name])
            m.load_state_dict({k: torch.from_numpy(v) for k, v in sections.get(name, {}).items()})
            modules[name] = m
        opts = make_optimizers(config, modules["generator"], modules["discriminator"], modules["classifier"])
        for name, opt in opts.items():
            sd = opt.state_dict()
            per_param = {}
            for key, arr in sections.get(f"optim/{name}", {}).items():
                idx, field = key.split(".", 1)
                per_param.setdefault(int(idx), {})[field] = torch.from_numpy(arr)
            groups = header["optimizer_groups"][name]
            for g, saved in zip(sd["param_groups"], groups):
                g.update({k: (tuple(v) if isinstance(v, list) else v) for k, v in saved.items()})
            sd["state"] = per_param
            opt.load_state_dict(sd)
    except (KeyError, RuntimeError, ValueError) as exc:
        raise CheckpointError(f"checkpoint content does not match its descriptors: {exc}") from exc
    state = TrainState(config, modules["generator"], modules["discriminator"], modules["classifier"], opts,
                       step=header["step"], epoch=header["epoch"],
                       history=[LossBreakdown(**h) for h in header["history"]])
    return state


def states_equal(a, b):
    """Bit-exact comparison of parameters, buffers, optimizer state and counters."""
    if (a.step, a.epoch) != (b.step, b.epoch):
        return False
    if [h.as_dict() for h in a.history] != [h.as_dict() for h in b.history]:
        return False
    sa, sb = _sections(a), _sections(b)
    if sa.keys() != sb.keys():
        return False
    for sec in sa:
        if sa[sec].keys() != sb[sec].keys():
            return False
        for k in sa[sec]:
            x, y = sa[sec][k], sb[sec][k]
            if x.dtype != y.dtype or x.shape != y.shape:
                return False
            if x.detach().contiguous().numpy().tobytes() != y.detach().contiguous().numpy().tobytes():
                return False
    return True
