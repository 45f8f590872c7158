"""Self-describing text serialization for soft-Q networks.

Values are written with 17 significant digits, which round-trips IEEE
doubles exactly, so save -> load -> save is byte-identical.
"""
from __future__ import annotations

import numpy as np

from .nets import Mlp
from .softq import SoftQNet

FORMAT_NAME = "threatprobe-model"
FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    pass


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def dump_model(net: SoftQNet, metadata: dict[str, str]) -> str:
    lines = [f"{FORMAT_NAME} {FORMAT_VERSION}"]
    meta = dict(metadata)
    meta["sigma"] = _fmt(net.sigma)
    for key in sorted(meta):
        value = str(meta[key])
        if "\n" in value:
            raise ModelFormatError(f"metadata value for {key!r} contains a newline")
        lines.append(f"meta {key} {value}")
    lines.append("layers " + " ".join(str(s) for s in net.mlp.layer_sizes))
    for i, (w, b) in enumerate(zip(net.mlp.weights, net.mlp.biases)):
        lines.append(f"array W{i} {w.shape[0]} {w.shape[1]}")
        for row in w:
            lines.append(" ".join(_fmt(v) for v in row))
        lines.append(f"array b{i} {b.shape[0]}")
        lines.append(" ".join(_fmt(v) for v in b))
    lines.append("end")
    return "\n".join(lines) + "\n"


def save_model(path, net: SoftQNet, metadata: dict[str, str]) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(dump_model(net, metadata))


def parse_model(text: str) -> tuple[SoftQNet, dict[str, str]]:
    lines = text.splitlines()
    if not lines or lines[0].split() != [FORMAT_NAME, str(FORMAT_VERSION)]:
        raise ModelFormatError("not a recognizable model file")
    meta: dict[str, str] = {}
    pos = 1
    while pos < len(lines) and lines[pos].startswith("meta "):
        _, key, value = lines[pos].split(" ", 2)
        meta[key] = value
        pos += 1
    if pos >= len(lines) or not lines[pos].startswith("layers "):
        raise ModelFormatError("missing layers line")
    sizes = [int(s) for s in lines[pos].split()[1:]]
    if len(sizes) < 2:
        raise ModelFormatError("layers line needs at least input and output sizes")
    pos += 1

    weights, biases = [], []
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        header = f"array W{i} {fan_in} {fan_out}"
        if pos >= len(lines) or lines[pos] != header:
            raise ModelFormatError(f"expected {header!r}")
        pos += 1
        rows = []
        for _ in range(fan_in):
            rows.append(np.array(lines[pos].split(), dtype=float))
            if rows[-1].size != fan_out:
                raise ModelFormatError(f"bad row length in W{i}")
            pos += 1
        weights.append(np.vstack(rows))
        header = f"array b{i} {fan_out}"
        if pos >= len(lines) or lines[pos] != header:
            raise ModelFormatError(f"expected {header!r}")
        pos += 1
        bias = np.array(lines[pos].split(), dtype=float)
        if bias.size != fan_out:
            raise ModelFormatError(f"bad length in b{i}")
        biases.append(bias)
        pos += 1
    if pos >= len(lines) or lines[pos] != "end":
        raise ModelFormatError("missing end marker")
    if "sigma" not in meta:
        raise ModelFormatError("missing sigma metadata")
    net = SoftQNet(mlp=Mlp(weights=weights, biases=biases), sigma=float(meta["sigma"]))
    return net, meta


def load_model(path) -> tuple[SoftQNet, dict[str, str]]:
    with open(path, "r", encoding="ascii") as fh:
        return parse_model(fh.read())
