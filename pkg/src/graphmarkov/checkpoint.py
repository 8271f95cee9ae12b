"""Textual model checkpoints.

A checkpoint is a plain-text file: a short header of key=value lines (model
kind, sensor count, history depth, damping factor, producer) followed by one
labelled CSV block per learned tensor. Floats are written with 17 significant
digits, which round-trips IEEE double exactly, so save -> load -> save is
byte-identical. Only learned values are stored; graph-derived structure (hop
masks, the spectral basis) is rebuilt from the adjacency at load time.
"""

import numpy as np

from . import __version__
from .graph import Graph, hop_masks, normalized_laplacian, spectral_basis
from .models import GmnParams, SgmnParams, model_kind

MAGIC = "graphmarkov-model v1"


def _fmt(v: float) -> str:
    return "%.17g" % float(v)


def save_params(path, params) -> None:
    """Write params as a textual checkpoint.

    The header carries no timestamps or host details, so two runs that learn
    identical weights produce byte-identical files.
    """
    kind = model_kind(params)
    lines = [
        MAGIC,
        f"kind={kind}",
        f"size={params.size}",
        f"history={params.n}",
        f"gamma={_fmt(params.gamma)}",
        f"producer=graphmarkov {__version__}",
    ]
    for k, tensor in enumerate(params.tensors, start=1):
        label = "hop_weights" if kind == "gmn" else "frequency_gains"
        lines.append(f"[{label} {k}]")
        block = np.atleast_2d(tensor)
        for row in block:
            lines.append(",".join(_fmt(v) for v in row))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def load_params(path, graph: Graph):
    """Read a checkpoint back, rebuilding derived structure from the graph.

    Raises:
        ValueError: unrecognized format, malformed blocks, or a graph whose
            size disagrees with the checkpoint.
    """
    with open(path) as fh:
        lines = [line.rstrip("\n") for line in fh]
    if not lines or lines[0] != MAGIC:
        raise ValueError(f"{path} is not a recognized model checkpoint")

    header = {}
    cursor = 1
    while cursor < len(lines) and not lines[cursor].startswith("["):
        if "=" in lines[cursor]:
            key, _, value = lines[cursor].partition("=")
            header[key] = value
        cursor += 1

    try:
        kind = header["kind"]
        size = int(header["size"])
        history = int(header["history"])
        gamma = float(header["gamma"])
    except (KeyError, ValueError) as exc:
        raise ValueError(f"checkpoint {path} has a malformed header: {exc}") from None
    if kind not in ("gmn", "sgmn"):
        raise ValueError(f"checkpoint {path} has unknown model kind {kind!r}")
    if graph.size != size:
        raise ValueError(
            f"checkpoint {path} was trained on {size} sensors but the graph has {graph.size}"
        )

    blocks = _read_blocks(lines, cursor, path)
    expected_label = "hop_weights" if kind == "gmn" else "frequency_gains"
    if len(blocks) != history:
        raise ValueError(
            f"checkpoint {path} declares history {history} but holds {len(blocks)} blocks"
        )
    tensors = []
    for k, (label, index, rows) in enumerate(blocks, start=1):
        if label != expected_label or index != k:
            raise ValueError(f"checkpoint {path}: expected block [{expected_label} {k}]")
        arr = np.array(rows)
        if kind == "gmn":
            if arr.shape != (size, size):
                raise ValueError(f"checkpoint {path}: block {k} is {arr.shape}, want {size}x{size}")
            tensors.append(arr)
        else:
            if arr.shape != (1, size):
                raise ValueError(f"checkpoint {path}: block {k} is {arr.shape}, want 1x{size}")
            tensors.append(arr[0])

    if kind == "gmn":
        return GmnParams(weights=tuple(tensors), masks=hop_masks(graph, history), gamma=gamma)
    basis = spectral_basis(normalized_laplacian(graph))
    return SgmnParams(gains=tuple(tensors), basis=basis, gamma=gamma)


def _read_blocks(lines, start, path):
    blocks = []
    current = None
    for line in lines[start:]:
        if not line.strip():
            continue
        if line.startswith("[") and line.endswith("]"):
            parts = line[1:-1].split()
            if len(parts) != 2 or not parts[1].isdigit():
                raise ValueError(f"checkpoint {path}: bad block marker {line!r}")
            current = (parts[0], int(parts[1]), [])
            blocks.append(current)
            continue
        if current is None:
            raise ValueError(f"checkpoint {path}: data outside any block")
        try:
            current[2].append([float(cell) for cell in line.split(",")])
        except ValueError:
            raise ValueError(f"checkpoint {path}: unparseable row {line!r}") from None
    return blocks
