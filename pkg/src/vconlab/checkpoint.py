"""Flat binary network files: one JSON header line, then raw float64 data.

Layout (documented in the README and kept stable):

    magic   b"VCNET1\\n"
    header  one UTF-8 JSON line ending in "\\n"
    payload concatenated arrays, little-endian float64, row-major

Per-block payload order -- dense: weight, bias. Compressed: pruning
stores weight, bias, then the mask as packed bit rows (each row padded to
a byte); binary stores weight, bias, alpha (one float64), sign bits;
low-rank stores a, b, bias. A blended block stores its original's payload
followed by its branch's. The header carries layer sizes, activation
tags, specs, and the shared scheduler state (q, t) when present.
"""

from __future__ import annotations

import json
from typing import BinaryIO

import numpy as np

from .compression import (
    BinaryQuant,
    CompressedBlock,
    LowRank,
    spec_from_dict,
    spec_to_dict,
)
from .model import ACTIVATIONS, DenseBlock, Network
from .tensor import Tensor
from .vcon import BetaScheduler, VconBlock

MAGIC = b"VCNET1\n"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    """Unreadable or inconsistent network file."""


def _pack_bits(rows: np.ndarray) -> bytes:
    # one padded bit-row per matrix row keeps rows byte-aligned
    return np.packbits(rows.astype(np.uint8), axis=1).tobytes()


def _bit_row_bytes(n: int, m: int) -> int:
    return n * ((m + 7) // 8)


class _Reader:
    def __init__(self, blob: bytes, offset: int, path=""):
        self.blob = blob
        self.pos = offset
        self.path = path

    def take(self, count: int, what: str) -> bytes:
        end = self.pos + count
        if end > len(self.blob):
            raise CheckpointError(
                f"{self.path}: truncated payload: needed {count} bytes for {what} at byte "
                f"offset {self.pos}, file ends at {len(self.blob)}"
            )
        chunk = self.blob[self.pos : end]
        self.pos = end
        return chunk

    def floats(self, shape: tuple[int, ...], what: str) -> np.ndarray:
        count = int(np.prod(shape)) if shape else 1
        raw = self.take(8 * count, what)
        return np.frombuffer(raw, dtype="<f8").reshape(shape).copy()

    def bits(self, n: int, m: int, what: str) -> np.ndarray:
        raw = self.take(_bit_row_bytes(n, m), what)
        bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8).reshape(n, -1), axis=1)
        return bits[:, :m].astype(np.float64)


def _block_header(block) -> dict:
    if isinstance(block, DenseBlock):
        return {
            "kind": "dense",
            "out_dim": block.out_dim,
            "in_dim": block.in_dim,
            "activation": block.activation,
        }
    if isinstance(block, CompressedBlock):
        return {
            "kind": "compressed",
            "out_dim": block.out_dim,
            "in_dim": block.in_dim,
            "activation": block.activation,
            "spec": spec_to_dict(block.spec),
        }
    if isinstance(block, VconBlock):
        return {
            "kind": "vcon",
            "out_dim": block.out_dim,
            "in_dim": block.in_dim,
            "activation": block.original.activation,
            "spec": spec_to_dict(block.branch.spec),
        }
    raise TypeError(f"cannot serialize block of type {type(block).__name__}")


def _write_dense(fh: BinaryIO, block: DenseBlock) -> None:
    fh.write(block.weight.data.astype("<f8").tobytes())
    fh.write(block.bias.data.astype("<f8").tobytes())


def _write_compressed(fh: BinaryIO, block: CompressedBlock) -> None:
    if isinstance(block.spec, LowRank):
        fh.write(block.a.data.astype("<f8").tobytes())
        fh.write(block.b.data.astype("<f8").tobytes())
        fh.write(block.bias.data.astype("<f8").tobytes())
        return
    fh.write(block.weight.data.astype("<f8").tobytes())
    fh.write(block.bias.data.astype("<f8").tobytes())
    if isinstance(block.spec, BinaryQuant):
        if block.alpha is None or block.signs is None:
            raise CheckpointError("binary block has no derived state; call refresh() first")
        fh.write(np.float64(block.alpha).astype("<f8").tobytes())
        fh.write(_pack_bits(block.signs > 0.0))
    else:
        if block.mask is None:
            raise CheckpointError("pruned block has no mask; call refresh() first")
        fh.write(_pack_bits(block.mask))


def save_network(net: Network, path, scheduler: BetaScheduler | None = None) -> None:
    """Write the network (and optional scheduler state) to one flat file."""
    if scheduler is None:
        found = [b.scheduler for b in net.blocks if isinstance(b, VconBlock)]
        scheduler = found[0] if found else None
    header = {
        "format": FORMAT_VERSION,
        "name": net.name,
        "blocks": [_block_header(b) for b in net.blocks],
        "scheduler": None if scheduler is None else {"q": scheduler.q, "t": scheduler.t},
    }
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(json.dumps(header).encode("utf-8"))
        fh.write(b"\n")
        for block in net.blocks:
            if isinstance(block, DenseBlock):
                _write_dense(fh, block)
            elif isinstance(block, CompressedBlock):
                _write_compressed(fh, block)
            else:
                _write_dense(fh, block.original)
                _write_compressed(fh, block.branch)


def _read_dense(r: _Reader, hdr: dict, label: str) -> DenseBlock:
    n, m = hdr["out_dim"], hdr["in_dim"]
    weight = Tensor(r.floats((n, m), f"{label} weight"), requires_grad=True)
    bias = Tensor(r.floats((n,), f"{label} bias"), requires_grad=True)
    return DenseBlock(weight, bias, hdr["activation"])


def _read_compressed(r: _Reader, hdr: dict, label: str) -> CompressedBlock:
    n, m = hdr["out_dim"], hdr["in_dim"]
    spec = spec_from_dict(hdr["spec"])
    if spec is None:
        raise CheckpointError(f"{label}: compressed block with spec 'none'")
    if isinstance(spec, LowRank):
        a = Tensor(r.floats((n, spec.rank), f"{label} factor a"), requires_grad=True)
        b = Tensor(r.floats((spec.rank, m), f"{label} factor b"), requires_grad=True)
        bias = Tensor(r.floats((n,), f"{label} bias"), requires_grad=True)
        return CompressedBlock(spec, bias, hdr["activation"], factors=(a, b))
    weight = Tensor(r.floats((n, m), f"{label} weight"), requires_grad=True)
    bias = Tensor(r.floats((n,), f"{label} bias"), requires_grad=True)
    block = CompressedBlock(spec, bias, hdr["activation"], weight=weight)
    if isinstance(spec, BinaryQuant):
        block.alpha = float(r.floats((), f"{label} alpha"))
        block.signs = r.bits(n, m, f"{label} signs") * 2.0 - 1.0
    else:
        block.mask = r.bits(n, m, f"{label} mask")
    return block


def load_network(path) -> tuple[Network, BetaScheduler | None]:
    """Read a network file back; values round-trip bit-exactly."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(MAGIC):
        raise CheckpointError(f"{path}: bad magic at byte offset 0, not a network file")
    newline = blob.find(b"\n", len(MAGIC))
    if newline < 0:
        raise CheckpointError(f"{path}: unterminated header starting at byte offset {len(MAGIC)}")
    try:
        header = json.loads(blob[len(MAGIC) : newline].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: unreadable header at byte offset {len(MAGIC)}: {exc}") from None
    if header.get("format") != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format {header.get('format')!r}")
    sched_hdr = header.get("scheduler")
    scheduler = None if sched_hdr is None else BetaScheduler(q=int(sched_hdr["q"]), t=int(sched_hdr["t"]))
    r = _Reader(blob, newline + 1, path=str(path))
    blocks = []
    try:
        for i, hdr in enumerate(header["blocks"]):
            kind = hdr.get("kind")
            label = f"block {i}"
            if kind == "dense":
                blocks.append(_read_dense(r, hdr, label))
            elif kind == "compressed":
                blocks.append(_read_compressed(r, hdr, label))
            elif kind == "vcon":
                original = _read_dense(r, hdr, f"{label} original")
                branch = _read_compressed(r, hdr, f"{label} branch")
                if scheduler is None:
                    raise CheckpointError(f"{path}: blended block without scheduler state")
                blocks.append(VconBlock(original, branch, scheduler))
            else:
                raise CheckpointError(f"{path}: unknown block kind {kind!r}")
            if hdr.get("activation") not in ACTIVATIONS:
                raise CheckpointError(f"{path}: {label} has unknown activation {hdr.get('activation')!r}")
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, CheckpointError):
            raise
        raise CheckpointError(f"{path}: malformed header near byte offset {r.pos}: {exc}") from None
    if r.pos != len(blob):
        raise CheckpointError(
            f"{path}: {len(blob) - r.pos} unexpected trailing bytes at byte offset {r.pos}"
        )
    return Network(blocks, name=header.get("name", "net")), scheduler
