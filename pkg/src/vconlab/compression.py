"""Compression transforms for dense layers and the blocks that apply them.

Four magnitude-pruning granularities (per-layer, global, N-of-M groups,
whole rows), sign binarization with a single Frobenius-derived scale, and
truncated-SVD factorization. Pruning and binarization keep a trainable
full-precision weight and push gradients through the transform with a
straight-through estimator; low-rank blocks train the two factors
directly.

Tie rule used everywhere: when magnitudes tie at the pruning threshold,
the smaller flat index is pruned first (global pruning orders by layer
index, then flat index). Masks are therefore a deterministic function of
the weights.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from .model import DenseBlock, apply_activation
from .tensor import ShapeError, Tensor, add_bias, matmul, ste_apply, transpose

Array = np.ndarray


# --------------------------------------------------------------------------
# Specs


@dataclass(frozen=True)
class PruneUnstructuredLayer:
    """Zero the smallest-|w| entries of each layer independently."""

    sparsity: float

    def __post_init__(self):
        _check_sparsity(self.sparsity)


@dataclass(frozen=True)
class PruneUnstructuredGlobal:
    """One magnitude threshold shared by every governed layer."""

    sparsity: float

    def __post_init__(self):
        _check_sparsity(self.sparsity)


@dataclass(frozen=True)
class PruneNM:
    """Keep ``keep`` entries in every group of ``group`` along the input axis."""

    keep: int
    group: int

    def __post_init__(self):
        if not (1 <= self.keep <= self.group):
            raise ValueError(f"N:M pruning needs 1 <= N <= M, got {self.keep}:{self.group}")


@dataclass(frozen=True)
class PruneStructured:
    """Zero whole rows (output units) with the smallest l2 norms."""

    sparsity: float

    def __post_init__(self):
        _check_sparsity(self.sparsity)


@dataclass(frozen=True)
class BinaryQuant:
    """Replace the weight by alpha * sign(w), alpha = ||W||_F / sqrt(n*m)."""


@dataclass(frozen=True)
class LowRank:
    """Replace the weight by a rank-r product A @ B from a truncated SVD."""

    rank: int

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError(f"rank must be >= 1, got {self.rank}")


CompressionSpec = Union[
    PruneUnstructuredLayer,
    PruneUnstructuredGlobal,
    PruneNM,
    PruneStructured,
    BinaryQuant,
    LowRank,
]

_PRUNING_SPECS = (PruneUnstructuredLayer, PruneUnstructuredGlobal, PruneNM, PruneStructured)


def _check_sparsity(s: float) -> None:
    if not (0.0 <= s < 1.0):
        raise ValueError(f"sparsity must be in [0, 1), got {s}")


_SPEC_KINDS = {
    PruneUnstructuredLayer: "prune_layer",
    PruneUnstructuredGlobal: "prune_global",
    PruneNM: "prune_nm",
    PruneStructured: "prune_structured",
    BinaryQuant: "binary",
    LowRank: "low_rank",
}


def spec_to_dict(spec: CompressionSpec | None) -> dict:
    if spec is None:
        return {"kind": "none"}
    d = {"kind": _SPEC_KINDS[type(spec)]}
    if isinstance(spec, (PruneUnstructuredLayer, PruneUnstructuredGlobal, PruneStructured)):
        d["sparsity"] = spec.sparsity
    elif isinstance(spec, PruneNM):
        d["keep"] = spec.keep
        d["group"] = spec.group
    elif isinstance(spec, LowRank):
        d["rank"] = spec.rank
    return d


def spec_from_dict(d: dict) -> CompressionSpec | None:
    kind = d.get("kind")
    if kind == "none":
        return None
    if kind == "prune_layer":
        return PruneUnstructuredLayer(float(d["sparsity"]))
    if kind == "prune_global":
        return PruneUnstructuredGlobal(float(d["sparsity"]))
    if kind == "prune_nm":
        return PruneNM(int(d["keep"]), int(d["group"]))
    if kind == "prune_structured":
        return PruneStructured(float(d["sparsity"]))
    if kind == "binary":
        return BinaryQuant()
    if kind == "low_rank":
        return LowRank(int(d["rank"]))
    raise ValueError(f"unknown compression kind {kind!r}")


# --------------------------------------------------------------------------
# Mask construction


def magnitude_scores(w: Array) -> Array:
    return np.abs(np.asarray(w, dtype=np.float64))


def prune_layerwise(w: Array, sparsity: float) -> Array:
    """0/1 mask zeroing the floor(sparsity * size) smallest |w| entries."""
    _check_sparsity(sparsity)
    w = np.asarray(w, dtype=np.float64)
    flat = magnitude_scores(w).ravel()
    drop = int(math.floor(sparsity * flat.size))
    mask = np.ones(flat.size)
    if drop:
        # stable sort keeps ties in flat-index order, so smaller indices go first
        mask[np.argsort(flat, kind="stable")[:drop]] = 0.0
    return mask.reshape(w.shape)


def prune_global(layers: Sequence[Array], sparsity: float) -> list[Array]:
    """Masks for several layers under one shared magnitude threshold.

    Total zeros = floor(sparsity * total size); ties resolved by
    (layer index, flat index), smallest pruned first. A single layer
    degenerates to prune_layerwise.
    """
    _check_sparsity(sparsity)
    if not layers:
        raise ValueError("prune_global needs at least one layer")
    arrs = [np.asarray(w, dtype=np.float64) for w in layers]
    flat = np.concatenate([magnitude_scores(a).ravel() for a in arrs])
    drop = int(math.floor(sparsity * flat.size))
    mask_flat = np.ones(flat.size)
    if drop:
        mask_flat[np.argsort(flat, kind="stable")[:drop]] = 0.0
    masks = []
    offset = 0
    for a in arrs:
        masks.append(mask_flat[offset : offset + a.size].reshape(a.shape))
        offset += a.size
    return masks


def prune_nm(w: Array, keep: int, group: int) -> Array:
    """N:M mask: ``keep`` largest-|w| entries survive per ``group`` columns.

    Groups run along the input (column) axis. A trailing group of width
    l < group keeps ceil(keep * l / group) entries.
    """
    if not (1 <= keep <= group):
        raise ValueError(f"N:M pruning needs 1 <= N <= M, got {keep}:{group}")
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 2:
        raise ShapeError(f"prune_nm expects a 2-D weight, got shape {w.shape}")
    n, m = w.shape
    scores = magnitude_scores(w)
    mask = np.zeros_like(w)
    rows = np.arange(n)[:, None]
    for start in range(0, m, group):
        stop = min(start + group, m)
        width = stop - start
        kept = keep if width == group else -(-keep * width // group)
        order = np.argsort(scores[:, start:stop], axis=1, kind="stable")
        mask[rows, start + order[:, width - kept :]] = 1.0
    return mask


def prune_structured(w: Array, sparsity: float) -> Array:
    """Mask zeroing the floor(sparsity * n_rows) rows with smallest l2 norm."""
    _check_sparsity(sparsity)
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 2:
        raise ShapeError(f"prune_structured expects a 2-D weight, got shape {w.shape}")
    norms = np.sqrt((w * w).sum(axis=1))
    drop = int(math.floor(sparsity * w.shape[0]))
    mask = np.ones_like(w)
    if drop:
        mask[np.argsort(norms, kind="stable")[:drop], :] = 0.0
    return mask


# --------------------------------------------------------------------------
# Binarization


@dataclass(frozen=True)
class ScaledSign:
    """Sign pattern plus one shared magnitude."""

    alpha: float
    signs: Array  # entries in {-1.0, +1.0}; sign(0) = +1


def binarize_scaled(w: Array) -> ScaledSign:
    w = np.asarray(w, dtype=np.float64)
    signs = np.where(w >= 0.0, 1.0, -1.0)
    alpha = float(np.linalg.norm(w) / math.sqrt(w.size))
    return ScaledSign(alpha=alpha, signs=signs)


# --------------------------------------------------------------------------
# Truncated SVD (one-sided Jacobi; no library decompositions)

SVD_TOL = 1e-12
SVD_MAX_SWEEPS = 100


@dataclass(frozen=True)
class SvdResult:
    u: Array  # (n, r), orthonormal columns
    singular_values: Array  # (r,), non-increasing, >= 0
    v: Array  # (m, r), orthonormal columns


def _one_sided_jacobi(a: Array) -> tuple[Array, Array, Array]:
    # Hestenes rotations on column pairs until all pairs are orthogonal.
    # Caller guarantees rows >= cols.
    u = a.astype(np.float64).copy()
    cols = u.shape[1]
    v = np.eye(cols)
    for _ in range(SVD_MAX_SWEEPS):
        rotated = False
        for i in range(cols - 1):
            for j in range(i + 1, cols):
                x = u[:, i]
                y = u[:, j]
                pp = float(x @ x)
                qq = float(y @ y)
                pq = float(x @ y)
                if abs(pq) <= SVD_TOL * math.sqrt(pp * qq):
                    continue
                rotated = True
                zeta = (qq - pp) / (2.0 * pq)
                t = math.copysign(1.0, zeta) / (abs(zeta) + math.hypot(1.0, zeta))
                c = 1.0 / math.hypot(1.0, t)
                s = c * t
                u[:, i], u[:, j] = c * x - s * y, s * x + c * y
                vi = v[:, i].copy()
                vj = v[:, j].copy()
                v[:, i] = c * vi - s * vj
                v[:, j] = s * vi + c * vj
        if not rotated:
            break
    sig = np.sqrt((u * u).sum(axis=0))
    order = np.argsort(-sig, kind="stable")
    sig = sig[order]
    u = u[:, order]
    v = v[:, order]
    nonzero = sig > 0.0
    u[:, nonzero] = u[:, nonzero] / sig[nonzero]
    return u, sig, v


def truncated_svd(w: Array, rank: int) -> SvdResult:
    """Best rank-r approximation factors of a 2-D matrix.

    Computed with one-sided Jacobi rotations (threshold 1e-12, at most 100
    sweeps); singular values come back sorted non-increasing.
    """
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 2:
        raise ShapeError(f"truncated_svd expects a 2-D matrix, got shape {w.shape}")
    n, m = w.shape
    if not (1 <= rank <= min(n, m)):
        raise ValueError(f"rank must be in [1, {min(n, m)}] for a {n}x{m} matrix, got {rank}")
    if n >= m:
        u, sig, v = _one_sided_jacobi(w)
    else:
        v, sig, u = _one_sided_jacobi(w.T)
    return SvdResult(
        u=u[:, :rank].copy(),
        singular_values=sig[:rank].copy(),
        v=v[:, :rank].copy(),
    )


# --------------------------------------------------------------------------
# Compressed blocks


class CompressedBlock:
    """A layer whose forward pass uses only its compressed representation.

    Pruning and binarization keep the trainable full-precision ``weight``
    and route gradients to it through the STE, so zeroed weights keep
    learning and can re-enter the mask at the next refresh. Low-rank
    blocks train the factors ``a`` (n, r) and ``b`` (r, m) directly, no STE.
    """

    def __init__(
        self,
        spec: CompressionSpec,
        bias: Tensor,
        activation: str,
        weight: Tensor | None = None,
        factors: tuple[Tensor, Tensor] | None = None,
    ):
        if isinstance(spec, LowRank):
            if factors is None or weight is not None:
                raise ValueError("low-rank blocks take factors, not a weight")
        else:
            if weight is None or factors is not None:
                raise ValueError(f"{type(spec).__name__} blocks take a weight, not factors")
        self.spec = spec
        self.bias = bias
        self.activation = activation
        self.weight = weight
        self.a, self.b = factors if factors is not None else (None, None)
        self.mask: Array | None = None
        self.alpha: float | None = None
        self.signs: Array | None = None

    @property
    def in_dim(self) -> int:
        return self.b.data.shape[1] if self.weight is None else self.weight.data.shape[1]

    @property
    def out_dim(self) -> int:
        return self.a.data.shape[0] if self.weight is None else self.weight.data.shape[0]

    def refresh(self) -> None:
        """Recompute derived state (mask / scale) from the current weight.

        Global pruning refreshed through this method sees only this block;
        use ``refresh_blocks`` to share the threshold across layers.
        """
        spec = self.spec
        if isinstance(spec, PruneUnstructuredLayer):
            self.mask = prune_layerwise(self.weight.data, spec.sparsity)
        elif isinstance(spec, PruneUnstructuredGlobal):
            self.mask = prune_global([self.weight.data], spec.sparsity)[0]
        elif isinstance(spec, PruneNM):
            self.mask = prune_nm(self.weight.data, spec.keep, spec.group)
        elif isinstance(spec, PruneStructured):
            self.mask = prune_structured(self.weight.data, spec.sparsity)
        elif isinstance(spec, BinaryQuant):
            ss = binarize_scaled(self.weight.data)
            self.alpha = ss.alpha
            self.signs = ss.signs

    def forward(self, x: Tensor) -> Tensor:
        spec = self.spec
        if isinstance(spec, LowRank):
            z = matmul(matmul(x, transpose(self.b)), transpose(self.a))
            return apply_activation(add_bias(z, self.bias), self.activation)
        if isinstance(spec, BinaryQuant):
            if self.alpha is None:
                raise RuntimeError("binary block used before refresh()")
            alpha = self.alpha
            w_eff = ste_apply(self.weight, lambda w: alpha * np.where(w >= 0.0, 1.0, -1.0))
        else:
            if self.mask is None:
                raise RuntimeError("pruned block used before refresh()")
            mask = self.mask
            w_eff = ste_apply(self.weight, lambda w: w * mask)
        z = add_bias(matmul(x, transpose(w_eff)), self.bias)
        return apply_activation(z, self.activation)

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        if self.weight is None:
            return [("a", self.a), ("b", self.b), ("bias", self.bias)]
        return [("weight", self.weight), ("bias", self.bias)]

    def trainable_parameters(self) -> list[tuple[str, Tensor]]:
        return self.named_parameters()

    def param_count(self) -> int:
        """Stored parameters after discarding what the transform drops.

        Pruning counts surviving mask entries, binarization keeps the full
        count (entries shrink to one bit, see bit_footprint), low rank
        counts both factors. Biases are never compressed and always count.
        """
        bias = self.bias.data.size
        if isinstance(self.spec, LowRank):
            return self.a.data.size + self.b.data.size + bias
        if isinstance(self.spec, BinaryQuant):
            return self.weight.data.size + bias
        if self.mask is not None:
            return int(self.mask.sum()) + bias
        return spec_param_count(self.spec, self.out_dim, self.in_dim) + bias


def compress_block(block: DenseBlock, spec: CompressionSpec) -> CompressedBlock:
    """Build a compressed twin of a dense block (the block is left alone)."""
    if isinstance(spec, LowRank):
        return factorize_layer(block, spec.rank)
    out = CompressedBlock(
        spec=spec,
        bias=Tensor(block.bias.data.copy(), requires_grad=True),
        activation=block.activation,
        weight=Tensor(block.weight.data.copy(), requires_grad=True),
    )
    out.refresh()
    return out


def factorize_layer(block: DenseBlock, rank: int) -> CompressedBlock:
    """Split a dense layer into factors A = U, B = diag(s) V^T.

    The rank is clamped to min(n, m) when the layer is too skinny; a
    warning also fires when r(n+m) >= nm, where the factors store no
    fewer values than the dense weight.
    """
    if rank < 1:
        raise ValueError(f"rank must be >= 1, got {rank}")
    n, m = block.weight.data.shape
    r = min(rank, n, m)
    if r < rank:
        warnings.warn(f"rank {rank} clamped to {r} for a {n}x{m} layer", stacklevel=2)
    if r * (n + m) >= n * m:
        warnings.warn(
            f"rank {r} on a {n}x{m} layer stores {r * (n + m)} values vs {n * m} dense;"
            " no size benefit",
            stacklevel=2,
        )
    res = truncated_svd(block.weight.data, r)
    a = res.u
    b = res.singular_values[:, None] * res.v.T
    return CompressedBlock(
        spec=LowRank(r),
        bias=Tensor(block.bias.data.copy(), requires_grad=True),
        activation=block.activation,
        factors=(Tensor(a, requires_grad=True), Tensor(b, requires_grad=True)),
    )


def refresh_blocks(blocks: Sequence[CompressedBlock], refresh_masks: bool = True) -> None:
    """Refresh derived state; blocks under global pruning share a threshold.

    ``refresh_masks=False`` freezes pruning masks (binary scales still
    track the weights).
    """
    global_groups: dict[PruneUnstructuredGlobal, list[CompressedBlock]] = {}
    for blk in blocks:
        if isinstance(blk.spec, PruneUnstructuredGlobal):
            if refresh_masks:
                global_groups.setdefault(blk.spec, []).append(blk)
        elif isinstance(blk.spec, _PRUNING_SPECS):
            if refresh_masks:
                blk.refresh()
        else:
            blk.refresh()
    for spec, group in global_groups.items():
        masks = prune_global([blk.weight.data for blk in group], spec.sparsity)
        for blk, mask in zip(group, masks):
            blk.mask = mask


def compress_network(net, spec: CompressionSpec):
    """Compress every block of a dense network with one shared spec."""
    from .model import Network  # local import keeps module load order simple

    blocks = [compress_block(b, spec) for b in net.blocks]
    refresh_blocks(blocks)
    return Network(blocks, name=net.name)


# --------------------------------------------------------------------------
# Size accounting


def spec_param_count(spec: CompressionSpec | None, n: int, m: int) -> int:
    """Stored weight-entry count for an n x m layer under a spec.

    Bias entries are not included here; block/network counts add them.
    """
    size = n * m
    if spec is None:
        return size
    if isinstance(spec, (PruneUnstructuredLayer, PruneUnstructuredGlobal)):
        return size - int(math.floor(spec.sparsity * size))
    if isinstance(spec, PruneStructured):
        return (n - int(math.floor(spec.sparsity * n))) * m
    if isinstance(spec, PruneNM):
        full, rem = divmod(m, spec.group)
        per_row = full * spec.keep
        if rem:
            per_row += -(-spec.keep * rem // spec.group)
        return n * per_row
    if isinstance(spec, BinaryQuant):
        return size
    if isinstance(spec, LowRank):
        return min(spec.rank, n, m) * (n + m)
    raise TypeError(f"unknown spec {spec!r}")


def bit_footprint(spec: CompressionSpec | None, n: int, m: int) -> int:
    """Bits needed for the weight payload: 64 per stored float, except
    binarization, which stores one bit per entry plus 64 for alpha."""
    if isinstance(spec, BinaryQuant):
        return n * m + 64
    return 64 * spec_param_count(spec, n, m)
