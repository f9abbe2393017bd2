"""Scheduled blending of a dense block with its compressed twin.

Instead of compressing in one shot, each wrapped block computes
beta * original(x) + (1 - beta) * compressed(x) while beta walks linearly
from 1 to 0 over q optimizer steps. Once beta reaches 0 the original
branch is never evaluated again, and ``finalize`` strips it out, leaving a
structurally ordinary compressed network.
"""

from __future__ import annotations

from dataclasses import dataclass

from .compression import CompressedBlock, CompressionSpec, compress_block, refresh_blocks
from .model import DenseBlock, Network, ShapeError
from .tensor import Tensor, add, scale


def beta_at(t: int, q: int) -> float:
    """Blend weight after t scheduler steps: max(1 - t/q, 0); q=0 gives 0."""
    if t < 0 or q < 0:
        raise ValueError(f"t and q must be non-negative, got t={t}, q={q}")
    if q == 0:
        return 0.0
    return max(1.0 - t / q, 0.0)


@dataclass
class BetaScheduler:
    """Counts optimizer steps; shared by every wrapped block of a network."""

    q: int
    t: int = 0

    def __post_init__(self):
        if self.q < 0 or self.t < 0:
            raise ValueError(f"q and t must be non-negative, got q={self.q}, t={self.t}")

    def beta(self) -> float:
        return beta_at(self.t, self.q)

    def step(self) -> None:
        self.t += 1

    @property
    def phase(self) -> str:
        return "transition" if self.t < self.q else "converged"


class VconBlock:
    """A dense block and its compressed branch evaluated in parallel.

    While beta > 0 both branches run and the outputs are blended; their
    parameters see gradients scaled by beta and (1 - beta) respectively.
    At beta == 0 only the branch runs, so the original costs nothing.
    """

    def __init__(
        self,
        original: DenseBlock,
        branch: CompressedBlock,
        scheduler: BetaScheduler,
        train_original: bool = True,
    ):
        if (original.in_dim, original.out_dim) != (branch.in_dim, branch.out_dim):
            raise ShapeError(
                f"branch dims ({branch.out_dim}, {branch.in_dim}) do not match "
                f"original ({original.out_dim}, {original.in_dim})"
            )
        self.original = original
        self.branch = branch
        self.scheduler = scheduler
        self.train_original = train_original

    @property
    def in_dim(self) -> int:
        return self.original.in_dim

    @property
    def out_dim(self) -> int:
        return self.original.out_dim

    def forward(self, x: Tensor) -> Tensor:
        beta = self.scheduler.beta()
        if beta == 0.0:
            return self.branch.forward(x)
        return add(scale(self.original.forward(x), beta), scale(self.branch.forward(x), 1.0 - beta))

    def forward_compressed(self, x: Tensor) -> Tensor:
        """Branch-only evaluation regardless of the current beta."""
        return self.branch.forward(x)

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        out = [(f"original.{n}", p) for n, p in self.original.named_parameters()]
        out.extend((f"branch.{n}", p) for n, p in self.branch.named_parameters())
        return out

    def trainable_parameters(self) -> list[tuple[str, Tensor]]:
        out = []
        if self.train_original:
            out.extend((f"original.{n}", p) for n, p in self.original.trainable_parameters())
        out.extend((f"branch.{n}", p) for n, p in self.branch.trainable_parameters())
        return out

    def param_count(self) -> int:
        # both branches are stored while the transition is live
        return self.original.param_count() + self.branch.param_count()


def wrap_block(
    block: DenseBlock,
    spec: CompressionSpec,
    scheduler: BetaScheduler,
    train_original: bool = True,
) -> VconBlock:
    """Pair a dense block with a freshly compressed copy of itself.

    The branch starts from the block's current parameters (deep copy);
    the block itself is not modified.
    """
    return VconBlock(block, compress_block(block, spec), scheduler, train_original)


def wrap_network(
    net: Network,
    spec: CompressionSpec,
    scheduler: BetaScheduler,
    train_original: bool = True,
) -> Network:
    """Wrap every dense block of a network with a shared scheduler."""
    blocks = [wrap_block(b, spec, scheduler, train_original) for b in net.blocks]
    refresh_blocks([b.branch for b in blocks])
    return Network(blocks, name=net.name)


def schedulers_of(net: Network) -> list[BetaScheduler]:
    """Distinct scheduler objects across the network's wrapped blocks."""
    out: list[BetaScheduler] = []
    for block in net.blocks:
        if isinstance(block, VconBlock) and not any(block.scheduler is s for s in out):
            out.append(block.scheduler)
    return out


def finalize(net: Network) -> Network:
    """Strip original branches, keeping only the compressed blocks.

    Allowed only once every wrapped block's scheduler has run its course
    (t >= q); finalizing mid-transition would silently change the model.
    """
    for i, block in enumerate(net.blocks):
        if isinstance(block, VconBlock) and block.scheduler.t < block.scheduler.q:
            raise ValueError(
                f"cannot finalize: block {i} is mid-transition "
                f"(t={block.scheduler.t} < q={block.scheduler.q})"
            )
    blocks = [b.branch if isinstance(b, VconBlock) else b for b in net.blocks]
    return Network(blocks, name=net.name)
