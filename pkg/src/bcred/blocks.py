"""Block decompositions of the coordinate space.

A partition splits ``{0, ..., n-1}`` into ``b`` disjoint index sets.  The
injection ``U_i`` places a block vector back into ``R^n`` and its transpose
``U_i^T`` extracts the block, so that ``sum_i U_i U_i^T = I``.
"""

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from ._validation import check_vector
from .exceptions import DimensionMismatchError, InvalidBlockCountError

__all__ = [
    "BlockPartition",
    "make_partition",
    "contiguous_partition",
    "tile_partition",
    "extract_block",
    "inject_block",
]


@dataclass(frozen=True)
class BlockPartition:
    """Immutable set of disjoint, covering coordinate blocks.

    Attributes
    ----------
    n : int
        Total dimension.
    blocks : tuple of ndarray
        Sorted, read-only int64 index arrays, one per block.
    kind : str
        ``"contiguous-1d"`` or ``"tile-2d"``.
    grid : tuple or None
        ``(H, W, tile_h, tile_w)`` for tile partitions.
    tiles : tuple or None
        Per-block ``(row_start, row_stop, col_start, col_stop)`` for tile
        partitions.
    """

    n: int
    blocks: Tuple[np.ndarray, ...]
    kind: str
    grid: Optional[Tuple[int, int, int, int]] = None
    tiles: Optional[Tuple[Tuple[int, int, int, int], ...]] = field(
        default=None, repr=False)

    def __post_init__(self):
        for idx in self.blocks:
            idx.setflags(write=False)

    @property
    def n_blocks(self):
        return len(self.blocks)

    @property
    def sizes(self):
        return tuple(int(idx.size) for idx in self.blocks)

    def __len__(self):
        return len(self.blocks)

    def check_index(self, i):
        if not 0 <= i < len(self.blocks):
            raise IndexError(
                f"block index {i} out of range for {len(self.blocks)} blocks")
        return int(i)

    def validate(self):
        """Raise ``ValueError`` unless blocks are disjoint and cover ``0..n-1``."""
        if len(self.blocks) < 1:
            raise ValueError("partition has no blocks")
        allidx = np.concatenate(self.blocks)
        if allidx.size != self.n:
            raise ValueError(
                f"blocks hold {allidx.size} indices, expected {self.n}")
        if not np.array_equal(np.sort(allidx), np.arange(self.n)):
            raise ValueError("blocks are not a disjoint cover of 0..n-1")
        return self


def contiguous_partition(n, n_blocks):
    """Split ``0..n-1`` into ``n_blocks`` runs, larger runs first."""
    n = int(n)
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    b = int(n_blocks)
    if b < 1 or b > n:
        raise InvalidBlockCountError(
            f"number of blocks must lie in [1, {n}], got {b}")
    base, extra = divmod(n, b)
    blocks = []
    start = 0
    for i in range(b):
        size = base + (1 if i < extra else 0)
        blocks.append(np.arange(start, start + size, dtype=np.int64))
        start += size
    return BlockPartition(n=n, blocks=tuple(blocks), kind="contiguous-1d")


def tile_partition(height, width, tile_h, tile_w):
    """Cut a row-major ``height x width`` image into rectangular tiles.

    Tiles are listed in row-major tile order; tiles on the bottom and right
    edges are smaller when the image size is not a multiple of the tile size.
    """
    H, W, th, tw = int(height), int(width), int(tile_h), int(tile_w)
    if H < 1 or W < 1:
        raise ValueError(f"image shape must be positive, got {(H, W)}")
    if not (1 <= th <= H and 1 <= tw <= W):
        raise InvalidBlockCountError(
            f"tile size {(th, tw)} must lie within image shape {(H, W)}")
    pix = np.arange(H * W, dtype=np.int64).reshape(H, W)
    blocks, tiles = [], []
    for r0 in range(0, H, th):
        r1 = min(r0 + th, H)
        for c0 in range(0, W, tw):
            c1 = min(c0 + tw, W)
            blocks.append(np.ascontiguousarray(pix[r0:r1, c0:c1]).reshape(-1))
            tiles.append((r0, r1, c0, c1))
    return BlockPartition(n=H * W, blocks=tuple(blocks), kind="tile-2d",
                          grid=(H, W, th, tw), tiles=tuple(tiles))


def make_partition(n, spec):
    """Build a partition of ``R^n`` from a spec mapping.

    ``spec`` is either ``{"kind": "contiguous-1d", "blocks": b}`` or
    ``{"kind": "tile-2d", "height": H, "width": W, "tile_h": th,
    "tile_w": tw}``.  An integer ``spec`` is shorthand for a contiguous
    partition with that many blocks.

    >>> [list(b) for b in make_partition(5, 3).blocks]
    [[0, 1], [2, 3], [4]]
    """
    if isinstance(spec, (int, np.integer)):
        spec = {"kind": "contiguous-1d", "blocks": int(spec)}
    kind = spec.get("kind", "contiguous-1d")
    if kind == "contiguous-1d":
        return contiguous_partition(n, spec.get("blocks", 1))
    if kind == "tile-2d":
        H, W = int(spec["height"]), int(spec["width"])
        if H * W != int(n):
            raise DimensionMismatchError(
                f"tile grid {H}x{W} has {H * W} pixels, expected n={n}")
        return tile_partition(H, W, spec["tile_h"], spec["tile_w"])
    raise ValueError(f"unknown partition kind {kind!r}")


def extract_block(x, partition, i):
    """Return ``U_i^T x``: the coordinates of ``x`` in block ``i``."""
    i = partition.check_index(i)
    x = check_vector(x, partition.n)
    return x[partition.blocks[i]]


def inject_block(h, partition, i):
    """Return ``U_i h``: ``h`` placed at block ``i`` of a zero n-vector."""
    i = partition.check_index(i)
    idx = partition.blocks[i]
    h = check_vector(h, name="h")
    if h.shape[0] != idx.size:
        raise DimensionMismatchError(
            f"block {i} has {idx.size} entries, got vector of length {h.shape[0]}")
    out = np.zeros(partition.n)
    out[idx] = h
    return out
