"""Linear forward models and the least-squares data-fidelity.

Every model maps a real n-vector to a real m-vector.  Complex Fourier
measurements are realified by stacking real and imaginary parts, under the
unitary DFT normalization.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from ._validation import check_vector
from .blocks import BlockPartition, inject_block
from .exceptions import DimensionMismatchError

__all__ = [
    "ForwardModel",
    "DenseModel",
    "FourierModel",
    "LipschitzInfo",
    "build_forward_model",
    "gaussian_matrix",
    "radial_mask",
    "random_mask",
    "apply",
    "adjoint",
    "apply_block_columns",
    "lsq_block_gradient",
    "data_fidelity",
    "data_gradient",
    "power_iteration",
    "estimate_lipschitz",
]

LIPSCHITZ_SAFETY = 1.0 + 1e-6


class ForwardModel:
    """Base class for linear operators ``A : R^n -> R^m``."""

    kind = "abstract"
    m: int
    n: int

    def apply(self, x):
        raise NotImplementedError

    def adjoint(self, u):
        raise NotImplementedError

    def apply_block_columns(self, partition, i, h):
        """``A_i h``; the default goes through the full operator."""
        return self.apply(inject_block(h, partition, i))

    def block_adjoint(self, partition, i, r):
        """``A_i^T r``; the default goes through the full adjoint."""
        i = partition.check_index(i)
        return self.adjoint(r)[partition.blocks[i]]

    def column_blocks(self, partition):
        """Per-block operator pairs ``(A_i, A_i^T)`` used by the solvers."""
        _check_partition(self, partition)
        ops = []
        for i in range(partition.n_blocks):
            ops.append((
                lambda h, i=i: self.apply_block_columns(partition, i, h),
                lambda r, i=i: self.block_adjoint(partition, i, r),
            ))
        return ops

    def to_dense(self):
        """Materialize the operator as an ``(m, n)`` matrix."""
        eye = np.eye(self.n)
        return np.column_stack([self.apply(eye[:, j]) for j in range(self.n)])


class DenseModel(ForwardModel):
    """Operator stored as an explicit row-major matrix.

    Parameters
    ----------
    matrix : array-like of shape (m, n)
    kind : str
        Provenance label: ``"dense"``, ``"gaussian-random"`` or
        ``"matrix-file"``.
    """

    def __init__(self, matrix, kind="dense"):
        A = np.array(matrix, dtype=np.float64, order="C", copy=True)
        if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
            raise DimensionMismatchError(
                f"matrix must be 2-D and non-empty, got shape {A.shape}")
        A.setflags(write=False)
        self.matrix = A
        self.m, self.n = A.shape
        self.kind = kind

    def __repr__(self):
        return f"DenseModel(kind={self.kind!r}, m={self.m}, n={self.n})"

    def apply(self, x):
        return self.matrix @ check_vector(x, self.n)

    def adjoint(self, u):
        return self.matrix.T @ check_vector(u, self.m, name="u")

    def columns(self, idx):
        """``A_i``: a view when ``idx`` is a consecutive run, else a copy."""
        idx = np.asarray(idx)
        if idx.size and idx[-1] - idx[0] + 1 == idx.size and np.all(np.diff(idx) == 1):
            return self.matrix[:, int(idx[0]):int(idx[-1]) + 1]
        return np.ascontiguousarray(self.matrix[:, idx])

    # Column access touches only the n_i columns of block i.
    def apply_block_columns(self, partition, i, h):
        _check_partition(self, partition)
        i = partition.check_index(i)
        idx = partition.blocks[i]
        h = check_vector(h, idx.size, name="h")
        return self.columns(idx) @ h

    def block_adjoint(self, partition, i, r):
        _check_partition(self, partition)
        i = partition.check_index(i)
        r = check_vector(r, self.m, name="r")
        return self.columns(partition.blocks[i]).T @ r

    def column_blocks(self, partition):
        _check_partition(self, partition)
        ops = []
        for idx in partition.blocks:
            cols = self.columns(idx)
            ops.append((cols.__matmul__, cols.T.__matmul__))
        return ops

    def to_dense(self):
        return self.matrix.copy()


def _dft_matrix(k):
    j = np.arange(k)
    return np.exp(-2j * np.pi * np.outer(j, j) / k) / np.sqrt(k)


class FourierModel(ForwardModel):
    """Realified, subsampled, unitary 2-D DFT of a row-major image.

    ``apply`` returns ``[Re(F x)[mask]; Im(F x)[mask]]`` with the selected
    frequencies in row-major order, so ``m = 2 * mask.sum()``.  The DFT is
    evaluated separably with explicit DFT matrices.
    """

    kind = "subsampled-fourier"

    def __init__(self, mask):
        mask = np.array(mask, dtype=bool)
        if mask.ndim != 2:
            raise DimensionMismatchError(
                f"Fourier mask must be 2-D, got shape {mask.shape}")
        if not mask.any():
            raise ValueError("Fourier mask selects no frequencies")
        mask.setflags(write=False)
        self.mask = mask
        self.shape = mask.shape
        self.n = mask.size
        self.n_freq = int(mask.sum())
        self.m = 2 * self.n_freq
        self._fh = _dft_matrix(mask.shape[0])
        self._fw = _dft_matrix(mask.shape[1])

    def __repr__(self):
        return f"FourierModel(shape={self.shape}, n_freq={self.n_freq})"

    def apply(self, x):
        X = check_vector(x, self.n).reshape(self.shape)
        Y = self._fh @ X @ self._fw
        sel = Y[self.mask]
        return np.concatenate([sel.real, sel.imag])

    def adjoint(self, u):
        u = check_vector(u, self.m, name="u")
        Z = np.zeros(self.shape, dtype=np.complex128)
        Z[self.mask] = u[:self.n_freq] + 1j * u[self.n_freq:]
        X = self._fh.conj() @ Z @ self._fw.conj()
        return X.real.reshape(-1)


def _check_partition(model, partition):
    if not isinstance(partition, BlockPartition):
        raise TypeError("partition must be a BlockPartition")
    if partition.n != model.n:
        raise DimensionMismatchError(
            f"partition covers n={partition.n}, model has n={model.n}")


def gaussian_matrix(m, n, seed):
    """i.i.d. N(0, 1/m) matrix drawn from numpy's PCG64 seeded by ``seed``."""
    rng = np.random.default_rng(seed)
    return rng.standard_normal((m, n)) / np.sqrt(m)


def radial_mask(height, width, n_lines):
    """Boolean mask of ``n_lines`` radial lines through the zero frequency.

    Lines are drawn in centered coordinates and mapped back to the unshifted
    DFT layout, so the DC term is always selected.
    """
    H, W = int(height), int(width)
    centered = np.zeros((H, W), dtype=bool)
    cy, cx = H // 2, W // 2
    radius = np.hypot(H, W)
    ts = np.linspace(-radius, radius, int(4 * radius) + 1)
    for a in np.arange(n_lines) * np.pi / n_lines:
        rows = np.rint(cy + ts * np.sin(a)).astype(int)
        cols = np.rint(cx + ts * np.cos(a)).astype(int)
        ok = (rows >= 0) & (rows < H) & (cols >= 0) & (cols < W)
        centered[rows[ok], cols[ok]] = True
    return np.fft.ifftshift(centered)


def random_mask(height, width, fraction, seed):
    """Mask selecting ``round(fraction * H * W)`` frequencies, DC included."""
    rng = np.random.default_rng(seed)
    n = int(height) * int(width)
    k = max(1, int(round(fraction * n)))
    chosen = rng.permutation(n - 1)[:k - 1] + 1
    mask = np.zeros(n, dtype=bool)
    mask[0] = True
    mask[chosen] = True
    return mask.reshape(int(height), int(width))


def build_forward_model(spec, n=None, m=None, seed=0):
    """Construct a forward model from a spec mapping.

    Recognized kinds:

    * ``{"kind": "dense", "matrix": A}``
    * ``{"kind": "identity"}`` (needs ``n``)
    * ``{"kind": "gaussian-random"}`` (needs ``m``, ``n``; uses ``seed``)
    * ``{"kind": "subsampled-fourier", "mask": M}`` or ``"mask_file": path``
    * ``{"kind": "matrix-file", "path": path}``

    When ``n`` (or ``m``) is supplied it is checked against the model.
    """
    from . import io as _io

    if isinstance(spec, str):
        spec = {"kind": spec}
    kind = spec.get("kind")
    if kind == "dense":
        model = DenseModel(spec["matrix"], kind="dense")
    elif kind == "identity":
        if n is None:
            raise ValueError("identity model needs n")
        model = DenseModel(np.eye(int(n)), kind="dense")
    elif kind == "gaussian-random":
        if m is None or n is None or int(m) < 1 or int(n) < 1:
            raise ValueError("gaussian-random model needs m >= 1 and n >= 1")
        model = DenseModel(gaussian_matrix(int(m), int(n), seed),
                           kind="gaussian-random")
    elif kind == "subsampled-fourier":
        mask = spec.get("mask")
        if mask is None:
            mask = _io.read_mask_file(spec["mask_file"])
        model = FourierModel(mask)
    elif kind == "matrix-file":
        model = DenseModel(_io.read_matrix_file(spec["path"]),
                           kind="matrix-file")
    else:
        raise ValueError(f"unknown forward model kind {kind!r}")
    if n is not None and model.n != int(n):
        raise DimensionMismatchError(
            f"forward model has n={model.n}, expected {n}")
    if m is not None and kind != "gaussian-random" and model.m != int(m):
        raise DimensionMismatchError(
            f"forward model has m={model.m}, expected {m}")
    return model


def apply(model, x):
    return model.apply(x)


def adjoint(model, u):
    return model.adjoint(u)


def apply_block_columns(model, partition, i, h):
    """Return ``A_i h`` where ``A_i`` holds the columns of block ``i``."""
    return model.apply_block_columns(partition, i, h)


def lsq_block_gradient(model, partition, i, r):
    """Return ``A_i^T r``, the block-``i`` gradient of ``0.5 ||Ax - y||^2``
    given the residual ``r = Ax - y``."""
    return model.block_adjoint(partition, i, r)


def data_fidelity(model, y, x):
    r = model.apply(x) - y
    return 0.5 * float(r @ r)


def data_gradient(model, y, x):
    return model.adjoint(model.apply(x) - y)


def power_iteration(op, n, tol=1e-10, max_iter=10000):
    """Largest eigenvalue of a symmetric PSD operator by power iteration.

    Starts from the normalized all-ones vector.  If the iterate is annihilated
    the run restarts once from a fixed alternating-sign vector; a second
    annihilation means the operator is zero on both probes and 0 is returned.

    Returns
    -------
    (eigenvalue, iterations, relative_change)
    """
    v = np.ones(n) / np.sqrt(n)
    fallback = np.where(np.arange(n) % 2 == 0, 1.0, -1.0) * (1.0 + np.arange(n) / n)
    fallback /= np.linalg.norm(fallback)
    used_fallback = False
    lam_prev = 0.0
    change = np.inf
    it = 0
    while it < max_iter:
        it += 1
        w = op(v)
        lam = float(v @ w)
        norm_w = float(np.linalg.norm(w))
        if norm_w == 0.0 or lam <= 0.0:
            if used_fallback:
                return 0.0, it, 0.0
            used_fallback = True
            v = fallback
            lam_prev = 0.0
            continue
        change = abs(lam - lam_prev) / lam
        v = w / norm_w
        lam_prev = lam
        if change < tol:
            break
    return lam_prev, it, change


@dataclass(frozen=True)
class LipschitzInfo:
    """Lipschitz constants of the least-squares gradient.

    ``global_`` bounds ``grad g`` overall, ``blocks[i]`` along block ``i``.
    All values include the upward safety factor ``1 + 1e-6``.
    """

    global_: float
    blocks: Tuple[float, ...]
    iterations_used: int
    residual: float

    @property
    def max(self):
        return max(self.blocks)

    @property
    def L_global(self):
        return self.global_

    @property
    def L_block(self):
        return self.blocks

    @property
    def L_max(self):
        return self.max


def estimate_lipschitz(model, partition, tol=1e-10, max_iter=10000):
    """Estimate ``L = ||A||^2`` and ``L_i = ||A_i||^2`` for every block."""
    _check_partition(model, partition)
    lam, iters, resid = power_iteration(
        lambda v: model.adjoint(model.apply(v)), model.n, tol, max_iter)
    total_iters = iters
    worst = resid
    blocks = []
    for (fwd, adj), idx in zip(model.column_blocks(partition), partition.blocks):
        li, it_i, res_i = power_iteration(lambda v: adj(fwd(v)), idx.size,
                                          tol, max_iter)
        blocks.append(li * LIPSCHITZ_SAFETY)
        total_iters += it_i
        worst = max(worst, res_i)
    return LipschitzInfo(global_=lam * LIPSCHITZ_SAFETY, blocks=tuple(blocks),
                         iterations_used=total_iters, residual=worst)
