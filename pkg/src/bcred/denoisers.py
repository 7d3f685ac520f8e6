"""Denoiser priors and the RED residual ``H(x) = tau * (x - D(x))``.

Denoisers follow the scikit-learn transformer protocol: parameters are set
in ``__init__`` and exposed through ``get_params``; ``transform`` denoises
each row of a 2-D array.  ``denoise`` works on a single flat vector.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array

from ._validation import check_scalar, check_shape, check_vector
from .blocks import BlockPartition
from .exceptions import DimensionMismatchError, IncompatibleDenoiserError

__all__ = [
    "Denoiser",
    "Identity",
    "SoftThreshold",
    "TV1DProx",
    "TV2DProx",
    "LinearSmoother",
    "GradientStep",
    "Expanding",
    "NonexpansivenessReport",
    "soft_threshold",
    "tv1d_prox",
    "tv2d_prox",
    "tv1d_value",
    "tv2d_value",
    "denoise",
    "red_operator_H",
    "blockwise_denoise",
    "check_block_nonexpansive",
    "red_objective_linear",
]


def soft_threshold(z, threshold):
    """Coordinate-wise shrinkage ``sign(z) * max(|z| - threshold, 0)``."""
    z = np.asarray(z, dtype=np.float64)
    return np.sign(z) * np.maximum(np.abs(z) - threshold, 0.0)


def tv1d_value(x):
    return float(np.abs(np.diff(x)).sum())


def tv1d_prox(y, weight):
    """Exact prox of ``weight * sum_k |x[k+1] - x[k]|`` by the taut string.

    The cumulative sum of the solution is the shortest path from ``(0, 0)``
    to ``(n, sum(y))`` inside the tube of half-width ``weight`` around the
    cumulative sum of ``y``.  Each segment slope is one output value.  The
    path is found by growing a feasible slope cone from the current vertex
    and placing a new vertex where the cone collapses.
    """
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    n = y.size
    if n <= 1 or weight == 0:
        return y.copy()
    r = np.concatenate(([0.0], np.cumsum(y)))
    lower = (r - weight).tolist()
    upper = (r + weight).tolist()
    lower[n] = upper[n] = float(r[n])
    x = np.empty(n)
    a, va = 0, 0.0
    while a < n:
        lo, hi = -np.inf, np.inf
        jlo = jhi = a
        k = a + 1
        while k <= n:
            d = k - a
            s_lo = (lower[k] - va) / d
            s_hi = (upper[k] - va) / d
            if s_hi < lo:
                # ceiling at k passes below the floor vertex: bend down there
                x[a:jlo] = lo
                a, va = jlo, lower[jlo]
                break
            if s_lo > hi:
                x[a:jhi] = hi
                a, va = jhi, upper[jhi]
                break
            if s_lo >= lo:
                lo, jlo = s_lo, k
            if s_hi <= hi:
                hi, jhi = s_hi, k
            k += 1
        else:
            x[a:n] = (r[n] - va) / (n - a)
            a = n
    return x


def _grad2d(x):
    gx = np.zeros_like(x)
    gy = np.zeros_like(x)
    gx[:-1, :] = x[1:, :] - x[:-1, :]
    gy[:, :-1] = x[:, 1:] - x[:, :-1]
    return gx, gy


def _grad2d_adjoint(qx, qy):
    out = np.zeros_like(qx)
    out[:-1, :] -= qx[:-1, :]
    out[1:, :] += qx[:-1, :]
    out[:, :-1] -= qy[:, :-1]
    out[:, 1:] += qy[:, :-1]
    return out


def tv2d_value(img):
    gx, gy = _grad2d(np.asarray(img, dtype=np.float64))
    return float(np.sqrt(gx * gx + gy * gy).sum())


def tv2d_prox(y, weight, n_iter=100, tol=1e-8, return_history=False):
    """Approximate prox of isotropic ``weight * TV`` on a 2-D image.

    Runs projected gradient with step 1/8 on the dual problem
    ``min_{|q_ij| <= weight} 0.5 ||y - grad^T q||^2`` and returns
    ``y - grad^T q``.  Stops after ``n_iter`` steps or once the primal
    iterate moves by less than ``tol`` (max-abs).

    With ``return_history`` the per-step dual objective
    ``0.5 ||y - grad^T q||^2 - 0.5 ||y||^2`` is returned as well.
    """
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 2:
        raise DimensionMismatchError(f"tv2d_prox needs a 2-D image, got {y.shape}")
    history = []
    if weight == 0:
        return (y.copy(), history) if return_history else y.copy()
    qx = np.zeros_like(y)
    qy = np.zeros_like(y)
    x = y.copy()
    base = 0.5 * float((y * y).sum())
    for _ in range(int(n_iter)):
        gx, gy = _grad2d(x)
        qx += gx / 8.0
        qy += gy / 8.0
        scale = np.maximum(1.0, np.sqrt(qx * qx + qy * qy) / weight)
        qx /= scale
        qy /= scale
        x_new = y - _grad2d_adjoint(qx, qy)
        if return_history:
            history.append(0.5 * float((x_new * x_new).sum()) - base)
        delta = float(np.max(np.abs(x_new - x)))
        x = x_new
        if delta < tol:
            break
    return (x, history) if return_history else x


class Denoiser(TransformerMixin, BaseEstimator):
    """Base class for denoisers ``D : R^n -> R^n``.

    Subclasses implement ``_denoise(x, shape)`` on a validated flat vector.
    ``separable`` marks denoisers whose output coordinate ``j`` depends only
    on input coordinate ``j``; solvers then denoise a block in isolation.
    """

    separable = False
    usable_in_solver = True

    def _check_params(self):
        pass

    def _resolve_shape(self, n, shape):
        if shape is None:
            shape = getattr(self, "shape", None)
        if shape is None:
            return (n,)
        return check_shape(shape, n)

    def fit(self, X=None, y=None):
        self._check_params()
        return self

    def transform(self, X):
        X = check_array(X, dtype=np.float64)
        return np.vstack([self.denoise(row) for row in X])

    def __call__(self, x):
        return self.denoise(x)

    def denoise(self, x, shape=None):
        self._check_params()
        x = check_vector(x)
        shape = self._resolve_shape(x.size, shape)
        return self._denoise(x, shape)

    def residual(self, x, tau, shape=None):
        """``H(x) = tau * (x - D(x))``."""
        x = check_vector(x)
        return tau * (x - self.denoise(x, shape))

    def _denoise(self, x, shape):
        raise NotImplementedError


class Identity(Denoiser):
    """``D(x) = x``; every vector is a fixed point, so ``H = 0``."""

    separable = True

    def _denoise(self, x, shape):
        return x.copy()


class SoftThreshold(Denoiser):
    """Prox of ``threshold * ||x||_1``."""

    separable = True

    def __init__(self, threshold=0.1):
        self.threshold = threshold

    def _check_params(self):
        check_scalar(self.threshold, "threshold", min_val=0.0)

    def _denoise(self, x, shape):
        return soft_threshold(x, self.threshold)


class TV1DProx(Denoiser):
    """Exact prox of ``weight * TV`` for 1-D signals (taut string)."""

    def __init__(self, weight=0.1):
        self.weight = weight

    def _check_params(self):
        check_scalar(self.weight, "weight", min_val=0.0)

    def _denoise(self, x, shape):
        return tv1d_prox(x, float(self.weight))


class TV2DProx(Denoiser):
    """Approximate prox of isotropic ``weight * TV`` for row-major images."""

    def __init__(self, weight=0.1, shape=None, inner_iters=100, inner_tol=1e-8):
        self.weight = weight
        self.shape = shape
        self.inner_iters = inner_iters
        self.inner_tol = inner_tol

    def _check_params(self):
        check_scalar(self.weight, "weight", min_val=0.0)
        check_scalar(self.inner_tol, "inner_tol", min_val=0.0)
        if int(self.inner_iters) < 1:
            raise ValueError(f"inner_iters must be >= 1, got {self.inner_iters}")

    def _denoise(self, x, shape):
        img = x.reshape(shape if len(shape) == 2 else (1, shape[0]))
        return tv2d_prox(img, float(self.weight), self.inner_iters,
                         self.inner_tol).reshape(-1)


class LinearSmoother(Denoiser):
    """Convolution with a symmetric, nonnegative, unit-sum kernel.

    Boundaries use half-sample reflection, which keeps the operator matrix
    symmetric with spectral norm at most one.  A 1-D kernel applied to a 2-D
    image is used separably along both axes.
    """

    def __init__(self, kernel=(0.25, 0.5, 0.25), shape=None):
        self.kernel = kernel
        self.shape = shape

    def _kernel(self):
        k = np.asarray(self.kernel, dtype=np.float64)
        if k.ndim not in (1, 2) or any(s % 2 == 0 for s in k.shape):
            raise ValueError(f"kernel must be 1-D or 2-D with odd sizes, got {k.shape}")
        if np.any(k < 0):
            raise ValueError("kernel entries must be nonnegative")
        if abs(k.sum() - 1.0) > 1e-12:
            raise ValueError(f"kernel must sum to 1, sums to {k.sum()!r}")
        if not np.array_equal(k, np.flip(k, axis=0)) or (
                k.ndim == 2 and not np.array_equal(k, np.flip(k, axis=1))):
            raise ValueError("kernel must be symmetric along each axis")
        return k

    def _check_params(self):
        self._kernel()

    def _denoise(self, x, shape):
        k = self._kernel()
        img = x.reshape(shape)
        if k.ndim == 1:
            out = img
            for axis in range(img.ndim):
                out = ndimage.correlate1d(out, k, axis=axis, mode="reflect")
        else:
            if img.ndim != 2:
                raise DimensionMismatchError("2-D kernel needs a 2-D image shape")
            out = ndimage.correlate(img, k, mode="reflect")
        return out.reshape(-1)

    def matrix(self, n, shape=None):
        """Dense matrix ``W`` of the smoother on ``R^n``."""
        eye = np.eye(n)
        return np.column_stack([self.denoise(eye[:, j], shape) for j in range(n)])


class GradientStep(Denoiser):
    """``D(x) = x - (1/tau) grad h(x)`` for ``h = (lam/2) ||x||^2``.

    Nonexpansive exactly when ``0 <= lam <= 2 tau``.  Its RED residual at the
    matching ``tau`` is ``grad h(x) = lam * x``, which ``residual`` returns
    directly so that BC-RED and coordinate descent share arithmetic.
    """

    separable = True

    def __init__(self, lam=0.1, tau=1.0, h_kind="tikhonov"):
        self.lam = lam
        self.tau = tau
        self.h_kind = h_kind

    def _check_params(self):
        if self.h_kind != "tikhonov":
            raise ValueError(f"unsupported h_kind {self.h_kind!r}")
        lam = check_scalar(self.lam, "lam", min_val=0.0)
        tau = check_scalar(self.tau, "tau", min_val=0.0, include_min=False)
        if lam > 2.0 * tau:
            raise ValueError(
                f"gradient-step denoiser needs lam <= 2*tau, got lam={lam}, tau={tau}")

    def grad_h(self, x):
        return self.lam * x

    def _denoise(self, x, shape):
        return x - self.grad_h(x) / self.tau

    def residual(self, x, tau, shape=None):
        self._check_params()
        x = check_vector(x)
        return (tau / self.tau) * self.grad_h(x)


class Expanding(Denoiser):
    """``D(x) = factor * x``.  Test fixture for the nonexpansiveness check."""

    separable = True
    usable_in_solver = False

    def __init__(self, factor=2.0):
        self.factor = factor

    def _denoise(self, x, shape):
        return self.factor * x


def denoise(D, x, shape=None):
    return D.denoise(x, shape)


def red_operator_H(D, x, tau):
    """``H(x) = tau * (x - D(x))``."""
    check_scalar(tau, "tau", min_val=0.0, include_min=False)
    return D.residual(x, tau)


def _padded_window(partition, i, pad):
    if not isinstance(partition, BlockPartition) or partition.kind != "tile-2d":
        raise IncompatibleDenoiserError("block-wise denoising needs a tile-2d partition")
    if pad < 0:
        raise ValueError(f"pad must be >= 0, got {pad}")
    i = partition.check_index(i)
    H, W = partition.grid[:2]
    r0, r1, c0, c1 = partition.tiles[i]
    return (r0, r1, c0, c1), (max(0, r0 - pad), min(H, r1 + pad),
                              max(0, c0 - pad), min(W, c1 + pad))


def blockwise_denoise(D, x, partition, i, pad):
    """Denoise tile ``i`` using ``pad`` extra pixels of real image context.

    The padded window is clipped at the image border; the output is the crop
    of the denoised window matching the original tile, in row-major order.
    """
    (r0, r1, c0, c1), (R0, R1, C0, C1) = _padded_window(partition, i, int(pad))
    H, W = partition.grid[:2]
    img = check_vector(x, partition.n).reshape(H, W)
    patch = img[R0:R1, C0:C1]
    out = D.denoise(patch.reshape(-1), shape=patch.shape).reshape(patch.shape)
    return np.ascontiguousarray(
        out[r0 - R0:r1 - R0, c0 - C0:c1 - C0]).reshape(-1)


@dataclass(frozen=True)
class NonexpansivenessReport:
    trials: int
    max_ratio: float
    passed: bool
    seed: int


def check_block_nonexpansive(D, partition, trials=1000, seed=0, magnitude=1.0,
                             pad=None, shape=None):
    """Empirical block-nonexpansiveness certificate for ``D``.

    Each trial draws ``y ~ N(0, I)``, a block ``i`` and a perturbation
    ``h_i`` with norm at most ``magnitude``, sets ``x = y + U_i h_i`` and
    records ``||D_i(x) - D_i(y)|| / ||h_i||``, where ``h_i`` is taken as the
    realized difference ``x_i - y_i``.  With ``pad`` set, ``D_i`` is the
    block-wise denoiser on a tile partition.
    """
    if int(trials) < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    n = partition.n
    worst = 0.0
    for _ in range(int(trials)):
        i = int(rng.integers(partition.n_blocks))
        idx = partition.blocks[i]
        y = rng.standard_normal(n)
        h = rng.standard_normal(idx.size)
        h *= magnitude * rng.uniform(1e-3, 1.0) / np.linalg.norm(h)
        x = y.copy()
        x[idx] += h
        h_eff = x[idx] - y[idx]
        nh = np.linalg.norm(h_eff)
        if nh == 0.0:
            continue
        if pad is None:
            dx = D.denoise(x, shape)[idx]
            dy = D.denoise(y, shape)[idx]
        else:
            dx = blockwise_denoise(D, x, partition, i, pad)
            dy = blockwise_denoise(D, y, partition, i, pad)
        worst = max(worst, float(np.linalg.norm(dx - dy) / nh))
    return NonexpansivenessReport(trials=int(trials), max_ratio=worst,
                                  passed=worst <= 1.0 + 1e-9, seed=seed)


def red_objective_linear(D, x, tau):
    """Explicit RED regularizer ``(tau/2) x^T (x - W x)`` of a linear smoother."""
    if not isinstance(D, LinearSmoother):
        raise IncompatibleDenoiserError(
            "the explicit RED regularizer is only provided for linear smoothers")
    x = check_vector(x)
    return 0.5 * tau * float(x @ (x - D.denoise(x)))
