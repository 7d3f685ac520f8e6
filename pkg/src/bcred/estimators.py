"""scikit-learn style wrappers around the solvers.

The "design matrix" passed to ``fit`` is the forward operator ``A`` (a
dense array or any :class:`~bcred.forward.ForwardModel`) and the target is
the measurement vector ``y``.  The fitted image is ``coef_``, so
``predict(A)`` returns the simulated measurements ``A @ coef_``.
"""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, clone
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .blocks import make_partition
from .forward import DenseModel, ForwardModel, estimate_lipschitz
from .solvers import (Problem, SolverConfig, bcred_run, full_partition,
                      pgm_run, red_full_run)

__all__ = ["BCRED", "RED", "PGM"]


def _as_model(A, y):
    if isinstance(A, ForwardModel):
        y = np.asarray(y, dtype=np.float64).ravel()
        return A, y
    A, y = check_X_y(A, y, dtype=np.float64, y_numeric=True)
    return DenseModel(A), y


class _SolverEstimator(RegressorMixin, BaseEstimator):

    def _config(self, **extra):
        return SolverConfig(
            tau=self.tau if hasattr(self, "tau") else 1.0,
            gamma=self.gamma,
            iterations=self.max_iter,
            stop_tol=self.tol,
            x0=self.x0,
            record_wall_time=False,
            **extra,
        )

    def predict(self, A):
        check_is_fitted(self, "coef_")
        if isinstance(A, ForwardModel):
            return A.apply(self.coef_)
        A = check_array(A, dtype=np.float64)
        return A @ self.coef_

    def _store(self, x, trace):
        self.coef_ = x
        self.trace_ = trace
        self.gamma_ = trace.gamma
        self.n_iter_ = trace.iterations
        return self


class BCRED(_SolverEstimator):
    """Block-coordinate RED as an estimator.

    Parameters
    ----------
    denoiser : Denoiser
        Prior; cloned before use.
    tau : float
        Regularization strength.
    n_blocks : int or dict
        Partition spec (an int gives contiguous blocks).
    selection : {"cyclic", "iid", "epoch-shuffle"}
    gamma : float or "auto"
    max_iter : int
        Outer iterations (each is ``b`` block updates).
    tol : float or None
        Stop when the normalized residual drops to ``tol``.
    cached_residual : bool
        Carry ``Ax - y`` along instead of recomputing it.
    """

    def __init__(self, denoiser=None, tau=1.0, n_blocks=1, selection="cyclic",
                 gamma="auto", max_iter=100, tol=None, seed=0,
                 cached_residual=False, x0="zeros"):
        self.denoiser = denoiser
        self.tau = tau
        self.n_blocks = n_blocks
        self.selection = selection
        self.gamma = gamma
        self.max_iter = max_iter
        self.tol = tol
        self.seed = seed
        self.cached_residual = cached_residual
        self.x0 = x0

    def fit(self, A, y):
        model, y = _as_model(A, y)
        if self.denoiser is None:
            raise ValueError("BCRED needs a denoiser")
        partition = make_partition(model.n, self.n_blocks)
        self.partition_ = partition
        self.lipschitz_ = estimate_lipschitz(model, partition)
        problem = Problem(model=model, y=y, denoiser=clone(self.denoiser))
        cfg = self._config(selection=self.selection, seed=self.seed,
                           cached_residual=self.cached_residual)
        x, trace = bcred_run(problem, partition, cfg, lipschitz=self.lipschitz_)
        return self._store(x, trace)


class RED(_SolverEstimator):
    """Full-gradient RED: every update touches all coordinates."""

    def __init__(self, denoiser=None, tau=1.0, gamma="auto", max_iter=100,
                 tol=None, x0="zeros"):
        self.denoiser = denoiser
        self.tau = tau
        self.gamma = gamma
        self.max_iter = max_iter
        self.tol = tol
        self.x0 = x0

    def fit(self, A, y):
        model, y = _as_model(A, y)
        if self.denoiser is None:
            raise ValueError("RED needs a denoiser")
        self.lipschitz_ = estimate_lipschitz(model, full_partition(model.n))
        problem = Problem(model=model, y=y, denoiser=clone(self.denoiser))
        x, trace = red_full_run(problem, self._config(), lipschitz=self.lipschitz_)
        return self._store(x, trace)


class PGM(_SolverEstimator):
    """Proximal gradient on ``0.5 ||Ax - y||^2 + h(x)``.

    ``regularizer`` is a :class:`~bcred.moreau.SmoothableFunction`.
    """

    def __init__(self, regularizer=None, gamma="auto", max_iter=100, tol=None,
                 x0="zeros"):
        self.regularizer = regularizer
        self.gamma = gamma
        self.max_iter = max_iter
        self.tol = tol
        self.x0 = x0

    def fit(self, A, y):
        model, y = _as_model(A, y)
        if self.regularizer is None:
            raise ValueError("PGM needs a regularizer")
        self.lipschitz_ = estimate_lipschitz(model, full_partition(model.n))
        problem = Problem(model=model, y=y, regularizer=self.regularizer)
        x, trace = pgm_run(problem, self._config(), lipschitz=self.lipschitz_)
        return self._store(x, trace)
