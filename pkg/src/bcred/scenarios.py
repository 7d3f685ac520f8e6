"""Desk-scale reference problems shared by the check suite and the tests."""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .blocks import BlockPartition, make_partition
from .denoisers import GradientStep, SoftThreshold, TV1DProx
from .forward import ForwardModel, build_forward_model
from .moreau import L1, TV1D, Tikhonov
from .oracles import pgm_reference, ridge_solution
from .phantoms import piecewise_constant_1d
from .solvers import Problem

__all__ = ["Scenario", "ridge_scenario", "ridge_problem", "lasso_scenario",
           "lasso_problem", "tv1d_scenario", "tv1d_problem"]


@dataclass(frozen=True)
class Scenario:
    model: ForwardModel
    y: np.ndarray
    x_true: np.ndarray
    partition: BlockPartition
    lam: float
    x_ref: Optional[np.ndarray] = None
    f_ref: Optional[float] = None

    def problem(self, denoiser, regularizer=None, x_star=None):
        return Problem(model=self.model, y=self.y, denoiser=denoiser,
                       regularizer=regularizer, x_star=x_star)


def ridge_scenario(m=32, n=64, seed=1, lam=0.1, n_blocks=8, signal_seed=0):
    """Gaussian model with a Tikhonov gradient-step prior; ``x_ref`` solves
    ``(A^T A + lam I) x = A^T y`` directly."""
    model = build_forward_model({"kind": "gaussian-random"}, n=n, m=m, seed=seed)
    x_true = np.random.default_rng(signal_seed).standard_normal(n)
    y = model.apply(x_true)
    x_ref = ridge_solution(model, y, lam)
    r = model.apply(x_ref) - y
    f_ref = 0.5 * float(r @ r) + Tikhonov(lam).value(x_ref)
    return Scenario(model, y, x_true, make_partition(n, n_blocks), lam, x_ref, f_ref)


def ridge_problem(sc, tau=1.0):
    return sc.problem(GradientStep(sc.lam, tau), Tikhonov(sc.lam), sc.x_ref)


def lasso_scenario(m=16, n=32, seed=2, lam=0.05, n_blocks=4, signal_seed=5,
                   reference_iterations=10 ** 6):
    """Sparse recovery; ``f_ref`` comes from a long proximal-gradient run."""
    model = build_forward_model({"kind": "gaussian-random"}, n=n, m=m, seed=seed)
    rng = np.random.default_rng(signal_seed)
    x_true = np.zeros(n)
    x_true[rng.choice(n, size=max(1, n // 8), replace=False)] = rng.standard_normal(max(1, n // 8))
    y = model.apply(x_true) + 0.01 * rng.standard_normal(m)
    x_ref, f_ref = pgm_reference(model, y, L1(lam), reference_iterations)
    return Scenario(model, y, x_true, make_partition(n, n_blocks), lam, x_ref, f_ref)


def lasso_problem(sc, tau):
    return sc.problem(SoftThreshold(sc.lam / tau), L1(sc.lam))


def tv1d_scenario(m=16, n=32, seed=3, lam=0.05, n_blocks=4, signal_seed=4,
                  reference_iterations=10 ** 6):
    """Piecewise-constant signal under TV; ``f_ref`` from a long PGM run."""
    model = build_forward_model({"kind": "gaussian-random"}, n=n, m=m, seed=seed)
    x_true = piecewise_constant_1d(n, signal_seed)
    rng = np.random.default_rng(signal_seed)
    y = model.apply(x_true) + 0.02 * rng.standard_normal(m)
    x_ref, f_ref = pgm_reference(model, y, TV1D(lam), reference_iterations)
    return Scenario(model, y, x_true, make_partition(n, n_blocks), lam, x_ref, f_ref)


def tv1d_problem(sc, tau):
    return sc.problem(TV1DProx(sc.lam / tau), TV1D(sc.lam))
