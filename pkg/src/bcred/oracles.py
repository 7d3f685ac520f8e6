"""Reference solutions computed independently of the BC-RED iteration."""

import numpy as np

from .forward import DenseModel
from .solvers import Problem, SolverConfig, objective, pgm_run

__all__ = [
    "dense_matrix",
    "ridge_solution",
    "pgm_reference",
    "smoothed_l1_fixed_point",
]


def dense_matrix(model):
    if isinstance(model, DenseModel):
        return model.matrix
    return model.to_dense()


def ridge_solution(model, y, lam):
    """Solve ``(A^T A + lam I) x = A^T y`` directly."""
    A = dense_matrix(model)
    return np.linalg.solve(A.T @ A + lam * np.eye(A.shape[1]), A.T @ y)


def pgm_reference(model, y, regularizer, iterations=10 ** 6, x0="zeros"):
    """Minimize ``0.5 ||Ax - y||^2 + h(x)`` by a long proximal-gradient run.

    The run stops early only if the iterate becomes an exact fixed point.
    Returns ``(x_ref, f_ref)``.
    """
    problem = Problem(model=model, y=y, regularizer=regularizer)
    cfg = SolverConfig(iterations=iterations, x0=x0, stop_tol=0.0,
                       record_wall_time=False, trace_every=iterations)
    x, _ = pgm_run(problem, cfg)
    return x, objective(problem, x)


def smoothed_l1_fixed_point(model, y, lam, tau, x_init=None, max_iter=500):
    """A zero of ``A^T (Ax - y) + tau (x - soft(x, lam / tau))``.

    This is a minimizer of the Huber-smoothed lasso
    ``F(x) = 0.5 ||Ax - y||^2 + sum_j tau * huber_theta(x_j)`` with
    ``theta = lam / tau``.  ``F`` is piecewise quadratic, so semismooth
    Newton steps (minimal-norm solves of the generalized Hessian) with an
    Armijo line search on ``F`` converge in a handful of pattern changes.
    """
    A = dense_matrix(model)
    AtA = A.T @ A
    Aty = A.T @ y
    theta = lam / tau
    n = A.shape[1]
    x = np.zeros(n) if x_init is None else np.array(x_init, dtype=float)

    def F(v):
        r = A @ v - y
        a = np.abs(v)
        hub = np.where(a <= theta, 0.5 * v * v, theta * a - 0.5 * theta * theta)
        return 0.5 * float(r @ r) + tau * float(hub.sum())

    def grad(v):
        inside = np.abs(v) <= theta
        return AtA @ v - Aty + np.where(inside, tau * v, lam * np.sign(v))

    scale = max(1.0, float(np.linalg.norm(Aty)))
    L = float(np.linalg.eigvalsh(AtA)[-1]) + tau
    for _ in range(max_iter):
        g = grad(x)
        if np.linalg.norm(g) <= 1e-14 * scale:
            break
        inside = np.abs(x) <= theta
        J = AtA + np.diag(np.where(inside, tau, 0.0))
        d = -np.linalg.lstsq(J, g, rcond=None)[0]
        slope = float(g @ d)
        if not slope < 0:
            d, slope = -g / L, -float(g @ g) / L
        f0, t = F(x), 1.0
        while F(x + t * d) > f0 + 1e-4 * t * slope and t > 1e-20:
            t *= 0.5
        x_new = x + t * d
        if np.array_equal(x_new, x):
            break
        x = x_new
    return x
