"""BC-RED, full-gradient RED and proximal-gradient iterations.

All solvers target ``g(x) = 0.5 ||Ax - y||^2`` with a denoiser ``D`` and
seek zeros of ``G(x) = grad g(x) + tau (x - D(x))``.  One outer iteration of
BC-RED is ``b`` single-block updates.

Block selection uses SplitMix64 so that index streams are reproducible
from a seed in any language::

    state = (state + 0x9E3779B97F4A7C15) mod 2^64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) mod 2^64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) mod 2^64
    output z ^ (z >> 31)

An index below ``b`` is ``(output * b) >> 64``.  ``iid`` draws ``b`` such
indices per outer iteration, ``epoch-shuffle`` applies a Fisher-Yates
shuffle to ``[0, ..., b-1]`` (``for j = b-1 .. 1: swap(j, draw(j+1))``),
``cyclic`` visits ``0, ..., b-1`` in order.
"""

import csv
import math
import time
from dataclasses import dataclass, field, replace
from typing import List, Optional, Union

import numpy as np

from ._validation import check_scalar, check_vector
from .blocks import BlockPartition, contiguous_partition
from .denoisers import Denoiser, blockwise_denoise
from .exceptions import (DimensionMismatchError, IncompatibleDenoiserError,
                         InvalidStepSizeError)
from .forward import LIPSCHITZ_SAFETY, ForwardModel, estimate_lipschitz, power_iteration
from .io import format_float

__all__ = [
    "SplitMix64",
    "BlockSelector",
    "Problem",
    "SolverConfig",
    "ConvergenceTrace",
    "operator_G",
    "objective",
    "bcred_run",
    "red_full_run",
    "pgm_run",
    "theorem1_bound",
    "theorem2_bound",
    "theorem2_schedule",
    "coordinate_descent_bound",
    "write_trace_csv",
    "TRACE_HEADER",
]

_MASK64 = (1 << 64) - 1
SELECTION_RULES = ("iid", "epoch-shuffle", "cyclic")
STEP_SLACK = 1.0 + 1e-9
TRACE_HEADER = ("k", "residual", "normalized_residual", "objective",
                "distance", "wall_time_s")


class SplitMix64:
    """64-bit SplitMix generator (see module docstring for the recurrence)."""

    def __init__(self, seed):
        self.state = int(seed) & _MASK64

    def next_u64(self):
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def randbelow(self, b):
        return (self.next_u64() * b) >> 64


class BlockSelector:
    """Produces the block indices consumed by one outer iteration."""

    def __init__(self, rule, n_blocks, seed=0):
        if rule not in SELECTION_RULES:
            raise ValueError(f"selection must be one of {SELECTION_RULES}, got {rule!r}")
        self.rule = rule
        self.n_blocks = int(n_blocks)
        self._rng = SplitMix64(seed)

    def epoch(self):
        b = self.n_blocks
        if self.rule == "cyclic":
            return list(range(b))
        if self.rule == "iid":
            return [self._rng.randbelow(b) for _ in range(b)]
        perm = list(range(b))
        for j in range(b - 1, 0, -1):
            k = self._rng.randbelow(j + 1)
            perm[j], perm[k] = perm[k], perm[j]
        return perm


@dataclass(frozen=True)
class Problem:
    """Least-squares data term plus a denoiser prior.

    ``regularizer`` is an explicit ``h`` used for objective values (and the
    prox in PGM); ``x_star`` is an oracle fixed point used for distances.
    """

    model: ForwardModel
    y: np.ndarray
    denoiser: Optional[Denoiser] = None
    regularizer: Optional[object] = None
    x_star: Optional[np.ndarray] = None

    def __post_init__(self):
        y = check_vector(self.y, self.model.m, name="y")
        object.__setattr__(self, "y", y)
        if self.x_star is not None:
            object.__setattr__(self, "x_star",
                               check_vector(self.x_star, self.model.n, name="x_star"))

    @property
    def n(self):
        return self.model.n


@dataclass(frozen=True)
class SolverConfig:
    """Run parameters shared by the solvers.

    ``gamma="auto"`` picks the largest step allowed by the convergence
    guard.  ``iterations`` counts outer iterations.  ``stop_tol`` stops once
    ``||G(x^k)||^2 / ||G(x^0)||^2`` drops to it.  ``pad`` switches BC-RED to
    block-wise denoising with that many context pixels (tile partitions).
    """

    tau: float = 1.0
    gamma: Union[float, str] = "auto"
    selection: str = "cyclic"
    seed: int = 0
    iterations: int = 100
    x0: Union[str, np.ndarray] = "zeros"
    stop_tol: Optional[float] = None
    cached_residual: bool = False
    pad: Optional[int] = None
    allow_unsafe_step: bool = False
    record_updates: bool = False
    check_distance: bool = False
    record_wall_time: bool = True
    trace_every: int = 1

    def validated(self):
        check_scalar(self.tau, "tau", min_val=0.0, include_min=False)
        if self.gamma != "auto":
            check_scalar(self.gamma, "gamma")
        if self.selection not in SELECTION_RULES:
            raise ValueError(f"selection must be one of {SELECTION_RULES}")
        if int(self.iterations) < 0:
            raise ValueError("iterations must be >= 0")
        if int(self.trace_every) < 1:
            raise ValueError("trace_every must be >= 1")
        if self.stop_tol is not None:
            check_scalar(self.stop_tol, "stop_tol", min_val=0.0)
        if self.pad is not None and int(self.pad) < 0:
            raise ValueError("pad must be >= 0")
        if isinstance(self.x0, str) and self.x0 not in ("zeros", "adjoint-y"):
            raise ValueError(f"x0 must be 'zeros', 'adjoint-y' or an array, got {self.x0!r}")
        return self


@dataclass
class ConvergenceTrace:
    """Per-outer-iteration diagnostics of a solver run.

    Series are indexed by the entries of ``k`` (outer iteration numbers,
    starting at 0).  ``objective`` and ``distance`` are ``None`` when the
    problem has no explicit regularizer or oracle.  ``update_residuals`` and
    ``update_distances`` hold per-block-update values ``||G(x^{j-1})||^2``
    and ``||x^j - x*||`` when requested.
    """

    k: List[int] = field(default_factory=list)
    residual: List[float] = field(default_factory=list)
    normalized_residual: List[float] = field(default_factory=list)
    objective: Optional[List[float]] = None
    distance: Optional[List[float]] = None
    wall_time: Optional[List[float]] = None
    selection_order: List[int] = field(default_factory=list)
    update_residuals: Optional[List[float]] = None
    update_distances: Optional[List[float]] = None
    gamma: float = float("nan")
    lipschitz: Optional[object] = None
    unsafe_step: bool = False
    valid: bool = True
    distance_violations: int = 0

    def __len__(self):
        return len(self.k)

    @property
    def iterations(self):
        return self.k[-1] if self.k else 0

    def rows(self):
        for j, k in enumerate(self.k):
            yield (k, self.residual[j], self.normalized_residual[j],
                   None if self.objective is None else self.objective[j],
                   None if self.distance is None else self.distance[j],
                   None if self.wall_time is None else self.wall_time[j])

    def to_csv(self, path):
        write_trace_csv(self, path)


def write_trace_csv(trace, path):
    """Write ``k,residual,normalized_residual,objective,distance,wall_time_s``.

    Missing values are written as empty fields.
    """
    with open(path, "w", encoding="ascii", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for row in trace.rows():
            w.writerow([str(row[0])] + ["" if v is None else format_float(v)
                                        for v in row[1:]])


def _initial_point(problem, config):
    x0 = config.x0
    if isinstance(x0, str):
        if x0 == "zeros":
            return np.zeros(problem.n)
        return problem.model.adjoint(problem.y)
    return check_vector(x0, problem.n, name="x0").copy()


def _block_residual(D, x, i, idx, tau, partition, pad):
    if pad is not None:
        return tau * (x[idx] - blockwise_denoise(D, x, partition, i, pad))
    if D.separable:
        return D.residual(x[idx], tau)
    return D.residual(x, tau)[idx]


def operator_G(problem, x, tau, partition=None, pad=None):
    """``G(x) = A^T (Ax - y) + tau (x - D(x))``.

    With ``pad`` set the denoiser term is assembled tile by tile with
    block-wise denoising, matching what BC-RED applies in that mode.
    """
    x = check_vector(x, problem.n)
    grad = problem.model.adjoint(problem.model.apply(x) - problem.y)
    if pad is None:
        return grad + problem.denoiser.residual(x, tau)
    H = np.empty(problem.n)
    for i, idx in enumerate(partition.blocks):
        H[idx] = _block_residual(problem.denoiser, x, i, idx, tau, partition, pad)
    return grad + H


def objective(problem, x):
    """``f(x) = g(x) + h(x)``; ``None`` without an explicit regularizer."""
    if problem.regularizer is None:
        return None
    r = problem.model.apply(x) - problem.y
    return 0.5 * float(r @ r) + float(problem.regularizer(x))


def _resolve_gamma(config, bound, what):
    """Return ``(gamma, unsafe)`` under the guard ``gamma <= bound``."""
    if config.gamma == "auto":
        if not math.isfinite(bound) or bound <= 0:
            raise InvalidStepSizeError(f"cannot pick an automatic step: {what} bound is {bound}")
        return bound, False
    gamma = float(config.gamma)
    if gamma <= 0:
        raise InvalidStepSizeError(f"invalid step-size: gamma={gamma} must be > 0")
    if gamma > bound * STEP_SLACK:
        if not config.allow_unsafe_step:
            raise InvalidStepSizeError(
                f"invalid step-size: gamma={gamma} exceeds {what} = {bound}")
        return gamma, True
    return gamma, False


class _Recorder:
    """Collects trace rows and evaluates the stopping rule."""

    def __init__(self, problem, config, G_fn, gamma, lipschitz, unsafe):
        self.problem = problem
        self.config = config
        self.G_fn = G_fn
        self.trace = ConvergenceTrace(gamma=gamma, lipschitz=lipschitz,
                                      unsafe_step=unsafe)
        if problem.regularizer is not None:
            self.trace.objective = []
        if problem.x_star is not None:
            self.trace.distance = []
        if config.record_wall_time:
            self.trace.wall_time = []
        self.t0 = time.perf_counter()
        self.r0 = None

    def record(self, k, x, force=False, G=None):
        """Record iteration ``k``; return True when the stop rule fires."""
        cfg = self.config
        if G is None:
            G = self.G_fn(x)
        res = float(G @ G)
        if self.r0 is None:
            self.r0 = res
        norm = res / self.r0 if self.r0 > 0 else 0.0
        stop = cfg.stop_tol is not None and norm <= cfg.stop_tol
        if not (force or stop or k % cfg.trace_every == 0):
            return stop
        tr = self.trace
        tr.k.append(int(k))
        tr.residual.append(res)
        tr.normalized_residual.append(norm)
        if tr.objective is not None:
            tr.objective.append(objective(self.problem, x))
        if tr.distance is not None:
            tr.distance.append(float(np.linalg.norm(x - self.problem.x_star)))
        if tr.wall_time is not None:
            tr.wall_time.append(time.perf_counter() - self.t0)
        return stop


def _check_denoiser(problem):
    D = problem.denoiser
    if D is None:
        raise IncompatibleDenoiserError("problem has no denoiser")
    if not getattr(D, "usable_in_solver", True):
        raise IncompatibleDenoiserError(
            f"{type(D).__name__} is a test fixture and cannot be used in a solver")


def bcred_run(problem, partition, config, lipschitz=None):
    """Block-coordinate RED.

    Each update picks a block ``i`` and sets
    ``x_i <- x_i - gamma * G_i(x)`` with
    ``G_i(x) = A_i^T (Ax - y) + tau (x_i - [D(x)]_i)``.  With
    ``cached_residual`` the residual ``r = Ax - y`` is carried along and
    refreshed by ``r <- r - gamma A_i G_i(x)`` instead of being recomputed.

    Returns
    -------
    x : ndarray
        Final iterate.
    trace : ConvergenceTrace
    """
    config = config.validated()
    _check_denoiser(problem)
    if not isinstance(partition, BlockPartition):
        raise TypeError("partition must be a BlockPartition")
    model, y, D = problem.model, problem.y, problem.denoiser
    if partition.n != model.n:
        raise DimensionMismatchError(
            f"partition covers n={partition.n}, model has n={model.n}")
    pad = None if config.pad is None else int(config.pad)
    if pad is not None and partition.kind != "tile-2d":
        raise IncompatibleDenoiserError("block-wise denoising needs a tile-2d partition")
    if config.check_distance and problem.x_star is None:
        raise ValueError("check_distance needs an oracle x_star")
    tau = float(config.tau)
    if lipschitz is None:
        lipschitz = estimate_lipschitz(model, partition)
    gamma, unsafe = _resolve_gamma(config, 1.0 / (lipschitz.max + 2.0 * tau),
                                   "1/(L_max + 2 tau)")

    ops = model.column_blocks(partition)
    blocks = partition.blocks
    selector = BlockSelector(config.selection, partition.n_blocks, config.seed)
    x = _initial_point(problem, config)
    r = model.apply(x) - y if config.cached_residual else None

    def G_fn(v):
        return operator_G(problem, v, tau, partition, pad)

    rec = _Recorder(problem, config, G_fn, gamma, lipschitz, unsafe)
    trace = rec.trace
    if config.record_updates:
        trace.update_residuals = []
        if problem.x_star is not None:
            trace.update_distances = []
    track_dist = config.check_distance or trace.update_distances is not None
    dist = float(np.linalg.norm(x - problem.x_star)) if track_dist else None

    stop = rec.record(0, x, force=True)
    k = 0
    for k in range(1, int(config.iterations) + 1):
        if stop:
            k -= 1
            break
        order = selector.epoch()
        trace.selection_order.extend(order)
        for i in order:
            idx = blocks[i]
            fwd_i, adj_i = ops[i]
            if trace.update_residuals is not None:
                G = G_fn(x)
                trace.update_residuals.append(float(G @ G))
            res = r if r is not None else model.apply(x) - y
            Gi = adj_i(res) + _block_residual(D, x, i, idx, tau, partition, pad)
            x[idx] = x[idx] - gamma * Gi
            if r is not None:
                r = r - gamma * fwd_i(Gi)
            if track_dist:
                d_new = float(np.linalg.norm(x - problem.x_star))
                if d_new > dist + 1e-12:
                    trace.distance_violations += 1
                    if config.check_distance:
                        trace.valid = False
                dist = d_new
                if trace.update_distances is not None:
                    trace.update_distances.append(d_new)
        stop = rec.record(k, x, force=k == int(config.iterations))
    if trace.k[-1] != k:
        rec.record(k, x, force=True)
    return x, trace


def red_full_run(problem, config, lipschitz=None):
    """Full-gradient RED: ``x <- x - gamma (grad g(x) + H(x))``.

    ``lipschitz`` may be a precomputed ``LipschitzInfo`` or a float ``L``;
    the guard is ``gamma <= 1/(L + 2 tau)``.
    """
    config = config.validated()
    _check_denoiser(problem)
    model, y, D = problem.model, problem.y, problem.denoiser
    tau = float(config.tau)
    if lipschitz is None:
        lam, _, _ = power_iteration(lambda v: model.adjoint(model.apply(v)), model.n)
        L = lam * LIPSCHITZ_SAFETY
    else:
        L = getattr(lipschitz, "global_", lipschitz)
    gamma, unsafe = _resolve_gamma(config, 1.0 / (L + 2.0 * tau), "1/(L + 2 tau)")

    x = _initial_point(problem, config)

    def G_fn(v):
        return model.adjoint(model.apply(v) - y) + D.residual(v, tau)

    rec = _Recorder(problem, config, G_fn, gamma, L, unsafe)
    G = G_fn(x)
    stop = rec.record(0, x, force=True, G=G)
    k = 0
    for k in range(1, int(config.iterations) + 1):
        if stop:
            k -= 1
            break
        x = x - gamma * G
        G = G_fn(x)
        stop = rec.record(k, x, force=k == int(config.iterations), G=G)
    if rec.trace.k[-1] != k:
        rec.record(k, x, force=True, G=G)
    return x, rec.trace


def pgm_run(problem, config, lipschitz=None):
    """Proximal gradient: ``x <- prox_{gamma h}(x - gamma grad g(x))``.

    Needs ``problem.regularizer`` with a ``prox(x, mu)`` method.  The
    trace residual is the squared gradient mapping
    ``||(x - x_next) / gamma||^2``.
    """
    config = config.validated()
    h = problem.regularizer
    if h is None or not hasattr(h, "prox"):
        raise IncompatibleDenoiserError("PGM needs a regularizer with a prox")
    model, y = problem.model, problem.y
    if lipschitz is None:
        lam, _, _ = power_iteration(lambda v: model.adjoint(model.apply(v)), model.n)
        L = lam * LIPSCHITZ_SAFETY
    else:
        L = getattr(lipschitz, "global_", lipschitz)
    gamma, unsafe = _resolve_gamma(config, 1.0 / L if L > 0 else math.inf, "1/L")

    def step(v):
        v_next = h.prox(v - gamma * model.adjoint(model.apply(v) - y), gamma)
        return v_next, (v - v_next) / gamma

    x = _initial_point(problem, config)
    rec = _Recorder(problem, config, None, gamma, L, unsafe)
    x_next, gm = step(x)
    stop = rec.record(0, x, force=True, G=gm)
    k = 0
    for k in range(1, int(config.iterations) + 1):
        if stop:
            k -= 1
            break
        x = x_next
        x_next, gm = step(x)
        stop = rec.record(k, x, force=k == int(config.iterations), G=gm)
    if rec.trace.k[-1] != k:
        rec.record(k, x, force=True, G=gm)
    return x, rec.trace


def _positive(**kw):
    for name, v in kw.items():
        if not v > 0:
            raise ValueError(f"{name} must be positive, got {v}")


def theorem1_bound(b, L_max, tau, gamma, R0, t):
    """``b (L_max + 2 tau) R0^2 / (gamma t)``: bound on the expected mean of
    ``||G(x^{k-1})||^2`` over ``t`` i.i.d. block updates."""
    _positive(b=b, L_max=L_max, tau=tau, gamma=gamma, R0=R0, t=t)
    return b * (L_max + 2.0 * tau) * R0 ** 2 / (gamma * t)


def theorem2_bound(b, gamma, R0, G0, tau, t):
    """``2 b R0^2 / (gamma t) + G0^2 / (2 tau)`` for prox denoisers.

    ``tau = inf`` gives the plain coordinate-descent bound.
    """
    _positive(b=b, gamma=gamma, R0=R0, G0=G0, tau=tau, t=t)
    return 2.0 * b * R0 ** 2 / (gamma * t) + G0 ** 2 / (2.0 * tau)


def theorem2_schedule(L_max, t):
    """``(tau, gamma) = (sqrt(t), 1 / (L_max + 2 sqrt(t)))``."""
    _positive(L_max=L_max, t=t)
    tau = math.sqrt(t)
    return tau, 1.0 / (L_max + 2.0 * tau)


def coordinate_descent_bound(b, gamma, R0, t):
    """``2 b R0^2 / (gamma t)`` for smooth ``h`` (gradient-step denoisers)."""
    _positive(b=b, gamma=gamma, R0=R0, t=t)
    return 2.0 * b * R0 ** 2 / (gamma * t)


def full_partition(n):
    """The trivial partition with a single block."""
    return contiguous_partition(n, 1)


def with_options(config, **changes):
    """Copy of ``config`` with fields replaced."""
    return replace(config, **changes)
