"""Moreau envelopes of prox-friendly convex regularizers.

For ``mu > 0`` the envelope is
``h_mu(x) = min_z 0.5 ||z - x||^2 + mu h(z)``, attained at
``p = prox_{mu h}(x)``, with gradient ``x - p``.  ``h_mu / mu`` is a smooth
lower approximation of ``h`` whose error is at most ``mu G^2 / 2`` when the
subgradients of ``h`` are bounded by ``G``.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import check_scalar, check_vector
from .denoisers import soft_threshold, tv1d_prox, tv1d_value

__all__ = [
    "SmoothableFunction",
    "L1",
    "TV1D",
    "Tikhonov",
    "moreau_value",
    "moreau_gradient",
    "envelope_gap",
    "smoothed_objective",
    "smoothed_gradient",
]


@dataclass(frozen=True)
class SmoothableFunction:
    """Closed, proper, convex ``h >= 0`` with ``h(0) = 0`` and an exact prox."""

    lam: float

    kind = "abstract"

    def __post_init__(self):
        check_scalar(self.lam, "lam", min_val=0.0)

    def value(self, x):
        raise NotImplementedError

    def prox(self, x, mu):
        raise NotImplementedError

    def subgradient_bound(self, n, center=None, radius=None):
        """Bound ``G`` on ``||g||`` for ``g`` in the subdifferential.

        Valid everywhere for ``l1`` and ``tv1d``; for ``tikhonov`` it holds on
        the ball of ``radius`` around ``center``.
        """
        raise NotImplementedError

    def __call__(self, x):
        return self.value(x)


@dataclass(frozen=True)
class L1(SmoothableFunction):
    """``h(x) = lam * ||x||_1``."""

    kind = "l1"

    def value(self, x):
        return self.lam * float(np.abs(x).sum())

    def prox(self, x, mu):
        return soft_threshold(x, mu * self.lam)

    def subgradient_bound(self, n, center=None, radius=None):
        return self.lam * np.sqrt(n)


@dataclass(frozen=True)
class TV1D(SmoothableFunction):
    """``h(x) = lam * sum_k |x[k+1] - x[k]|``."""

    kind = "tv1d"

    def value(self, x):
        return self.lam * tv1d_value(x)

    def prox(self, x, mu):
        return tv1d_prox(x, mu * self.lam)

    def subgradient_bound(self, n, center=None, radius=None):
        return 2.0 * self.lam * np.sqrt(n)


@dataclass(frozen=True)
class Tikhonov(SmoothableFunction):
    """``h(x) = (lam / 2) ||x||^2``."""

    kind = "tikhonov"

    def value(self, x):
        x = np.asarray(x, dtype=np.float64)
        return 0.5 * self.lam * float(x @ x)

    def prox(self, x, mu):
        return np.asarray(x, dtype=np.float64) / (1.0 + mu * self.lam)

    def subgradient_bound(self, n, center=None, radius=None):
        if radius is None:
            raise ValueError("tikhonov subgradients are bounded only on a ball")
        c = 0.0 if center is None else float(np.linalg.norm(center))
        return self.lam * (c + float(radius))


def _mu(mu):
    return check_scalar(mu, "mu", min_val=0.0, include_min=False)


def moreau_value(h, mu, x):
    """``h_mu(x) = 0.5 ||p - x||^2 + mu h(p)`` with ``p = prox_{mu h}(x)``."""
    mu = _mu(mu)
    x = check_vector(x)
    p = h.prox(x, mu)
    d = p - x
    return 0.5 * float(d @ d) + mu * h.value(p)


def moreau_gradient(h, mu, x):
    """``grad h_mu(x) = x - prox_{mu h}(x)``; 1-Lipschitz in ``x``."""
    mu = _mu(mu)
    x = check_vector(x)
    return x - h.prox(x, mu)


def envelope_gap(h, mu, x):
    """``h(x) - h_mu(x) / mu``, which lies in ``[0, mu G^2 / 2]``."""
    mu = _mu(mu)
    x = check_vector(x)
    return h.value(x) - moreau_value(h, mu, x) / mu


def smoothed_objective(model, y, h, tau, x):
    """``g(x) + tau * h_{1/tau}(x)`` for ``g(x) = 0.5 ||Ax - y||^2``.

    Its gradient is ``grad g(x) + tau (x - prox_{h/tau}(x))``, the RED
    operator of the prox denoiser ``prox_{h/tau}``.
    """
    tau = check_scalar(tau, "tau", min_val=0.0, include_min=False)
    x = check_vector(x, model.n)
    r = model.apply(x) - y
    return 0.5 * float(r @ r) + tau * moreau_value(h, 1.0 / tau, x)


def smoothed_gradient(model, y, h, tau, x):
    tau = check_scalar(tau, "tau", min_val=0.0, include_min=False)
    x = check_vector(x, model.n)
    return model.adjoint(model.apply(x) - y) + tau * moreau_gradient(h, 1.0 / tau, x)
