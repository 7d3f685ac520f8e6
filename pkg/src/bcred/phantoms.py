"""Deterministic synthetic test signals."""

import numpy as np

__all__ = ["piecewise_constant_1d", "shepp_like"]


def piecewise_constant_1d(n, seed=0, n_pieces=None):
    """Piecewise-constant signal in [0, 1] with random jump locations."""
    rng = np.random.default_rng(seed)
    n = int(n)
    if n_pieces is None:
        n_pieces = max(1, n // 8)
    n_pieces = min(n_pieces, n)
    cuts = np.sort(rng.choice(np.arange(1, n), size=n_pieces - 1, replace=False)) \
        if n_pieces > 1 else np.array([], dtype=int)
    levels = rng.uniform(0.0, 1.0, size=n_pieces)
    x = np.empty(n)
    bounds = np.concatenate(([0], cuts, [n]))
    for lvl, a, b in zip(levels, bounds[:-1], bounds[1:]):
        x[a:b] = lvl
    return x


def shepp_like(height, width, seed=0, n_blobs=6):
    """Head-like image: a bright outer ellipse with random elliptical blobs.

    Values lie in [0, 1].
    """
    rng = np.random.default_rng(seed)
    H, W = int(height), int(width)
    yy, xx = np.mgrid[0:H, 0:W]
    u = (xx + 0.5) / W * 2.0 - 1.0
    v = (yy + 0.5) / H * 2.0 - 1.0
    img = np.zeros((H, W))
    img[(u / 0.85) ** 2 + (v / 0.95) ** 2 <= 1.0] = 0.8
    img[(u / 0.78) ** 2 + (v / 0.88) ** 2 <= 1.0] = 0.2
    for _ in range(n_blobs):
        cx, cy = rng.uniform(-0.5, 0.5, size=2)
        a, b = rng.uniform(0.08, 0.3, size=2)
        phi = rng.uniform(0.0, np.pi)
        du, dv = u - cx, v - cy
        ru = du * np.cos(phi) + dv * np.sin(phi)
        rv = -du * np.sin(phi) + dv * np.cos(phi)
        inside = (ru / a) ** 2 + (rv / b) ** 2 <= 1.0
        img[inside] = rng.uniform(0.3, 1.0)
    return img
