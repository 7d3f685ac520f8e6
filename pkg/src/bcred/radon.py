"""Parallel-beam Radon system matrix with exact line-length weights."""

import numpy as np

__all__ = ["radon_matrix"]


def radon_matrix(size, n_angles, n_detectors=None):
    """Dense ``(n_angles * n_detectors, size * size)`` projection matrix.

    Pixels are unit squares of a ``size x size`` grid centred at the origin
    (row-major, row 0 at the top).  Angles are ``a * pi / n_angles``; the
    detector bins have unit spacing and by default cover the image diagonal.
    Entry ``(ray, pixel)`` is the length of the ray inside the pixel.
    """
    N = int(size)
    if n_detectors is None:
        n_detectors = int(np.ceil(np.sqrt(2.0) * N))
    half = N / 2.0
    rows, cols = np.divmod(np.arange(N * N), N)
    x0 = cols - half
    x1 = x0 + 1.0
    y1 = half - rows
    y0 = y1 - 1.0
    offsets = (np.arange(n_detectors) - (n_detectors - 1) / 2.0)
    out = np.zeros((n_angles * n_detectors, N * N))
    for a in range(n_angles):
        th = a * np.pi / n_angles
        c, s = np.cos(th), np.sin(th)
        ux, uy = -s, c
        for d, off in enumerate(offsets):
            px, py = off * c, off * s
            lo = np.full(N * N, -np.inf)
            hi = np.full(N * N, np.inf)
            for p, u, a0, a1 in ((px, ux, x0, x1), (py, uy, y0, y1)):
                if abs(u) < 1e-15:
                    outside = (p < a0) | (p >= a1)
                    hi = np.where(outside, -np.inf, hi)
                else:
                    t0 = (a0 - p) / u
                    t1 = (a1 - p) / u
                    lo = np.maximum(lo, np.minimum(t0, t1))
                    hi = np.minimum(hi, np.maximum(t0, t1))
            out[a * n_detectors + d] = np.maximum(hi - lo, 0.0)
    return out
