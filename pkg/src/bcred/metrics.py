"""Noise synthesis at a prescribed input SNR and reconstruction SNR."""

from dataclasses import dataclass

import numpy as np

from ._validation import check_vector

__all__ = ["NoisySystem", "add_noise_at_input_snr", "snr_db", "MAX_SNR_DB"]

MAX_SNR_DB = 300.0


@dataclass(frozen=True)
class NoisySystem:
    y: np.ndarray
    y_clean: np.ndarray
    input_snr_db: float
    noise_seed: int


def add_noise_at_input_snr(y_clean, snr_db, seed):
    """Add white Gaussian noise rescaled to hit ``snr_db`` exactly.

    A standard normal draw ``e0`` is rescaled to
    ``||e|| = ||y_clean|| / 10^(snr_db / 20)``, so the realized SNR equals the
    request up to rounding.  Requests above 300 dB (including ``inf``) are
    capped at 300 dB.
    """
    y_clean = check_vector(y_clean, name="y_clean").copy()
    ref = float(np.linalg.norm(y_clean))
    if ref == 0.0:
        raise ValueError("cannot set an input SNR for a zero clean signal")
    snr = min(float(snr_db), MAX_SNR_DB)
    rng = np.random.default_rng(seed)
    e0 = rng.standard_normal(y_clean.shape[0])
    e = e0 * (ref / (float(np.linalg.norm(e0)) * 10.0 ** (snr / 20.0)))
    return NoisySystem(y=y_clean + e, y_clean=y_clean, input_snr_db=snr,
                       noise_seed=seed)


def snr_db(estimate, reference):
    """``10 log10(||ref||^2 / ||ref - est||^2)``; ``inf`` on an exact match."""
    reference = check_vector(reference, name="reference")
    estimate = check_vector(estimate, reference.shape[0], name="estimate")
    num = float(reference @ reference)
    if num == 0.0:
        raise ValueError("reference signal is zero")
    err = reference - estimate
    den = float(err @ err)
    if den == 0.0:
        return float("inf")
    return 10.0 * np.log10(num / den)
