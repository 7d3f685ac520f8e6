import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bcred.metrics import MAX_SNR_DB, add_noise_at_input_snr, snr_db


def test_exact_noise_energy():
    yc = np.random.default_rng(0).standard_normal(30)
    ns = add_noise_at_input_snr(yc, 30.0, seed=4)
    e = ns.y - yc
    assert float(e @ e) == pytest.approx(float(yc @ yc) / 1000, rel=1e-12)


def test_huge_snr_is_capped():
    yc = np.ones(10)
    ns = add_noise_at_input_snr(yc, np.inf, seed=1)
    assert ns.input_snr_db == MAX_SNR_DB
    # the 1e-15 relative noise survives only up to one ulp per entry
    ulp = np.spacing(1.0) * np.sqrt(yc.size)
    assert np.linalg.norm(ns.y - yc) <= 1e-15 * np.linalg.norm(yc) + ulp


def test_deterministic():
    yc = np.arange(1.0, 9.0)
    a = add_noise_at_input_snr(yc, 20.0, seed=123).y
    b = add_noise_at_input_snr(yc, 20.0, seed=123).y
    assert np.array_equal(a, b)
    assert not np.array_equal(a, add_noise_at_input_snr(yc, 20.0, seed=124).y)


def test_zero_signal_rejected():
    with pytest.raises(ValueError):
        add_noise_at_input_snr(np.zeros(3), 10.0, 0)
    with pytest.raises(ValueError):
        snr_db(np.ones(3), np.zeros(3))


def test_snr_examples():
    ref = np.random.default_rng(1).standard_normal(20)
    assert snr_db(ref, ref) == np.inf
    d = np.random.default_rng(2).standard_normal(20)
    d *= np.linalg.norm(ref) / 10 / np.linalg.norm(d)
    assert snr_db(ref + d, ref) == pytest.approx(20.0, abs=1e-12)
    assert snr_db(np.zeros(20), ref) == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(snr=st.floats(-10, 120), seed=st.integers(0, 2 ** 63), n=st.integers(2, 50))
def test_roundtrip_and_permutation(snr, seed, n):
    rng = np.random.default_rng(seed % 1000)
    yc = rng.standard_normal(n)
    ns = add_noise_at_input_snr(yc, snr, seed)
    assert snr_db(ns.y, yc) == pytest.approx(snr, abs=1e-9)
    p = rng.permutation(n)
    assert snr_db(ns.y[p], yc[p]) == pytest.approx(snr_db(ns.y, yc), abs=1e-9)
