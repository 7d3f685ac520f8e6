import numpy as np
import pytest

from bcred.blocks import contiguous_partition
from bcred.checks import coordinate_descent_ridge
from bcred.denoisers import Expanding, GradientStep, Identity, SoftThreshold
from bcred.exceptions import (DimensionMismatchError, IncompatibleDenoiserError,
                              InvalidStepSizeError)
from bcred.forward import DenseModel, build_forward_model, estimate_lipschitz
from bcred.moreau import L1, Tikhonov
from bcred.oracles import pgm_reference
from bcred.scenarios import ridge_problem, ridge_scenario
from bcred.solvers import (TRACE_HEADER, BlockSelector, Problem, SolverConfig,
                           SplitMix64, bcred_run, coordinate_descent_bound,
                           objective, operator_G, pgm_run, red_full_run,
                           theorem1_bound, theorem2_bound, theorem2_schedule,
                           write_trace_csv)


@pytest.fixture(scope="module")
def ridge():
    return ridge_scenario()


def _cfg(**kw):
    kw.setdefault("record_wall_time", False)
    return SolverConfig(**kw)


def test_splitmix64_reference_values():
    # published outputs of SplitMix64 seeded with 0
    g = SplitMix64(0)
    assert [g.next_u64() for _ in range(3)] == [
        0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]


def test_selection_rules():
    assert BlockSelector("cyclic", 4).epoch() == [0, 1, 2, 3]
    s = BlockSelector("epoch-shuffle", 6, seed=3)
    for _ in range(5):
        assert sorted(s.epoch()) == list(range(6))
    a = BlockSelector("iid", 5, seed=9)
    b = BlockSelector("iid", 5, seed=9)
    ea = [a.epoch() for _ in range(3)]
    assert ea == [b.epoch() for _ in range(3)]
    assert all(0 <= i < 5 for e in ea for i in e)
    counts = np.bincount(sum((BlockSelector("iid", 4, 1).epoch() for _ in range(1)), []),
                         minlength=4)
    assert counts.sum() == 4
    with pytest.raises(ValueError):
        BlockSelector("random", 3)


def test_iid_is_roughly_uniform():
    s = BlockSelector("iid", 4, seed=0)
    draws = np.concatenate([s.epoch() for _ in range(5000)])
    freq = np.bincount(draws, minlength=4) / draws.size
    assert np.all(np.abs(freq - 0.25) < 0.01)


def test_operator_G_examples(ridge):
    x = np.random.default_rng(0).standard_normal(64)
    A, y = ridge.model, ridge.y
    p_id = Problem(A, y, Identity())
    assert np.allclose(operator_G(p_id, x, 1.0), A.adjoint(A.apply(x) - y), atol=1e-12)
    p = ridge_problem(ridge)
    assert np.linalg.norm(operator_G(p, ridge.x_ref, 1.0)) <= 1e-10
    p0 = Problem(A, np.zeros(A.m), SoftThreshold(0.3))
    assert np.array_equal(operator_G(p0, np.zeros(64), 2.0), np.zeros(64))


def test_operator_G_block_form(ridge):
    p = ridge_problem(ridge)
    x = np.random.default_rng(1).standard_normal(64)
    G = operator_G(p, x, 1.0)
    P = ridge.partition
    r = ridge.model.apply(x) - ridge.y
    for i, idx in enumerate(P.blocks):
        Gi = ridge.model.block_adjoint(P, i, r) + p.denoiser.residual(x, 1.0)[idx]
        assert np.allclose(Gi, G[idx], atol=1e-12)


def test_ridge_convergence(ridge):
    x, tr = bcred_run(ridge_problem(ridge), ridge.partition, _cfg(iterations=2000))
    assert np.linalg.norm(x - ridge.x_ref) / np.linalg.norm(ridge.x_ref) <= 1e-8
    assert len(tr.k) == len(tr.residual) == len(tr.objective) == len(tr.distance) == 2001
    assert tr.objective[-1] == pytest.approx(ridge.f_ref, rel=1e-12)


def test_trace_lengths_and_selection_order(ridge):
    _, tr = bcred_run(ridge_problem(ridge), ridge.partition,
                      _cfg(iterations=7, selection="epoch-shuffle", seed=2))
    assert tr.k == list(range(8))
    assert len(tr.selection_order) == 7 * 8
    assert tr.normalized_residual[0] == 1.0


def test_full_red_matches_bcred_oracle(ridge):
    x, _ = red_full_run(ridge_problem(ridge), _cfg(iterations=5000, stop_tol=1e-30))
    assert np.linalg.norm(x - ridge.x_ref) / np.linalg.norm(ridge.x_ref) <= 1e-8


def test_full_red_one_step(ridge):
    p = ridge_problem(ridge)
    x1, tr = red_full_run(p, _cfg(iterations=1))
    assert np.array_equal(x1, np.zeros(64) - tr.gamma * operator_G(p, np.zeros(64), 1.0))


def test_full_red_identity_converges_to_y():
    y = np.array([1.0, -2.0, 0.5])
    x, tr = red_full_run(Problem(DenseModel(np.eye(3)), y, Identity()),
                         _cfg(tau=0.5, iterations=200))
    assert np.allclose(x, y, atol=1e-12)
    assert tr.gamma == pytest.approx(1 / (1 + 1e-6 + 1.0))


def test_single_block_is_full_red(ridge):
    p = ridge_problem(ridge)
    P1 = contiguous_partition(64, 1)
    lip = estimate_lipschitz(ridge.model, P1)
    x1, t1 = bcred_run(p, P1, _cfg(iterations=100), lipschitz=lip)
    x2, t2 = red_full_run(p, _cfg(iterations=100), lipschitz=lip)
    assert np.array_equal(x1, x2)
    assert t1.residual == t2.residual


def test_cached_residual_matches(ridge):
    p = ridge_problem(ridge)
    for sel in ("cyclic", "iid", "epoch-shuffle"):
        x1, _ = bcred_run(p, ridge.partition, _cfg(iterations=100, selection=sel, seed=5))
        x2, _ = bcred_run(p, ridge.partition, _cfg(iterations=100, selection=sel, seed=5,
                                                   cached_residual=True))
        assert np.abs(x1 - x2).max() <= 1e-10
        assert np.linalg.norm(x1 - x2) <= 1e-10 * np.linalg.norm(x1)


def test_coordinate_descent_equivalence(ridge):
    p = ridge_problem(ridge)
    P = ridge.partition
    for sel in ("iid", "cyclic"):
        x, tr = bcred_run(p, P, _cfg(iterations=50, selection=sel, seed=11))
        ranges = [(int(b[0]), int(b[-1]) + 1) for b in P.blocks]
        ref = coordinate_descent_ridge(ridge.model.matrix, ridge.y, ridge.lam, tr.gamma,
                                       ranges, tr.selection_order)
        assert np.array_equal(x, ref)


def test_step_size_guard(ridge):
    p = ridge_problem(ridge)
    lip = estimate_lipschitz(ridge.model, ridge.partition)
    bound = 1 / (lip.max + 2.0)
    with pytest.raises(InvalidStepSizeError, match="invalid step-size"):
        bcred_run(p, ridge.partition, _cfg(gamma=bound * 1.01, iterations=1), lipschitz=lip)
    _, tr = bcred_run(p, ridge.partition, _cfg(gamma=bound * (1 + 1e-10), iterations=1),
                      lipschitz=lip)
    assert not tr.unsafe_step
    _, tr = bcred_run(p, ridge.partition, _cfg(gamma=bound * 2, iterations=1,
                                               allow_unsafe_step=True), lipschitz=lip)
    assert tr.unsafe_step
    with pytest.raises(InvalidStepSizeError):
        bcred_run(p, ridge.partition, _cfg(gamma=0.0, iterations=1), lipschitz=lip)


def test_rejects_fixture_and_mismatch(ridge):
    with pytest.raises(IncompatibleDenoiserError):
        bcred_run(Problem(ridge.model, ridge.y, Expanding()), ridge.partition, _cfg())
    with pytest.raises(DimensionMismatchError):
        bcred_run(ridge_problem(ridge), contiguous_partition(10, 2), _cfg())
    with pytest.raises(IncompatibleDenoiserError):
        bcred_run(ridge_problem(ridge), ridge.partition, _cfg(pad=2))


def test_distance_monotone_cyclic(ridge):
    cfg = _cfg(iterations=300, check_distance=True, record_updates=True)
    _, tr = bcred_run(ridge_problem(ridge), ridge.partition, cfg)
    d = np.array(tr.update_distances)
    assert tr.valid and tr.distance_violations == 0
    assert np.all(np.diff(d) <= 1e-12)


def test_distance_increase_flags_trace(ridge):
    # with i.i.d. selection the distance can grow on a single update
    cfg = _cfg(iterations=5, selection="iid", seed=3, check_distance=True)
    _, tr = bcred_run(ridge_problem(ridge), ridge.partition, cfg)
    assert tr.distance_violations >= 1 and not tr.valid


def test_fixed_point_consistency(ridge):
    p = ridge_problem(ridge)
    x, tr = bcred_run(p, ridge.partition, _cfg(iterations=3000, stop_tol=1e-10))
    assert tr.normalized_residual[-1] <= 1e-10
    x_next, _ = bcred_run(p, ridge.partition, _cfg(iterations=1, x0=x))
    G = np.sqrt(tr.residual[-1])
    assert np.linalg.norm(x_next - x) <= tr.gamma * np.sqrt(ridge.partition.n_blocks) * G


def test_bound_arithmetic():
    assert theorem1_bound(16, 1.0, 1.0, 1 / 3, 1.0, 100) == pytest.approx(1.44)
    L, tau = 3.0, 0.5
    assert theorem1_bound(1, L, tau, 1 / (L + 2 * tau), 2.0, 10) == pytest.approx(
        (L + 2 * tau) ** 2 * 4 / 10)
    assert theorem2_bound(1, 1.0, 1.0, 1.0, 1.0, 1) == pytest.approx(2.5)
    assert theorem2_bound(3, 0.2, 1.5, 4.0, np.inf, 7) == pytest.approx(
        coordinate_descent_bound(3, 0.2, 1.5, 7))
    tau, gamma = theorem2_schedule(2.0, 16)
    assert (tau, gamma) == (4.0, 1 / 10)
    with pytest.raises(ValueError):
        theorem1_bound(1, 1.0, 1.0, 0.0, 1.0, 1)
    with pytest.raises(ValueError):
        theorem2_bound(1, 1.0, 1.0, 1.0, -1.0, 1)


def test_coordinate_descent_bound_tikhonov(ridge):
    p = ridge_problem(ridge)
    P = ridge.partition
    lip = estimate_lipschitz(ridge.model, P)
    R0 = np.linalg.norm(ridge.x_ref)
    for t in (80, 800):
        gaps = []
        for s in range(20):
            x, tr = bcred_run(p, P, _cfg(iterations=t // P.n_blocks, selection="iid",
                                         seed=s, trace_every=10 ** 6), lipschitz=lip)
            gaps.append(objective(p, x) - ridge.f_ref)
        assert np.mean(gaps) <= coordinate_descent_bound(P.n_blocks, tr.gamma, R0, t)


def test_pgm_reduces_to_gradient_descent(ridge):
    prob = Problem(ridge.model, ridge.y, regularizer=L1(0.0))
    x1, tr = pgm_run(prob, _cfg(iterations=3))
    x = np.zeros(64)
    for _ in range(3):
        x = x - tr.gamma * ridge.model.adjoint(ridge.model.apply(x) - ridge.y)
    assert np.allclose(x1, x, atol=1e-14)


def test_pgm_small_lasso_against_long_run():
    A = build_forward_model({"kind": "gaussian-random"}, m=4, n=8, seed=0)
    y = np.random.default_rng(1).standard_normal(4)
    h = L1(0.05)
    prob = Problem(A, y, regularizer=h)
    x, tr = pgm_run(prob, _cfg(iterations=20000))
    _, f_ref = pgm_reference(A, y, h, 10 ** 6)
    assert objective(prob, x) == pytest.approx(f_ref, abs=1e-9)
    assert np.all(np.diff(tr.objective) <= 1e-15)


def test_pgm_rejects_zero_step_and_missing_prox(ridge):
    with pytest.raises(InvalidStepSizeError):
        pgm_run(Problem(ridge.model, ridge.y, regularizer=Tikhonov(0.1)),
                _cfg(gamma=0.0, iterations=1))
    with pytest.raises(IncompatibleDenoiserError):
        pgm_run(Problem(ridge.model, ridge.y, denoiser=GradientStep()), _cfg())


def test_trace_csv(tmp_path, ridge):
    _, tr = bcred_run(Problem(ridge.model, ridge.y, Identity()), ridge.partition,
                      _cfg(iterations=3))
    write_trace_csv(tr, tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == ",".join(TRACE_HEADER)
    assert len(lines) == 5
    assert lines[1].startswith("0,") and lines[1].endswith(",,,")
    _, tr = bcred_run(Problem(ridge.model, ridge.y, Identity()), ridge.partition,
                      SolverConfig(iterations=2))
    write_trace_csv(tr, tmp_path / "w.csv")
    assert not (tmp_path / "w.csv").read_text().splitlines()[1].endswith(",")
