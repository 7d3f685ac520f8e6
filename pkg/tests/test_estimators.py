import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from bcred.denoisers import GradientStep, SoftThreshold
from bcred.estimators import BCRED, PGM, RED
from bcred.forward import FourierModel, radial_mask
from bcred.moreau import L1
from bcred.oracles import ridge_solution
from bcred.scenarios import ridge_scenario


@pytest.fixture(scope="module")
def ridge():
    return ridge_scenario()


def test_bcred_fit_predict(ridge):
    A = ridge.model.matrix
    est = BCRED(GradientStep(0.1, 1.0), tau=1.0, n_blocks=8, max_iter=2000, tol=1e-30)
    assert est.fit(A, ridge.y) is est
    assert np.linalg.norm(est.coef_ - ridge.x_ref) <= 1e-8 * np.linalg.norm(ridge.x_ref)
    assert np.allclose(est.predict(A), A @ est.coef_)
    assert est.gamma_ == pytest.approx(1 / (est.lipschitz_.L_max + 2.0))
    assert est.n_iter_ <= 2000


def test_red_estimator(ridge):
    est = RED(GradientStep(0.1, 1.0), max_iter=5000, tol=1e-30).fit(ridge.model.matrix, ridge.y)
    assert np.linalg.norm(est.coef_ - ridge.x_ref) <= 1e-8 * np.linalg.norm(ridge.x_ref)


def test_pgm_estimator_with_forward_model():
    F = FourierModel(radial_mask(8, 8, 4))
    x = np.zeros(64)
    x[[3, 20, 41]] = [1.0, -0.5, 2.0]
    est = PGM(L1(0.01), max_iter=500).fit(F, F.apply(x))
    assert est.coef_.shape == (64,)
    assert np.allclose(est.predict(F), F.apply(est.coef_))
    assert est.trace_.objective[-1] < est.trace_.objective[0]


def test_params_and_clone():
    est = BCRED(SoftThreshold(0.2), tau=3.0, n_blocks=4, selection="iid")
    params = est.get_params()
    assert params["tau"] == 3.0 and params["denoiser__threshold"] == 0.2
    c = clone(est).set_params(denoiser__threshold=0.5)
    assert c.denoiser.threshold == 0.5 and est.denoiser.threshold == 0.2


def test_not_fitted_and_validation(ridge):
    with pytest.raises(NotFittedError):
        BCRED(GradientStep()).predict(ridge.model.matrix)
    with pytest.raises(ValueError):
        BCRED(GradientStep()).fit(ridge.model.matrix, ridge.y[:-1])
    with pytest.raises(ValueError):
        BCRED().fit(ridge.model.matrix, ridge.y)


def test_score_is_r2(ridge):
    A = np.eye(6)
    y = np.arange(6.0)
    est = BCRED(GradientStep(1e-9, 1.0), n_blocks=3, max_iter=200).fit(A, y)
    assert est.score(A, y) == pytest.approx(1.0, abs=1e-6)
    assert np.allclose(ridge_solution(ridge.model, ridge.y, 0.1), ridge.x_ref)
