import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import solve_discrete_are

from conftest import det, psd_matrices
from oracles import scalar_kalman
from ua3dmot.geometry import Box7
from ua3dmot.kalman import (
    H,
    MEAS_TO_STATE,
    STATE_YAW,
    KalmanState,
    NoiseConfig,
    SingularInnovationError,
    default_initial_cov,
    default_process_noise,
    init_track_state,
    predict,
    transform_uncertainty,
    transition_matrix,
    update,
)

Z = Box7(1.0, 2.0, 0.75, 1.8, 4.2, 1.5, 0.4)


def state_at(box: Box7, cov=None, vel=(0.0, 0.0, 0.0)):
    mean = np.zeros(10)
    mean[MEAS_TO_STATE] = box.to_array()
    mean[7:] = vel
    return KalmanState(mean, default_initial_cov() if cov is None else cov)


def test_h_maps_box_order_onto_state():
    mean = np.arange(10.0)
    # state (x, y, z, r, w, l, h, ...) read back as (x, y, z, w, l, h, r)
    np.testing.assert_array_equal(H @ mean, [0, 1, 2, 4, 5, 6, 3])
    assert MEAS_TO_STATE[6] == STATE_YAW
    assert state_at(Z).box() == Z


def test_transform_examples():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(7, 7))
    sigma = a @ a.T
    np.testing.assert_array_equal(transform_uncertainty(sigma, 1.0, 0.0), np.eye(7))
    np.testing.assert_allclose(transform_uncertainty(np.zeros((7, 7)), 0.6, 5.0), 0.6 * np.eye(7))
    np.testing.assert_allclose(transform_uncertainty(0.1 * np.eye(7), 0.6, 5.0), 1.1 * np.eye(7))


def test_transform_rejects_bad_sigma():
    bad = np.eye(7)
    bad[0, 1] = 0.5
    with pytest.raises(ValueError, match="symmetric"):
        transform_uncertainty(bad, 0.6, 5.0)
    with pytest.raises(ValueError, match="PSD"):
        transform_uncertainty(-np.eye(7), 0.6, 5.0)
    with pytest.raises(ValueError):
        transform_uncertainty(np.eye(3), 0.6, 5.0)


@settings(max_examples=100, deadline=None)
@given(psd_matrices(), st.floats(0, 1), st.floats(0, 50))
def test_transform_eigenvalue_bound(sigma, alpha, beta):
    out = transform_uncertainty(sigma, alpha, beta)
    assert np.allclose(out, out.T)
    lo = np.linalg.eigvalsh(sigma)[0]
    scale = max(1.0, beta * float(np.abs(sigma).max()))
    assert np.linalg.eigvalsh(out)[0] >= alpha + beta * lo - 1e-12 * scale


def test_noise_config_validation():
    with pytest.raises(ValueError):
        NoiseConfig(alpha=0.0, beta=0.0)
    with pytest.raises(ValueError):
        NoiseConfig(alpha=-1.0)
    with pytest.raises(ValueError):
        NoiseConfig(dt=0.0)
    with pytest.raises(ValueError):
        NoiseConfig(process_noise=-np.eye(10))


def test_predict_zero_velocity():
    s = state_at(Z)
    out = predict(s, default_process_noise())
    np.testing.assert_array_equal(out.mean, s.mean)
    np.testing.assert_allclose(out.cov, transition_matrix() @ s.cov @ transition_matrix().T + default_process_noise())


def test_predict_constant_velocity():
    s = state_at(Box7(1.0, 0, 0, 1, 1, 1, 0), vel=(2.0, -1.0, 0.5))
    out = predict(s)
    assert out.mean[0] == 3.0 and out.mean[1] == -1.0 and out.mean[2] == 0.5
    assert predict(s, dt=0.5).mean[0] == 2.0


def test_huge_noise_ignores_measurement():
    prior = state_at(Box7(0, 0, 0, 2, 4, 1.5, 0.1), cov=np.eye(10))
    post = update(prior, Z, 1e9 * np.eye(7))
    np.testing.assert_allclose(post.mean, prior.mean, atol=1e-3)


def test_tiny_noise_snaps_to_measurement():
    prior = state_at(Box7(0, 0, 0, 2, 4, 1.5, 0.1), cov=np.eye(10))
    post = update(prior, Z, 1e-9 * np.eye(7))
    np.testing.assert_allclose(post.box().to_array(), Z.to_array(), atol=1e-3)


def test_scalar_closed_form():
    prior = state_at(Box7(0, 0, 0, 2, 4, 1.5, 0.0), cov=np.eye(10))
    z = Box7(2.0, 0, 0, 2, 4, 1.5, 0.0)
    post = update(prior, z, np.eye(7))
    m, v = scalar_kalman(0.0, 1.0, 2.0, 1.0)
    assert post.mean[0] == pytest.approx(m) == pytest.approx(1.0)
    assert post.cov[0, 0] == pytest.approx(v) == pytest.approx(0.5)


def test_yaw_residual_is_wrapped():
    prior = state_at(Box7(0, 0, 0, 2, 4, 1.5, math.pi - 0.05), cov=np.eye(10))
    z = Box7(0, 0, 0, 2, 4, 1.5, -math.pi + 0.05)
    post = update(prior, z, np.eye(7))
    # the estimate moves across the branch cut, not through zero
    assert abs(post.box().r) > math.pi - 0.05


def test_opposite_heading_flips_track():
    prior = state_at(Box7(0, 0, 0, 2, 4, 1.5, 0.0), cov=np.eye(10))
    z = Box7(0, 0, 0, 2, 4, 1.5, math.pi - 0.1)
    post = update(prior, z, np.eye(7))
    assert abs(abs(post.box().r) - math.pi) < 0.1


def test_singular_innovation_raises():
    prior = KalmanState(np.zeros(10), np.zeros((10, 10)))
    r = np.zeros((7, 7))
    r[0, 0] = 1.0
    r[0, 1] = r[1, 0] = 1.0  # off-diagonal mass makes S indefinite despite the diagonal floor
    with pytest.raises(SingularInnovationError):
        update(prior, Z, r)


def test_zero_noise_uses_floor():
    prior = state_at(Box7(0, 0, 0, 2, 4, 1.5, 0.0), cov=np.zeros((10, 10)))
    post = update(prior, Z, np.zeros((7, 7)))
    assert np.all(np.isfinite(post.mean))


@pytest.mark.parametrize("k", [1.5, 4.0, 100.0])
def test_inflating_noise_stays_closer_to_prior(k):
    rng = np.random.default_rng(5)
    prior = state_at(Box7(0, 0, 0, 2, 4, 1.5, 0.0), cov=np.diag(rng.uniform(0.5, 2, 10)))
    z = Box7(1.0, -1.0, 0.5, 2.5, 3.5, 1.9, 0.3)
    r = np.diag(rng.uniform(0.1, 1.0, 7))
    a = update(prior, z, r)
    b = update(prior, z, k * r)
    obs = MEAS_TO_STATE
    assert np.all(np.abs(b.mean[obs] - prior.mean[obs]) < np.abs(a.mean[obs] - prior.mean[obs]))


def test_riccati_steady_state():
    s = state_at(Box7(0, 0, 0, 2, 4, 1.5, 0.0))
    q = default_process_noise()
    for _ in range(500):
        s = predict(s, q)
        prior = s.cov
        s = update(s, Z, np.eye(7))
    f2 = np.array([[1.0, 1.0], [0.0, 1.0]])
    h2 = np.array([[1.0, 0.0]])
    expected = solve_discrete_are(f2.T, h2.T, np.diag([0.0, 0.01]), np.eye(1))
    np.testing.assert_allclose(prior[np.ix_([0, 7], [0, 7])], expected, atol=1e-6)


def test_long_run_stays_psd():
    rng = np.random.default_rng(77)
    s = state_at(Z)
    for _ in range(1000):
        s = predict(s)
        a = rng.normal(size=(7, 7)) * rng.uniform(1e-3, 2.0)
        a[:, rng.integers(0, 8):] = 0.0
        z = Box7.from_array(Z.to_array() + rng.normal(0, 0.3, 7) * [1, 1, 1, 0.1, 0.1, 0.1, 1])
        s = update(s, z, transform_uncertainty(a @ a.T, rng.uniform(0, 1), rng.uniform(0, 10)))
        assert np.max(np.abs(s.cov - s.cov.T)) <= 1e-9
        assert np.linalg.eigvalsh(s.cov)[0] >= -1e-9


def test_init_from_detection():
    s = init_track_state(det(0.0, w=1.8, l=4.0, h=1.5), NoiseConfig())
    assert np.all(s.mean[7:] == 0)
    assert s.mean[0] == 0 and s.mean[4] == 1.8
    np.testing.assert_array_equal(s.cov, default_initial_cov())
    assert s.cov[7, 7] == 1000.0 > s.cov[0, 0]


def test_init_with_sigma():
    cfg = NoiseConfig(alpha=0.6, beta=5.0, use_sigma_for_init=True)
    s = init_track_state(det(0.0, cov=np.eye(7)), cfg)
    block = s.cov[np.ix_(MEAS_TO_STATE, MEAS_TO_STATE)]
    np.testing.assert_allclose(block, 5.6 * np.eye(7))
    assert s.cov[8, 8] == 1000.0
