import math

import numpy as np
import pytest
from scipy import stats

from ua3dmot.geometry import wrap_angle
from ua3dmot.sim import ScenarioConfig, emit_samples, generate, noise_covariance

QUIET = dict(pos_std_levels=(0.0,), size_std_levels=(0.0,), yaw_std_levels=(0.0,), dropout=0.0, clutter_rate=0.0)


def test_zero_noise_reproduces_ground_truth():
    scn = generate(ScenarioConfig(n_frames=20, **QUIET))
    for g, d in zip(scn.gt, scn.detections):
        assert [x.box for x in g] == [x.box for x in d]


def test_full_dropout_leaves_clutter_only():
    scn = generate(ScenarioConfig(n_frames=50, dropout=1.0, clutter_rate=2.0))
    n = sum(len(f) for f in scn.detections)
    assert n > 0
    assert all(d.score < 0.6 for f in scn.detections for d in f)


def test_same_seed_same_scenario():
    a, b = generate(ScenarioConfig(seed=9, n_frames=30)), generate(ScenarioConfig(seed=9, n_frames=30))
    assert a.gt == b.gt
    assert all(x.box == y.box and x.score == y.score for fa, fb in zip(a.detections, b.detections) for x, y in zip(fa, fb))
    c = generate(ScenarioConfig(seed=10, n_frames=30))
    assert a.gt != c.gt


def test_objects_stay_in_bounds():
    cfg = ScenarioConfig(seed=2, n_frames=300, x_bounds=(-15, 15), y_bounds=(0, 30))
    for f in generate(cfg).gt:
        for g in f:
            assert -15 <= g.box.x <= 15 and 0 <= g.box.y <= 30


def test_heteroscedastic_levels():
    scn = generate(ScenarioConfig(n_frames=1))
    big = [np.trace(scn.sigma_true[k][:2, :2]) for k in (2, 4)]
    small = [np.trace(scn.sigma_true[k][:2, :2]) for k in (1, 3)]
    assert min(big) > 50 * max(small)


def test_noise_covariance_shape():
    cov = noise_covariance(1.0, 0.2, 0.1, heading=math.pi / 2)
    # along-heading variance lands on y when the object faces +y
    assert cov[1, 1] == pytest.approx(1.0) and cov[0, 0] == pytest.approx(0.25)
    assert cov[2, 2] == pytest.approx(0.25) and cov[6, 6] == pytest.approx(0.01)


def test_noise_calibration():
    cfg = ScenarioConfig(
        n_objects=1, n_frames=20_000, pos_std_levels=(0.5,), size_std_levels=(0.1,), yaw_std_levels=(0.05,), dropout=0.0, clutter_rate=0.0
    )
    scn = generate(cfg)
    resid = np.array([d.box.to_array() - g.box.to_array() for gf, df in zip(scn.gt, scn.detections) for g, d in zip(gf, df)])
    resid[:, 6] = [wrap_angle(a) for a in resid[:, 6]]
    emp = np.cov(resid.T)
    sigma = scn.sigma_true[1]
    assert np.linalg.norm(emp - sigma) / np.linalg.norm(sigma) < 0.05


def test_clutter_is_poisson():
    rate = 0.5
    scn = generate(ScenarioConfig(n_objects=0, n_frames=1000, clutter_rate=rate))
    counts = np.array([len(f) for f in scn.detections])
    observed = np.array([np.sum(counts == k) for k in range(3)] + [np.sum(counts >= 3)])
    pmf = stats.poisson.pmf(np.arange(3), rate)
    expected = 1000 * np.append(pmf, 1 - pmf.sum())
    assert stats.chisquare(observed, expected).pvalue > 0.01


def test_emit_samples():
    scn = generate(ScenarioConfig(n_frames=3, clutter_rate=0.0, dropout=0.0))
    one = emit_samples(scn, 1)
    assert all(len(f) == 1 for f in one)
    quiet = generate(ScenarioConfig(n_frames=3, **QUIET))
    many = emit_samples(quiet, 5)
    for f in many:
        assert all([d.box for d in s] == [d.box for d in f[0]] for s in f)
    with pytest.raises(ValueError):
        emit_samples(scn, 0)


def test_config_validation():
    with pytest.raises(ValueError):
        ScenarioConfig(x_bounds=(0, 5))
    with pytest.raises(ValueError):
        ScenarioConfig(dropout=1.5)
    with pytest.raises(ValueError):
        ScenarioConfig(pos_std_levels=(0.1,))
