import numpy as np
import pytest
from sklearn.base import clone

from atp.augmentation import generate_demos
from atp.errors import ContractViolation
from atp.estimators import TrajectoryAugmenter, TrajectoryAutoencoder
from atp.kinematics import default_chain

CHAIN = default_chain()
T = 9


@pytest.fixture(scope="module")
def demos():
    return generate_demos(CHAIN, T, 2, 2, seed=3)


def small_autoencoder(**kw):
    defaults = dict(
        k_z=3,
        k_c=3,
        encoder_hidden=(24, 16),
        decoder_hidden=(16, 24),
        epochs=3,
        batch_size=16,
        random_state=0,
    )
    defaults.update(kw)
    return TrajectoryAutoencoder(**defaults)


def test_augmenter_get_params_and_clone_roundtrip():
    aug = TrajectoryAugmenter(goal_sigma=0.2, n_samples=10, seed=5)
    params = aug.get_params()
    assert params["goal_sigma"] == 0.2 and params["n_samples"] == 10
    cloned = clone(aug)
    assert cloned.get_params() == params


def test_augmenter_fit_sample(demos):
    aug = TrajectoryAugmenter(n_samples=25, seed=5).fit(demos)
    samples = aug.sample()
    assert len(samples) == 25
    assert samples[0].points.shape == demos[0].shape
    again = aug.sample()
    for a, b in zip(samples, again):
        assert np.array_equal(a.points, b.points)


def test_augmenter_sample_before_fit_raises():
    with pytest.raises(ContractViolation):
        TrajectoryAugmenter().sample()


def test_autoencoder_params_clone_and_fit(demos):
    est = small_autoencoder()
    cloned = clone(est)
    assert cloned.get_params() == est.get_params()

    samples = TrajectoryAugmenter(n_samples=40, seed=1).fit(demos).sample()
    est.fit(samples)
    assert hasattr(est, "model_")
    assert len(est.history_) == 3
    assert est.kl_z_per_unit_.shape == (3,)


def test_autoencoder_transform_inverse_shapes(demos):
    samples = TrajectoryAugmenter(n_samples=30, seed=2).fit(demos).sample()
    est = small_autoencoder().fit(samples)
    X = np.stack([s.points for s in samples[:7]])
    codes = est.transform(X)
    assert codes.shape == (7, 3 + 3 + CHAIN.workspace_dim)
    recon = est.inverse_transform(codes)
    assert recon.shape == X.shape
    assert np.all(np.abs(recon) <= np.pi)
    assert est.predict(X).shape == X.shape
    assert np.isfinite(est.score(X))


def test_autoencoder_fit_with_array_interface(demos):
    samples = TrajectoryAugmenter(n_samples=30, seed=4).fit(demos).sample()
    X = np.stack([s.points for s in samples])
    y = np.stack([s.goal for s in samples])
    est = small_autoencoder().fit(X, y)
    assert est.model_.k_z == 3


def test_autoencoder_plan(demos):
    samples = TrajectoryAugmenter(n_samples=30, seed=6).fit(demos).sample()
    est = small_autoencoder().fit(samples)
    result = est.plan(z=np.zeros(3), c=0, goal=samples[0].goal)
    assert result.points.shape == demos[0].shape


def test_autoencoder_unfitted_guards():
    est = small_autoencoder()
    with pytest.raises(ContractViolation):
        est.transform(np.zeros((1, T + 1, 3)))
    with pytest.raises(ContractViolation):
        est.plan(np.zeros(3), 0, np.array([0.5, 0.4]))
