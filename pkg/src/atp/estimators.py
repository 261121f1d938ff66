"""Scikit-learn style front doors for the pipeline.

TrajectoryAugmenter fits on a handful of demos and samples labeled
variations (KernelDensity-style fit/sample). TrajectoryAutoencoder is the
trainable model as a transformer: transform() encodes trajectories to
latent codes plus a goal estimate, inverse_transform() decodes that code
matrix back to trajectories, so the two compose with sklearn pipelines and
model-selection tooling.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .augmentation import AugmentationConfig, build_dataset
from .errors import ContractViolation
from .kinematics import default_chain
from .model import (
    TrainingConfig,
    build_model,
    dataset_kl_profile,
    decode,
    encode,
    softmax,
    train,
)
from .planner import PlanRequest, plan
from .projection import ProjectionConfig
from .trajectory import build_smoothness_operator
from .validation import as_float_array


def _as_demo_list(X):
    demos = [as_float_array(d, "demo") for d in X]
    if not demos:
        raise ContractViolation("need at least one demonstration")
    shape = demos[0].shape
    if any(d.shape != shape for d in demos) or len(shape) != 2:
        raise ContractViolation("demos must share one (T+1, d) shape")
    return demos


class TrajectoryAugmenter(BaseEstimator):
    """Expand demonstrations into a labeled training set.

    fit() memorizes the demos and builds the smoothness operator for their
    horizon; sample() draws goal-shifted, smoothly perturbed variations with
    exact forward-kinematics goal labels.
    """

    def __init__(self, chain=None, goal_sigma=0.15, perturbation_scale=2e-5,
                 n_samples=4000, seed=7):
        self.chain = chain
        self.goal_sigma = goal_sigma
        self.perturbation_scale = perturbation_scale
        self.n_samples = n_samples
        self.seed = seed

    def fit(self, X, y=None):
        self.chain_ = self.chain if self.chain is not None else default_chain()
        self.demos_ = _as_demo_list(X)
        self.horizon_ = self.demos_[0].shape[0] - 1
        self.operator_ = build_smoothness_operator(self.horizon_)
        return self

    def sample(self, n_samples=None, seed=None):
        """Draw labeled samples; returns a list of LabeledSample."""
        self._check_fitted()
        cfg = AugmentationConfig(
            goal_sigma=self.goal_sigma,
            perturbation_scale=self.perturbation_scale,
            n_samples=self.n_samples if n_samples is None else int(n_samples),
            seed=self.seed if seed is None else int(seed),
        )
        return build_dataset(self.chain_, self.operator_, self.demos_, cfg)

    def _check_fitted(self):
        if not hasattr(self, "demos_"):
            raise ContractViolation("TrajectoryAugmenter is not fitted yet")


class TrajectoryAutoencoder(BaseEstimator, TransformerMixin):
    """Goal-conditioned trajectory autoencoder with sklearn plumbing.

    fit(X, y): X holds trajectories as an (N, T+1, d) array (or a list of
    LabeledSample, in which case y may be omitted); y holds the matching
    end-effector goals. transform() returns the code matrix
    [mu_z | class probabilities | goal estimate]; inverse_transform()
    decodes such a matrix back to trajectories.
    """

    def __init__(self, chain=None, k_z=5, k_c=4, encoder_hidden=(300, 200),
                 decoder_hidden=(200, 300), epochs=250, batch_size=100,
                 learning_rate=5e-4, gamma=30.0, cz_max=5.0, cc_max=None,
                 capacity_ramp=0.6, tau=0.67, recon_weight=None,
                 goal_weight=100.0, random_state=0):
        self.chain = chain
        self.k_z = k_z
        self.k_c = k_c
        self.encoder_hidden = encoder_hidden
        self.decoder_hidden = decoder_hidden
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.gamma = gamma
        self.cz_max = cz_max
        self.cc_max = cc_max
        self.capacity_ramp = capacity_ramp
        self.tau = tau
        self.recon_weight = recon_weight
        self.goal_weight = goal_weight
        self.random_state = random_state

    def _training_config(self):
        return TrainingConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            gamma=self.gamma,
            cz_max=self.cz_max,
            cc_max=self.cc_max,
            capacity_ramp=self.capacity_ramp,
            tau=self.tau,
            recon_weight=self.recon_weight,
            goal_weight=self.goal_weight,
            seed=self.random_state,
        )

    def _samples_from(self, X, y):
        if y is None:
            return list(X)  # list of LabeledSample
        points = as_float_array(X, "X")
        goals = as_float_array(y, "y")
        if points.ndim != 3 or goals.ndim != 2 or points.shape[0] != goals.shape[0]:
            raise ContractViolation(
                "X must be (N, T+1, d) trajectories with matching (N, w) goals"
            )
        return points, goals

    def fit(self, X, y=None):
        self.chain_ = self.chain if self.chain is not None else default_chain()
        batch = self._samples_from(X, y)
        first = batch[0].points if y is None else X[0]
        n_steps = np.asarray(first).shape[0] - 1
        self.model_ = build_model(
            self.chain_,
            n_steps,
            k_z=self.k_z,
            k_c=self.k_c,
            encoder_hidden=tuple(self.encoder_hidden),
            decoder_hidden=tuple(self.decoder_hidden),
            seed=self.random_state,
        )
        cfg = self._training_config()
        if y is not None:
            points, goals = batch
            batch = (self.model_.flatten(points), goals)
        self.model_, self.history_ = train(self.model_, batch, cfg)
        self.kl_z_per_unit_, self.kl_z_, self.kl_c_ = dataset_kl_profile(self.model_, batch)
        return self

    def transform(self, X):
        """Encode trajectories into [mu_z | class probs | goal estimate]."""
        self._check_fitted()
        mu, _, logits, goal_est = encode(self.model_, np.asarray(X, dtype=float))
        return np.hstack([np.atleast_2d(mu), np.atleast_2d(softmax(logits)),
                          np.atleast_2d(goal_est)])

    def inverse_transform(self, Z):
        """Decode a code matrix produced by transform()."""
        self._check_fitted()
        Z = as_float_array(Z, "Z")
        single = Z.ndim == 1
        Z = np.atleast_2d(Z)
        k_z, k_c = self.model_.k_z, self.model_.k_c
        want = k_z + k_c + self.model_.workspace_dim
        if Z.shape[1] != want:
            raise ContractViolation(f"code matrix must have {want} columns")
        probs = Z[:, k_z : k_z + k_c]
        probs = probs / probs.sum(axis=1, keepdims=True)
        out = decode(self.model_, Z[:, :k_z], probs, Z[:, k_z + k_c :])
        return out[0] if single else out

    def predict(self, X):
        """Reconstruct trajectories (encode then decode)."""
        return self.inverse_transform(self.transform(X))

    def score(self, X, y=None):
        """Negative mean squared reconstruction error (higher is better)."""
        X = np.asarray(X, dtype=float)
        recon = self.predict(X)
        return -float(np.mean((recon - X) ** 2))

    def plan(self, z, c, goal, project=False, projection=None):
        """Decode one plan; see planner.plan for error semantics."""
        self._check_fitted()
        req = PlanRequest(
            z=np.asarray(z, dtype=float),
            c=c,
            x_g=np.asarray(goal, dtype=float),
            project=project,
            projection=projection or ProjectionConfig(),
        )
        return plan(self.model_, req)

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise ContractViolation("TrajectoryAutoencoder is not fitted yet")
