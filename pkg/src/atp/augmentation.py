"""Scripted demonstrations and dataset synthesis.

A handful of scripted demos is expanded into a training set by (a) drawing a
goal-configuration shift and spreading it over the trajectory as a smooth
ramp and (b) adding endpoint-preserving smooth noise around a uniformly
chosen demo. Every sample is labeled with the end-effector position of its
own final row, so goal labels stay exact no matter what the perturbations
did.
"""

import json
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, DemoConstructionError
from .kinematics import forward_kinematics
from .trajectory import propagate_goal_shift
from .validation import as_float_array, check_trajectory

HOME_FIRST_JOINT = np.pi / 2
HOME_OTHER_JOINTS = -np.pi / 4


@dataclass
class AugmentationConfig:
    """Knobs of the dataset synthesis.

    goal_sigma is the per-joint standard deviation of the final-row shift
    (radians, scalar broadcast to all joints). perturbation_scale multiplies
    the inverse squared-difference covariance of the whole-trajectory noise;
    note that covariance grows steeply with the horizon, so useful values are
    small (~2e-5 for 50-row trajectories).
    """

    goal_sigma: float | np.ndarray = 0.15
    perturbation_scale: float = 2e-5
    n_samples: int = 4000
    seed: int = 7

    def sigma_vector(self, dof):
        sigma = np.atleast_1d(as_float_array(self.goal_sigma, "goal_sigma"))
        if sigma.size == 1:
            sigma = np.full(dof, sigma[0])
        if sigma.size != dof or np.any(sigma < 0):
            raise ContractViolation("goal_sigma must be >= 0 with one entry per joint")
        return sigma

    def validate(self):
        if self.perturbation_scale < 0:
            raise ContractViolation("perturbation_scale must be >= 0")
        if self.n_samples < 1:
            raise ContractViolation("n_samples must be >= 1")
        return self


@dataclass
class LabeledSample:
    """One training trajectory with its exact end-effector goal."""

    points: np.ndarray  # (T+1, d)
    goal: np.ndarray  # workspace position of the final row
    source_demo: int

    def to_json(self):
        return {
            "trajectory": {
                "dof": self.points.shape[1],
                "steps": self.points.shape[0],
                "data": self.points.tolist(),
            },
            "goal": self.goal.tolist(),
            "source_demo": self.source_demo,
        }

    @classmethod
    def from_json(cls, obj):
        points = check_trajectory(obj["trajectory"]["data"], dof=obj["trajectory"].get("dof"))
        return cls(
            points=points,
            goal=as_float_array(obj["goal"], "goal"),
            source_demo=int(obj["source_demo"]),
        )


def _min_jerk(u):
    return 10 * u ** 3 - 15 * u ** 4 + 6 * u ** 5


def home_configuration(dof):
    home = np.full(dof, HOME_OTHER_JOINTS)
    home[0] = HOME_FIRST_JOINT
    return home


def goal_configuration(dof):
    goal = np.full(dof, 0.4)
    goal[0] = 0.1
    if dof > 1:
        goal[1] = 0.5
    return goal


def _family_direction(dof, family, family_count):
    # Distinct arc directions per family, evenly spread; two families get
    # exactly opposite arcs (over vs under the direct motion).
    base = 0.35 * (-0.7) ** np.arange(dof)
    other = np.roll(base, 1)
    angle = 2.0 * np.pi * family / family_count
    return np.cos(angle) * base + np.sin(angle) * other


def generate_demos(chain, T, family_count=2, variants_per_family=2, seed=0):
    """Script family_count x variants_per_family demonstrations.

    All demos run from one home configuration to one shared goal
    configuration, so the task-space goal alone never identifies the motion
    type. Families arc around the direct motion in distinct directions;
    variants within a family grow the arc amplitude, giving a continuum the
    continuous latent can pick up. Raises DemoConstructionError if a scripted
    motion would leave [-pi, pi] (that variant is unreachable in this layout).
    """
    if family_count < 1 or variants_per_family < 1:
        raise ContractViolation("family_count and variants_per_family must be >= 1")
    if T < 2:
        raise ContractViolation("T must be >= 2")
    d = chain.dof
    u = np.linspace(0.0, 1.0, T + 1)
    ramp = _min_jerk(u)[:, None]
    envelope = np.sin(np.pi * u) ** 2
    home = home_configuration(d)
    goal = goal_configuration(d)
    demos = []
    for family in range(family_count):
        direction = _family_direction(d, family, family_count)
        for variant in range(variants_per_family):
            rng = np.random.default_rng(
                np.random.SeedSequence(entropy=seed, spawn_key=(family, variant))
            )
            amplitude = 1.0 + 0.3 * variant
            phase = rng.uniform(0.0, 2.0 * np.pi)
            wobble = 0.03 * np.sin(2.0 * np.pi * u + phase)[:, None] * envelope[:, None]
            points = (
                home
                + ramp * (goal - home)
                + envelope[:, None] * (amplitude * direction)
                + wobble
            )
            if np.any(np.abs(points) > np.pi):
                raise DemoConstructionError(
                    f"demo family={family} variant={variant} leaves the joint "
                    "range [-pi, pi]; this arc amplitude is unreachable"
                )
            demos.append(points)
    return demos


def sample_goal_shift(op, cfg, rng, dof):
    """Draw a final-row shift ~ N(0, diag(goal_sigma^2)) and spread it."""
    sigma = cfg.sigma_vector(dof)
    dq_final = rng.standard_normal(dof) * sigma
    return propagate_goal_shift(op, dq_final)


def sample_smooth_perturbation(op, demos, scale, rng):
    """Pick a demo uniformly and add endpoint-preserving smooth noise.

    The noise covariance on the interior rows is scale * (K^T K)^-1 with K
    the doubly clamped block, so rows 0 and T of the chosen demo are returned
    bit for bit.
    """
    if not demos:
        raise ContractViolation("demos must be non-empty")
    if scale < 0:
        raise ContractViolation("scale must be >= 0")
    m = int(rng.integers(len(demos)))
    noise = op.sample_interior(rng, scale, demos[m].shape[1])
    return demos[m] + noise, m


def _sample_rng(seed, index):
    # Per-sample streams keyed by (seed, index): deterministic and
    # independent of evaluation order, so sampling may be parallelized.
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))


def build_dataset(chain, op, demos, cfg):
    """Synthesize cfg.n_samples labeled trajectories around the demos."""
    cfg.validate()
    if not demos:
        raise ContractViolation("demos must be non-empty")
    d = chain.dof
    samples = []
    for i in range(cfg.n_samples):
        rng = _sample_rng(cfg.seed, i)
        m = int(rng.integers(len(demos)))
        shift = sample_goal_shift(op, cfg, rng, d)
        noise = op.sample_interior(rng, cfg.perturbation_scale, d)
        points = np.clip(demos[m] + shift + noise, -np.pi, np.pi)
        goal = forward_kinematics(chain, points[-1])
        samples.append(LabeledSample(points=points, goal=goal, source_demo=m))
    return samples


def clamping_fraction(samples):
    """Fraction of entries sitting exactly at +/-pi (i.e. clamped)."""
    total = sum(s.points.size for s in samples)
    clamped = sum(int(np.sum(np.abs(s.points) == np.pi)) for s in samples)
    return clamped / total


def save_dataset(samples, path):
    with open(path, "w", encoding="utf-8") as fh:
        for sample in samples:
            fh.write(json.dumps(sample.to_json()))
            fh.write("\n")


def load_dataset(path):
    samples = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                samples.append(LabeledSample.from_json(json.loads(line)))
    return samples
