"""Analytic kinematics for a serial-chain arm.

Planar chains (workspace_dim=2) rotate every joint about z and live in the
xy-plane. Spatial chains (workspace_dim=3) alternate z/y joint axes so a
handful of links can reach a 3-D workspace; both share one geometric
Jacobian. All functions are pure.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, SingularJacobianError
from .validation import as_float_array, check_vector

# Near-singularity guard for the undamped solve.
_COND_LIMIT = 1e12


@dataclass(frozen=True, eq=False)
class KinematicChain:
    """Link lengths and joint-axis layout of a revolute serial chain."""

    link_lengths: np.ndarray
    workspace_dim: int = 2

    def __post_init__(self):
        lengths = as_float_array(self.link_lengths, "link_lengths")
        if lengths.ndim != 1 or lengths.size == 0:
            raise ContractViolation("link_lengths must be a non-empty vector")
        if np.any(lengths <= 0):
            raise ContractViolation("link lengths must all be positive")
        if self.workspace_dim not in (2, 3):
            raise ContractViolation("workspace_dim must be 2 or 3")
        object.__setattr__(self, "link_lengths", lengths)

    @property
    def dof(self):
        return self.link_lengths.size

    @property
    def reach(self):
        """Radius of the reachable sphere around the base."""
        return float(self.link_lengths.sum())

    def joint_axes(self):
        """Local rotation axis per joint: all z (planar) or alternating z/y."""
        if self.workspace_dim == 2:
            return [np.array([0.0, 0.0, 1.0])] * self.dof
        axes = []
        for i in range(self.dof):
            axes.append(np.array([0.0, 0.0, 1.0]) if i % 2 == 0 else np.array([0.0, 1.0, 0.0]))
        return axes

    def to_json(self):
        return {"workspace_dim": self.workspace_dim, "link_lengths": self.link_lengths.tolist()}

    @classmethod
    def from_json(cls, obj):
        return cls(
            link_lengths=obj["link_lengths"],
            workspace_dim=int(obj.get("workspace_dim", 2)),
        )


def default_chain():
    """Planar 3-link arm used throughout the examples and the CLI defaults."""
    return KinematicChain(link_lengths=np.array([0.4, 0.4, 0.3]), workspace_dim=2)


def load_chain(path):
    with open(path, "r", encoding="utf-8") as fh:
        return KinematicChain.from_json(json.load(fh))


def save_chain(chain, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(chain.to_json(), fh)
        fh.write("\n")


def _axis_rotation(axis, angle):
    c, s = np.cos(angle), np.sin(angle)
    if axis[2] == 1.0:  # z
        return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    # y
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _frames(chain, q):
    """World joint positions p_0..p_d (p_d = end-effector) and world axes."""
    axes = chain.joint_axes()
    rot = np.eye(3)
    pos = np.zeros(3)
    positions = [pos.copy()]
    world_axes = []
    for i in range(chain.dof):
        world_axes.append(rot @ axes[i])
        rot = rot @ _axis_rotation(axes[i], q[i])
        pos = pos + rot @ np.array([chain.link_lengths[i], 0.0, 0.0])
        positions.append(pos.copy())
    return np.array(positions), np.array(world_axes)


def forward_kinematics(chain, q):
    """End-effector position (meters) for joint angles q (radians)."""
    q = check_vector(q, chain.dof, "q")
    if chain.workspace_dim == 2:
        cum = np.cumsum(q)
        x = float(np.sum(chain.link_lengths * np.cos(cum)))
        y = float(np.sum(chain.link_lengths * np.sin(cum)))
        return np.array([x, y])
    positions, _ = _frames(chain, q)
    return positions[-1]


def jacobian(chain, q):
    """Position Jacobian d x_end / d q, shape (workspace_dim, dof)."""
    q = check_vector(q, chain.dof, "q")
    if chain.workspace_dim == 2:
        cum = np.cumsum(q)
        px = chain.link_lengths * np.cos(cum)
        py = chain.link_lengths * np.sin(cum)
        # column i depends on links i..d-1: J = z x (p_end - p_i)
        sx = np.cumsum(px[::-1])[::-1]
        sy = np.cumsum(py[::-1])[::-1]
        return np.vstack([-sy, sx])
    positions, world_axes = _frames(chain, q)
    p_end = positions[-1]
    cols = [np.cross(world_axes[i], p_end - positions[i]) for i in range(chain.dof)]
    return np.array(cols).T


def dls_solve(J, r, damping=0.0):
    """Damped least-squares step: Jᵀ (J Jᵀ + damping² I)⁻¹ r.

    With damping=0 and full-row-rank J this is the minimum-norm solution of
    J dq = r. A singular J Jᵀ at damping=0 raises SingularJacobianError so the
    caller can retry with damping.
    """
    J = as_float_array(J, "J")
    if J.ndim != 2:
        raise ContractViolation("J must be a 2-D matrix")
    r = check_vector(r, J.shape[0], "r")
    if damping < 0:
        raise ContractViolation("damping must be >= 0")
    JJt = J @ J.T + (damping ** 2) * np.eye(J.shape[0])
    if damping == 0.0:
        if np.linalg.cond(JJt) > _COND_LIMIT:
            raise SingularJacobianError(
                "J Jᵀ is singular with damping=0; retry with damping > 0"
            )
    try:
        y = np.linalg.solve(JJt, r)
    except np.linalg.LinAlgError as exc:
        raise SingularJacobianError(str(exc)) from exc
    return J.T @ y
