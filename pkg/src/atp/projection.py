"""Projection of decoded trajectories onto the goal constraint.

The decoder's goal conditioning is approximate (amortized inference), so a
planned trajectory typically misses the requested end-effector position by
centimeters. These routines retarget the final configuration with damped
least squares and spread each correction over the trajectory through the
smoothness metric, driving the goal error below a millimeter-scale tolerance
without disturbing the start row.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, ProjectionDidNotConverge, UnreachableGoalError
from .kinematics import dls_solve, forward_kinematics, jacobian
from .trajectory import propagate_goal_shift
from .validation import as_float_array, check_vector

# Goals are rejected only beyond this slack over the chain's reach, so
# boundary goals (fully stretched arm) still get a projection attempt.
_REACH_SLACK = 1.0 + 1e-9


@dataclass
class ProjectionConfig:
    eta: float = 10.0  # covariant step is 1/eta
    alpha: float = 0.5  # goal-step learning rate
    damping: float = 1e-4  # damped least-squares regularizer
    tol: float = 1e-4  # goal tolerance, meters
    max_iters: int = 200
    smooth_every: int = 0  # covariant smoothing cadence; 0 disables

    def validate(self):
        if self.eta <= 0:
            raise ContractViolation("eta must be > 0")
        if not (0 < self.alpha <= 1):
            raise ContractViolation("alpha must lie in (0, 1]")
        if self.tol <= 0 or self.max_iters < 1:
            raise ContractViolation("tol must be > 0 and max_iters >= 1")
        if self.damping < 0 or self.smooth_every < 0:
            raise ContractViolation("damping and smooth_every must be >= 0")
        return self


@dataclass
class ProjectionReport:
    iters: int
    err_before_m: float
    err_after_m: float
    converged: bool

    def to_json(self):
        return {
            "iters": self.iters,
            "err_before_m": self.err_before_m,
            "err_after_m": self.err_after_m,
            "converged": self.converged,
        }


def goal_error(chain, points, x_g):
    """Distance between the final row's end-effector and the goal (meters)."""
    return float(np.linalg.norm(forward_kinematics(chain, points[-1]) - np.asarray(x_g, float)))


def chomp_smooth_step(op, points, eta):
    """One covariant gradient step on the smoothness cost 0.5 ||xi||_M^2.

    The gradient M xi is preconditioned by the inverse metric, so a step
    contracts rows 1..T uniformly toward the cost minimizer while row 0 stays
    untouched; the M-norm strictly decreases for eta >= 1 whenever the
    trajectory is not already minimal.
    """
    if eta <= 0:
        raise ContractViolation("eta must be > 0")
    points = np.asarray(points, dtype=float)
    if points.shape[0] != op.size:
        raise ContractViolation(
            f"trajectory has {points.shape[0]} rows, operator expects {op.size}"
        )
    grad = op.matrix @ points
    return points - op.solve_metric(grad) / eta


def check_reachable(chain, x_g):
    """Validate a workspace goal against the chain's reachable sphere."""
    x_g = check_vector(x_g, chain.workspace_dim, "x_g")
    if np.linalg.norm(x_g) > chain.reach * _REACH_SLACK:
        raise UnreachableGoalError(
            f"goal {x_g.tolist()} is outside the reachable radius {chain.reach:.3f} m"
        )
    return x_g


def goal_projection_step(chain, op, points, x_g, cfg):
    """Retarget the final configuration one step toward x_g.

    Damped least squares inverts the end-effector Jacobian at the final row;
    the resulting joint correction is spread over rows 1..T as a smooth ramp
    scaled by cfg.alpha. Joints on rows 1..T are clamped to [-pi, pi]; row 0
    is returned bit for bit.
    """
    cfg.validate()
    x_g = check_reachable(chain, x_g)
    points = as_float_array(points, "trajectory")
    residual = x_g - forward_kinematics(chain, points[-1])
    if not np.any(residual):
        return points.copy()
    step = dls_solve(jacobian(chain, points[-1]), residual, cfg.damping)
    out = points + cfg.alpha * propagate_goal_shift(op, step)
    out[1:] = np.clip(out[1:], -np.pi, np.pi)
    return out


def project_to_constraints(chain, op, points, x_g, cfg=None):
    """Iterate goal steps (optionally interleaved with covariant smoothing)
    until the end-effector meets x_g within cfg.tol.

    Returns (trajectory, ProjectionReport). If max_iters runs out, raises
    ProjectionDidNotConverge carrying the best trajectory seen and its
    report.
    """
    cfg = (cfg or ProjectionConfig()).validate()
    x_g = check_reachable(chain, x_g)
    points = as_float_array(points, "trajectory")
    err0 = goal_error(chain, points, x_g)
    if err0 < cfg.tol:
        return points, ProjectionReport(0, err0, err0, True)
    best, best_err = points, err0
    current = points
    for it in range(1, cfg.max_iters + 1):
        current = goal_projection_step(chain, op, current, x_g, cfg)
        if cfg.smooth_every and it % cfg.smooth_every == 0:
            current = chomp_smooth_step(op, current, cfg.eta)
        err = goal_error(chain, current, x_g)
        if err < best_err:
            best, best_err = current, err
        if err < cfg.tol:
            return current, ProjectionReport(it, err0, err, True)
    report = ProjectionReport(cfg.max_iters, err0, best_err, False)
    raise ProjectionDidNotConverge(
        f"goal projection stalled at {best_err:.2e} m after {cfg.max_iters} iterations "
        f"(tol {cfg.tol:.1e} m)",
        trajectory=best,
        report=report,
    )
