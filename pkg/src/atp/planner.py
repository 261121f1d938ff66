"""Planning with a trained model: decode latent codes, project, evaluate.

A plan request carries a latent code and a goal; the decoder turns it into a
trajectory and the optional projection pass removes the residual goal error.
Traversal and generalization sweeps reproduce the diagnostic views used to
judge a trained model (which latent units matter, how well goals transfer).
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, ProjectionDidNotConverge
from .kinematics import forward_kinematics
from .model import LatentCode, decode, encode, one_hot
from .projection import (
    ProjectionConfig,
    check_reachable,
    goal_error,
    project_to_constraints,
)
from .trajectory import build_smoothness_operator
from .validation import check_vector


@dataclass
class PlanRequest:
    z: np.ndarray
    c: int | np.ndarray  # class index or probability vector
    x_g: np.ndarray
    project: bool = False
    projection: ProjectionConfig = field(default_factory=ProjectionConfig)

    def class_vector(self, k_c):
        if np.isscalar(self.c) or getattr(self.c, "ndim", 1) == 0:
            return one_hot(int(self.c), k_c)
        vec = check_vector(self.c, k_c, "c")
        if np.any(vec < 0) or abs(vec.sum() - 1.0) > 1e-6:
            raise ContractViolation("c must be a class index or a probability vector")
        return vec


@dataclass
class PlanResult:
    points: np.ndarray
    ee_path: np.ndarray
    err_before_m: float
    err_after_m: float
    report: object = None  # ProjectionReport when projection ran

    def to_json(self):
        return {
            "trajectory": {
                "dof": self.points.shape[1],
                "steps": self.points.shape[0],
                "data": self.points.tolist(),
            },
            "ee_path": self.ee_path.tolist(),
            "err_before_m": self.err_before_m,
            "err_after_m": self.err_after_m,
            "projection": self.report.to_json() if self.report is not None else None,
        }


def end_effector_path(chain, points):
    """Forward kinematics of every row: (T+1, workspace_dim)."""
    return np.array([forward_kinematics(chain, row) for row in np.asarray(points, float)])


def _result(chain, points, x_g, err_before, report):
    err_after = goal_error(chain, points, x_g) if report is not None else err_before
    return PlanResult(
        points=points,
        ee_path=end_effector_path(chain, points),
        err_before_m=err_before,
        err_after_m=err_after,
        report=report,
    )


def plan(model, req, op=None):
    """Decode a plan request; optionally project onto the goal constraint.

    Deterministic. Raises UnreachableGoalError for goals beyond the arm's
    reach and ProjectionDidNotConverge (with a best-so-far PlanResult
    attached as exc.result) when projection runs out of iterations.
    """
    z = check_vector(req.z, model.k_z, "z")
    c = req.class_vector(model.k_c)
    x_g = check_reachable(model.chain, req.x_g)
    points = decode(model, z, c, x_g)
    err_before = goal_error(model.chain, points, x_g)
    if not req.project:
        return _result(model.chain, points, x_g, err_before, None)
    op = op or build_smoothness_operator(model.n_steps)
    try:
        projected, report = project_to_constraints(
            model.chain, op, points, x_g, req.projection
        )
    except ProjectionDidNotConverge as exc:
        exc.result = _result(model.chain, exc.trajectory, x_g, err_before, exc.report)
        raise
    return _result(model.chain, projected, x_g, err_before, report)


def reconstruct(model, points):
    """Round-trip one trajectory through the model.

    Uses the posterior mean for z, the argmax class for c, and the encoder's
    own goal estimate for conditioning. Returns (PlanResult, LatentCode).
    """
    mu, _, logits, goal_est = encode(model, points)
    code = LatentCode(z=mu, c=one_hot(int(np.argmax(logits)), model.k_c))
    recon = decode(model, code.z, code.c, goal_est)
    err = goal_error(model.chain, recon, goal_est)
    return _result(model.chain, recon, goal_est, err, None), code


def latent_traversal(model, axis, grid, base):
    """Sweep one latent coordinate, holding everything else at `base`.

    axis: integer index into z, or "c" to sweep the discrete class (grid then
    holds class indices). Returns one PlanResult per grid value.
    """
    op = build_smoothness_operator(model.n_steps)
    results = []
    for value in grid:
        z = np.array(base.z, dtype=float)
        c = base.c
        if axis == "c":
            c = int(value)
        else:
            axis_i = int(axis)
            if not (0 <= axis_i < model.k_z):
                raise ContractViolation(f"traversal axis {axis_i} out of range")
            z[axis_i] = float(value)
        req = PlanRequest(
            z=z, c=c, x_g=base.x_g, project=base.project, projection=base.projection
        )
        results.append(plan(model, req, op=op))
    return results


def demo_classes(model, demos):
    """Hard discrete code assigned to each demo by the encoder."""
    return [int(np.argmax(encode(model, d)[2])) for d in demos]


def sample_goals_near_demos(chain, demos, goal_sigma, n, rng):
    """Random reachable goals matching the augmented-data goal spread."""
    sigma = np.atleast_1d(np.asarray(goal_sigma, dtype=float))
    goals = []
    horizon = demos[0].shape[0] - 1
    scale = horizon / (horizon + 1.0)  # realized fraction of a final-row shift
    while len(goals) < n:
        demo = demos[int(rng.integers(len(demos)))]
        dq = rng.standard_normal(demo.shape[1]) * sigma * scale
        q_final = np.clip(demo[-1] + dq, -np.pi, np.pi)
        goals.append(forward_kinematics(chain, q_final))
    return goals


def evaluate_generalization(model, goals, cfg=None, classes=None, z=None, csv_path=None):
    """Pre/post projection goal errors over a list of goals.

    classes: discrete class per goal (defaults to class 0 everywhere);
    z: shared continuous code (defaults to zeros). Returns (rows, summary)
    and optionally writes one CSV row per goal.
    """
    cfg = cfg or ProjectionConfig()
    z = np.zeros(model.k_z) if z is None else check_vector(z, model.k_z, "z")
    op = build_smoothness_operator(model.n_steps)
    rows = []
    for i, goal in enumerate(goals):
        goal = check_vector(goal, model.workspace_dim, "goal")
        c = 0 if classes is None else int(classes[i])
        req = PlanRequest(z=z, c=c, x_g=goal, project=True, projection=cfg)
        try:
            result = plan(model, req, op=op)
            report = result.report
        except ProjectionDidNotConverge as exc:
            result = exc.result
            report = exc.report
        row = {"goal": goal.tolist(), "class": c}
        row["err_before_m"] = result.err_before_m
        row["err_after_m"] = result.err_after_m
        row["iters"] = report.iters
        row["converged"] = report.converged
        rows.append(row)
    summary = _summarize(rows)
    if csv_path is not None:
        _write_csv(rows, model.workspace_dim, csv_path)
    return rows, summary


def _summarize(rows):
    if not rows:
        return {
            "n": 0,
            "median_err_before_m": float("nan"),
            "p95_err_before_m": float("nan"),
            "median_err_after_m": float("nan"),
            "p95_err_after_m": float("nan"),
            "converged_fraction": float("nan"),
        }
    before = np.array([r["err_before_m"] for r in rows])
    after = np.array([r["err_after_m"] for r in rows])
    return {
        "n": len(rows),
        "median_err_before_m": float(np.median(before)),
        "p95_err_before_m": float(np.percentile(before, 95)),
        "median_err_after_m": float(np.median(after)),
        "p95_err_after_m": float(np.percentile(after, 95)),
        "converged_fraction": float(np.mean([r["converged"] for r in rows])),
    }


def _write_csv(rows, workspace_dim, path):
    axes = ["goal_x", "goal_y", "goal_z"][:workspace_dim]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(axes + ["err_before_m", "err_after_m", "iters", "converged"])
        for row in rows:
            writer.writerow(
                [repr(v) for v in row["goal"]]
                + [repr(row["err_before_m"]), repr(row["err_after_m"])]
                + [row["iters"], row["converged"]]
            )
