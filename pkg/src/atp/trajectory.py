"""Trajectory files and the banded smoothness operator.

A trajectory is a (T+1, d) array of joint angles, rows q_0..q_T. The
smoothness operator is the second-difference quadratic form used by CHOMP:
its inverse action spreads an endpoint displacement over the whole
trajectory as a smooth ramp, and the squared operator's inverse is the
STOMP-style covariance for endpoint-preserving noise.
"""

import json
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded, solve_banded

from .errors import ContractViolation
from .validation import as_float_array, check_trajectory


def save_trajectory(points, path):
    points = check_trajectory(points)
    doc = {"dof": points.shape[1], "steps": points.shape[0], "data": points.tolist()}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_trajectory(path):
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    points = check_trajectory(doc["data"], dof=doc.get("dof"))
    if doc.get("steps") not in (None, points.shape[0]):
        raise ContractViolation(
            f"trajectory file claims {doc['steps']} rows but data has {points.shape[0]}"
        )
    return points


def _second_difference_block(n):
    """Dense n x n tridiagonal block with 2 on the diagonal, -1 off it."""
    block = 2.0 * np.eye(n)
    idx = np.arange(n - 1)
    block[idx, idx + 1] = -1.0
    block[idx + 1, idx] = -1.0
    return block


def _banded_upper(dense, bandwidth):
    """Upper banded storage (scipy convention) of a symmetric banded matrix."""
    n = dense.shape[0]
    ab = np.zeros((bandwidth + 1, n))
    for k in range(bandwidth + 1):
        row = bandwidth - k  # row 0 holds the highest superdiagonal
        diag = np.diagonal(dense, offset=row)
        ab[k, row:] = diag
    return ab


@dataclass(frozen=True, eq=False)
class SmoothnessOperator:
    """Smoothness metric for trajectories with T+1 rows.

    `matrix` has a zero first row/column (the start row is never moved) and a
    tridiagonal 2/-1 block over rows 1..T. `start_clamped_block` is that T x T
    block; `interior_block` additionally clamps the final row, so noise drawn
    against it preserves both endpoints. Cholesky factors are cached in banded
    form for O(T) solves and sampling.
    """

    size: int  # number of rows, T+1
    matrix: np.ndarray
    start_clamped_block: np.ndarray
    interior_block: np.ndarray
    _start_factor: np.ndarray
    _interior_factor: np.ndarray
    _interior_sq_factor: np.ndarray  # cholesky of interior_block^T interior_block

    @property
    def horizon(self):
        """T, the index of the final row."""
        return self.size - 1

    def solve_start_clamped(self, rhs):
        """Solve start_clamped_block @ u = rhs (rhs indexed by rows 1..T)."""
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape[0] != self.size - 1:
            raise ContractViolation(
                f"rhs must have {self.size - 1} rows, got {rhs.shape[0]}"
            )
        return cho_solve_banded((self._start_factor, False), rhs)

    def solve_metric(self, vec):
        """Inverse-metric action: zero at row 0, block solve on rows 1..T."""
        vec = np.asarray(vec, dtype=float)
        if vec.shape[0] != self.size:
            raise ContractViolation(f"vector must have {self.size} rows, got {vec.shape[0]}")
        out = np.zeros_like(vec)
        out[1:] = self.solve_start_clamped(vec[1:])
        return out

    def sample_interior(self, rng, scale, n_joints):
        """Draw smooth zero-boundary noise, one column per joint.

        Returns a (T+1, n_joints) array whose rows 1..T-1 follow
        N(0, scale * (K^T K)^-1) with K the interior block; rows 0 and T are
        exactly zero.
        """
        if scale < 0:
            raise ContractViolation("scale must be >= 0")
        out = np.zeros((self.size, n_joints))
        if scale == 0:
            return out
        white = rng.standard_normal((self.size - 2, n_joints))
        # U^-1 white has covariance (U^T U)^-1 = (K^T K)^-1 per column.
        bandwidth = self._interior_sq_factor.shape[0] - 1
        smooth = solve_banded((0, bandwidth), self._interior_sq_factor, white)
        out[1:-1] = np.sqrt(scale) * smooth
        return out


def build_smoothness_operator(T):
    """Construct the operator for trajectories with T+1 rows (T >= 2)."""
    if int(T) != T or T < 2:
        raise ContractViolation(f"T must be an integer >= 2, got {T}")
    T = int(T)
    start_block = _second_difference_block(T)
    interior_block = _second_difference_block(T - 1)
    matrix = np.zeros((T + 1, T + 1))
    matrix[1:, 1:] = start_block

    start_factor = cholesky_banded(_banded_upper(start_block, 1), lower=False)
    interior_factor = cholesky_banded(_banded_upper(interior_block, 1), lower=False)
    interior_sq = interior_block @ interior_block
    interior_sq_factor = cholesky_banded(_banded_upper(interior_sq, 2), lower=False)
    return SmoothnessOperator(
        size=T + 1,
        matrix=matrix,
        start_clamped_block=start_block,
        interior_block=interior_block,
        _start_factor=start_factor,
        _interior_factor=interior_factor,
        _interior_sq_factor=interior_sq_factor,
    )


def propagate_goal_shift(op, dq_final):
    """Spread a final-row displacement smoothly over the whole trajectory.

    Solves the start-clamped block against a right-hand side supported on the
    last row only, giving a linear ramp from 0 (row 0) to T/(T+1) * dq_final
    (row T). Returns a (T+1, d) displacement matrix.
    """
    dq_final = np.atleast_1d(as_float_array(dq_final, "dq_final"))
    if dq_final.ndim != 1:
        raise ContractViolation("dq_final must be a vector")
    rhs = np.zeros((op.size - 1, dq_final.size))
    rhs[-1] = dq_final
    out = np.zeros((op.size, dq_final.size))
    out[1:] = op.solve_start_clamped(rhs)
    return out


def smoothness_norm(op, points):
    """Quadratic roughness xi^T M xi summed over joints (>= 0)."""
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    if points.shape[0] != op.size:
        raise ContractViolation(
            f"trajectory has {points.shape[0]} rows, operator expects {op.size}"
        )
    tail = points[1:]
    return float(np.sum(tail * (op.start_clamped_block @ tail)))
