"""Exception types shared across the pipeline."""


class AtpError(Exception):
    """Base class for all domain errors raised by this package."""


class ContractViolation(AtpError, ValueError):
    """An argument violates a documented precondition (shape, range, ...)."""


class SingularJacobianError(AtpError):
    """Undamped least-squares solve hit a (numerically) singular J Jᵀ."""


class UnreachableGoalError(AtpError):
    """Requested workspace goal lies outside the arm's reachable set."""


class DemoConstructionError(AtpError):
    """Scripted demonstration would violate joint bounds or reachability."""


class ProjectionDidNotConverge(AtpError):
    """Goal projection ran out of iterations.

    Carries the best trajectory found so far and its residual so callers
    can degrade gracefully instead of discarding the plan.
    """

    def __init__(self, message, trajectory, report):
        super().__init__(message)
        self.trajectory = trajectory
        self.report = report


class TrainingDiverged(AtpError):
    """Loss became non-finite; carries the last finite-loss parameters."""

    def __init__(self, message, last_good_model=None, breakdown=None):
        super().__init__(message)
        self.last_good_model = last_good_model
        self.breakdown = breakdown


class ModelIOError(AtpError):
    """Model file is unreadable, truncated, or inconsistent with the request."""
