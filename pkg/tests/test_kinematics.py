import numpy as np
import pytest

from atp.errors import ContractViolation, SingularJacobianError
from atp.kinematics import (
    KinematicChain,
    default_chain,
    dls_solve,
    forward_kinematics,
    jacobian,
    load_chain,
    save_chain,
)


def two_link():
    return KinematicChain(link_lengths=np.array([1.0, 1.0]))


def test_fk_straight_arm_along_x():
    assert np.allclose(forward_kinematics(two_link(), [0.0, 0.0]), [2.0, 0.0])


def test_fk_straight_arm_along_y():
    assert np.allclose(forward_kinematics(two_link(), [np.pi / 2, 0.0]), [0.0, 2.0])


def test_fk_right_angle_elbow():
    assert np.allclose(forward_kinematics(two_link(), [np.pi / 2, -np.pi / 2]), [1.0, 1.0])


def test_fk_dimension_mismatch():
    with pytest.raises(ContractViolation):
        forward_kinematics(two_link(), [0.0, 0.0, 0.0])


def test_fk_reachability_bound():
    rng = np.random.default_rng(0)
    for chain in (two_link(), default_chain(), KinematicChain([0.5, 0.2, 0.4, 0.3], 3)):
        for _ in range(200):
            q = rng.uniform(-np.pi, np.pi, chain.dof)
            assert np.linalg.norm(forward_kinematics(chain, q)) <= chain.reach + 1e-12


def test_jacobian_two_link_at_zero():
    assert np.allclose(jacobian(two_link(), [0.0, 0.0]), [[0.0, 0.0], [2.0, 1.0]])


def test_jacobian_single_link_up():
    chain = KinematicChain(link_lengths=np.array([1.0]))
    J = jacobian(chain, [np.pi / 2])
    assert np.allclose(J, [[-1.0], [0.0]], atol=1e-12)


@pytest.mark.parametrize(
    "chain",
    [two_link(), default_chain(), KinematicChain([0.4, 0.4, 0.3], 3), KinematicChain([0.3, 0.2, 0.2, 0.2, 0.1], 3)],
)
def test_jacobian_matches_finite_differences(chain):
    rng = np.random.default_rng(42)
    h = 1e-6
    for _ in range(50):
        q = rng.uniform(-np.pi, np.pi, chain.dof)
        J = jacobian(chain, q)
        fd = np.zeros_like(J)
        for i in range(chain.dof):
            qp, qm = q.copy(), q.copy()
            qp[i] += h
            qm[i] -= h
            fd[:, i] = (forward_kinematics(chain, qp) - forward_kinematics(chain, qm)) / (2 * h)
        assert np.abs(J - fd).max() < 1e-6


def test_dls_identity():
    assert np.allclose(dls_solve(np.eye(2), [1.0, 2.0], 0.0), [1.0, 2.0])


def test_dls_diagonal():
    assert np.allclose(dls_solve(np.array([[2.0, 0.0], [0.0, 1.0]]), [2.0, 1.0], 0.0), [1.0, 1.0])


def test_dls_residual_zero_for_full_rank():
    rng = np.random.default_rng(7)
    for _ in range(50):
        J = rng.standard_normal((2, 4))
        r = rng.standard_normal(2)
        dq = dls_solve(J, r, 0.0)
        assert np.linalg.norm(J @ dq - r) < 1e-10


def test_dls_singular_raises_and_damped_recovers():
    J = np.array([[1.0, 0.0], [1.0, 0.0]])  # rank 1
    with pytest.raises(SingularJacobianError):
        dls_solve(J, [1.0, 1.0], 0.0)
    dq = dls_solve(J, [1.0, 1.0], 1e-3)
    assert np.all(np.isfinite(dq))


def test_dls_residual_shrinks_with_damping():
    rng = np.random.default_rng(3)
    J = rng.standard_normal((2, 3))
    r = rng.standard_normal(2)
    residuals = [
        np.linalg.norm(J @ dls_solve(J, r, lam) - r) for lam in (1.0, 0.1, 0.01, 0.0)
    ]
    assert all(a >= b - 1e-12 for a, b in zip(residuals, residuals[1:]))


def test_chain_validation():
    with pytest.raises(ContractViolation):
        KinematicChain(link_lengths=np.array([1.0, -1.0]))
    with pytest.raises(ContractViolation):
        KinematicChain(link_lengths=np.array([1.0]), workspace_dim=4)


def test_chain_json_roundtrip(tmp_path):
    chain = KinematicChain([0.4, 0.4, 0.3], workspace_dim=3)
    path = tmp_path / "chain.json"
    save_chain(chain, path)
    loaded = load_chain(path)
    assert loaded.workspace_dim == 3
    assert np.array_equal(loaded.link_lengths, chain.link_lengths)
