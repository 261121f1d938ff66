import numpy as np
import pytest

from atp.errors import ContractViolation, ProjectionDidNotConverge, UnreachableGoalError
from atp.kinematics import forward_kinematics
from atp.model import build_model, one_hot
from atp.planner import (
    PlanRequest,
    demo_classes,
    end_effector_path,
    evaluate_generalization,
    latent_traversal,
    plan,
    reconstruct,
    sample_goals_near_demos,
)
from atp.projection import ProjectionConfig
from atp.augmentation import generate_demos
from atp.kinematics import default_chain

CHAIN = default_chain()
T = 9


@pytest.fixture(scope="module")
def model():
    return build_model(CHAIN, T, k_z=4, k_c=3, encoder_hidden=(24, 16),
                       decoder_hidden=(16, 24), seed=2)


def request(model, goal=(0.5, 0.4), project=False, **kw):
    return PlanRequest(
        z=np.zeros(model.k_z), c=0, x_g=np.array(goal), project=project, **kw
    )


def test_plan_without_projection_is_raw_decode(model):
    result = plan(model, request(model))
    assert result.err_after_m == result.err_before_m
    assert result.report is None
    assert np.all(np.abs(result.points) <= np.pi)


def test_plan_deterministic(model):
    a = plan(model, request(model))
    b = plan(model, request(model))
    assert np.array_equal(a.points, b.points)
    assert a.err_before_m == b.err_before_m


def test_plan_ee_path_is_rowwise_fk(model):
    result = plan(model, request(model))
    assert result.ee_path.shape == (T + 1, CHAIN.workspace_dim)
    for row, ee in zip(result.points, result.ee_path):
        assert np.array_equal(forward_kinematics(CHAIN, row), ee)


def test_plan_projection_hits_goal(model):
    goal = np.array([0.6, 0.4])
    cfg = ProjectionConfig()
    result = plan(model, request(model, goal=goal, project=True, projection=cfg))
    assert result.report is not None and result.report.converged
    assert result.err_after_m < cfg.tol <= result.err_before_m + cfg.tol


def test_plan_unreachable_goal_raises(model):
    with pytest.raises(UnreachableGoalError):
        plan(model, request(model, goal=(9.0, 9.0)))


def test_plan_nonconvergence_attaches_result(model):
    raw = plan(model, request(model))
    goal = raw.ee_path[-1] * 0.5
    cfg = ProjectionConfig(max_iters=1)
    with pytest.raises(ProjectionDidNotConverge) as info:
        plan(model, request(model, goal=goal, project=True, projection=cfg))
    attached = info.value.result
    assert attached.report is not None and not attached.report.converged
    assert attached.points.shape == raw.points.shape


def test_plan_rejects_wrong_code_dims(model):
    req = PlanRequest(z=np.zeros(model.k_z + 2), c=0, x_g=np.array([0.5, 0.4]))
    with pytest.raises(ContractViolation):
        plan(model, req)
    req = PlanRequest(z=np.zeros(model.k_z), c=model.k_c + 3, x_g=np.array([0.5, 0.4]))
    with pytest.raises(ContractViolation):
        plan(model, req)


def test_plan_accepts_probability_class(model):
    probs = np.full(model.k_c, 1.0 / model.k_c)
    result = plan(model, PlanRequest(z=np.zeros(model.k_z), c=probs, x_g=np.array([0.5, 0.4])))
    assert result.points.shape == (T + 1, CHAIN.dof)


def test_reconstruct_returns_code_and_matching_shapes(model):
    rng = np.random.default_rng(0)
    xi = np.clip(rng.standard_normal((T + 1, CHAIN.dof)), -np.pi, np.pi)
    result, code = reconstruct(model, xi)
    assert result.points.shape == xi.shape
    assert code.z.shape == (model.k_z,)
    assert sorted(np.unique(code.c)) in ([0.0, 1.0], [1.0])
    assert code.c.sum() == 1.0


def test_latent_traversal_grid_length(model):
    grid = np.linspace(-2.5, 2.5, 7)
    results = latent_traversal(model, 1, grid, request(model))
    assert len(results) == 7
    for r in results:
        assert r.points.shape == (T + 1, CHAIN.dof)


def test_latent_traversal_sweeps_only_requested_axis(model):
    base = request(model)
    results = latent_traversal(model, 0, [0.0], base)
    direct = plan(model, base)
    assert np.array_equal(results[0].points, direct.points)


def test_latent_traversal_discrete_axis(model):
    results = latent_traversal(model, "c", list(range(model.k_c)), request(model))
    assert len(results) == model.k_c


def test_latent_traversal_rejects_bad_axis(model):
    with pytest.raises(ContractViolation):
        latent_traversal(model, model.k_z + 1, [0.0], request(model))


def test_evaluate_generalization_empty_goal_list(model):
    rows, summary = evaluate_generalization(model, [])
    assert rows == []
    assert summary["n"] == 0


def test_evaluate_generalization_rows_and_csv(model, tmp_path):
    raw = plan(model, request(model))
    goals = [raw.ee_path[-1] + np.array([dx, 0.0]) for dx in (0.0, 0.01, -0.01)]
    csv_path = tmp_path / "eval.csv"
    rows, summary = evaluate_generalization(
        model, goals, ProjectionConfig(max_iters=300), csv_path=csv_path
    )
    assert len(rows) == 3 and summary["n"] == 3
    header = csv_path.read_text().splitlines()[0]
    assert header == "goal_x,goal_y,err_before_m,err_after_m,iters,converged"
    assert len(csv_path.read_text().splitlines()) == 4


def test_sample_goals_near_demos_reachable():
    demos = generate_demos(CHAIN, T, 2, 2, seed=3)
    rng = np.random.default_rng(1)
    goals = sample_goals_near_demos(CHAIN, demos, 0.15, 25, rng)
    assert len(goals) == 25
    for g in goals:
        assert np.linalg.norm(g) <= CHAIN.reach + 1e-12


def test_demo_classes_shape(model):
    demos = generate_demos(CHAIN, T, 2, 2, seed=3)
    classes = demo_classes(model, demos)
    assert len(classes) == 4
    assert all(0 <= c < model.k_c for c in classes)


def test_end_effector_path_matches_fk(model):
    rng = np.random.default_rng(4)
    xi = np.clip(rng.standard_normal((T + 1, CHAIN.dof)), -np.pi, np.pi)
    path = end_effector_path(CHAIN, xi)
    assert np.array_equal(path[-1], forward_kinematics(CHAIN, xi[-1]))
