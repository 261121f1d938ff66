"""HTTP planning service over an immutable trained model.

All handlers read one frozen snapshot (model, chain, demos), so any number
of requests may be served concurrently and identical requests always get
identical responses. Consumed by the latent-explorer browser UI and by
scripts; JSON in, JSON out.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .errors import ContractViolation, ProjectionDidNotConverge, UnreachableGoalError
from .kinematics import forward_kinematics
from .model import load_model
from .planner import PlanRequest, end_effector_path, latent_traversal, plan, reconstruct
from .projection import ProjectionConfig
from .trajectory import build_smoothness_operator, load_trajectory


class PlanBody(BaseModel):
    z: list[float]
    c: int | list[float] = 0
    goal: list[float]
    project: bool = False
    tol: float | None = None
    max_iters: int | None = None


class TraverseBody(BaseModel):
    axis: int | str = 1
    grid: list[float]
    z: list[float] | None = None
    c: int | list[float] = 0
    goal: list[float]
    project: bool = False


@dataclass(frozen=True)
class ServiceState:
    model: object
    meta: dict
    demos: list
    operator: object
    projection: ProjectionConfig


def _load_demos(demos_dir):
    files = sorted(Path(demos_dir).glob("demo_*.json"))
    return [load_trajectory(f) for f in files]


def build_state(model_path=None, demos_dir=None, model=None, meta=None, demos=None,
                projection=None):
    if model is None:
        model, meta = load_model(model_path)
    if demos is None:
        demos = _load_demos(demos_dir) if demos_dir else []
    return ServiceState(
        model=model,
        meta=meta or {},
        demos=demos,
        operator=build_smoothness_operator(model.n_steps),
        projection=projection or ProjectionConfig(),
    )


def create_app(model_path=None, demos_dir=None, state=None):
    state = state or build_state(model_path=model_path, demos_dir=demos_dir)
    model = state.model
    app = FastAPI(title="atp planning service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request, exc):
        # Unparseable JSON is a malformed request (400); parseable JSON that
        # fails the schema is an unprocessable entity (422).
        if any(err.get("type") == "json_invalid" for err in exc.errors()):
            return JSONResponse(status_code=400, content={"detail": "malformed JSON body"})
        return JSONResponse(status_code=422, content={"detail": exc.errors()})

    demo_payload = []
    for demo in state.demos:
        result, code = reconstruct(model, demo)
        demo_payload.append(
            {
                "trajectory": {
                    "dof": demo.shape[1],
                    "steps": demo.shape[0],
                    "data": demo.tolist(),
                },
                "goal": forward_kinematics(model.chain, demo[-1]).tolist(),
                "ee_path": end_effector_path(model.chain, demo).tolist(),
                "code": {"z": code.z.tolist(), "c": code.class_index},
            }
        )

    model_info = {
        "k_z": model.k_z,
        "k_c": model.k_c,
        "dof": model.dof,
        "steps": model.n_steps + 1,
        "workspace_dim": model.workspace_dim,
        "link_lengths": model.chain.link_lengths.tolist(),
        "per_unit_kl": state.meta.get("per_unit_kl"),
        "demo_goals": [d["goal"] for d in demo_payload],
    }

    def _projection(tol, max_iters):
        cfg = ProjectionConfig(
            eta=state.projection.eta,
            alpha=state.projection.alpha,
            damping=state.projection.damping,
            tol=state.projection.tol if tol is None else tol,
            max_iters=state.projection.max_iters if max_iters is None else max_iters,
            smooth_every=state.projection.smooth_every,
        )
        return cfg.validate()

    def _plan_request(z, c, goal, project, tol=None, max_iters=None):
        return PlanRequest(
            z=np.asarray(z, dtype=float),
            c=np.asarray(c, dtype=float) if isinstance(c, list) else int(c),
            x_g=np.asarray(goal, dtype=float),
            project=project,
            projection=_projection(tol, max_iters),
        )

    def _run_plan(req):
        try:
            return plan(model, req, op=state.operator).to_json()
        except ProjectionDidNotConverge as exc:
            raise HTTPException(
                status_code=409,
                detail={
                    "message": str(exc),
                    "best": exc.result.to_json(),
                },
            ) from exc
        except UnreachableGoalError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        except ContractViolation as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc

    @app.get("/api/model")
    def get_model():
        return model_info

    @app.get("/api/demos")
    def get_demos():
        return {"demos": demo_payload}

    @app.post("/api/plan")
    def post_plan(body: PlanBody):
        req = _plan_request(body.z, body.c, body.goal, body.project, body.tol, body.max_iters)
        return _run_plan(req)

    @app.post("/api/traverse")
    def post_traverse(body: TraverseBody):
        z = np.zeros(model.k_z) if body.z is None else np.asarray(body.z, dtype=float)
        base = _plan_request(z, body.c, body.goal, body.project)
        axis = body.axis if body.axis == "c" else int(body.axis)
        try:
            results = latent_traversal(model, axis, body.grid, base)
        except ProjectionDidNotConverge as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        except (ContractViolation, UnreachableGoalError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return {"grid": list(map(float, body.grid)), "results": [r.to_json() for r in results]}

    return app
