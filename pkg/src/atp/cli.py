"""Command-line pipeline: gen-demos, augment, train, plan, traverse, eval, serve.

Every subcommand honors --seed, never mutates its inputs, and exits 0 on
success, 1 on a domain error (bad goal, divergence, unreadable file), 2 on a
usage error. Set ATP_LOG=debug|info|error to control logging.
"""

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .augmentation import (
    AugmentationConfig,
    build_dataset,
    generate_demos,
    load_dataset,
    save_dataset,
)
from .errors import AtpError, ProjectionDidNotConverge
from .kinematics import default_chain, forward_kinematics, load_chain
from .model import (
    TrainingConfig,
    build_model,
    dataset_kl_profile,
    load_model,
    save_model,
    train,
)
from .planner import (
    PlanRequest,
    demo_classes,
    evaluate_generalization,
    latent_traversal,
    plan,
    sample_goals_near_demos,
)
from .projection import ProjectionConfig
from .trajectory import build_smoothness_operator, load_trajectory, save_trajectory

log = logging.getLogger("atp")


def _setup_logging():
    level = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}.get(
        os.environ.get("ATP_LOG", "error").lower(), logging.ERROR
    )
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _chain_from(args):
    return load_chain(args.chain) if args.chain else default_chain()


def _floats(text):
    return np.array([float(tok) for tok in text.split(",") if tok != ""])


def _load_demo_dir(path):
    files = sorted(Path(path).glob("demo_*.json"))
    if not files:
        raise AtpError(f"no demo_*.json files found in {path}")
    return [load_trajectory(f) for f in files]


def cmd_gen_demos(args):
    chain = _chain_from(args)
    demos = generate_demos(
        chain, args.steps - 1, args.families, args.variants, seed=args.seed
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, demo in enumerate(demos):
        save_trajectory(demo, out / f"demo_{i:02d}.json")
    log.info("wrote %d demos to %s", len(demos), out)
    print(json.dumps({"demos": len(demos), "dir": str(out)}))
    return 0


def cmd_augment(args):
    chain = _chain_from(args)
    demos = _load_demo_dir(args.demos)
    op = build_smoothness_operator(demos[0].shape[0] - 1)
    cfg = AugmentationConfig(
        goal_sigma=args.goal_sigma,
        perturbation_scale=args.perturb_scale,
        n_samples=args.n,
        seed=args.seed,
    )
    samples = build_dataset(chain, op, demos, cfg)
    save_dataset(samples, args.out)
    log.info("wrote %d samples to %s", len(samples), args.out)
    print(json.dumps({"samples": len(samples), "file": args.out}))
    return 0


def _write_metrics_csv(metrics, k_z, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        unit_cols = [f"kl_z_{i}" for i in range(k_z)]
        writer.writerow(
            ["epoch", "loss", "recon_mse", "goal_mse", "kl_z", "kl_c", "cz", "cc"]
            + unit_cols
        )
        for row in metrics:
            writer.writerow(
                [row["epoch"]]
                + [repr(row[k]) for k in ("loss", "recon_mse", "goal_mse", "kl_z", "kl_c", "cz", "cc")]
                + [repr(v) for v in row["kl_z_per_unit"]]
            )


def cmd_train(args):
    chain = _chain_from(args)
    samples = load_dataset(args.data)
    n_steps = samples[0].points.shape[0] - 1
    model = build_model(
        chain, n_steps, k_z=args.k_z, k_c=args.k_c, seed=args.seed
    )
    cfg = TrainingConfig(
        epochs=args.epochs,
        batch_size=args.batch,
        learning_rate=args.lr,
        gamma=args.gamma,
        cz_max=args.cz_max,
        cc_max=args.cc_max,
        tau=args.tau,
        seed=args.seed,
    )
    model, metrics = train(
        model, samples, cfg, log=lambda row: log.info("epoch %(epoch)d loss %(loss).4f", row)
    )
    per_unit, kl_z, kl_c = dataset_kl_profile(model, samples)
    save_model(
        model,
        args.out,
        config=cfg,
        extra_meta={"per_unit_kl": per_unit.tolist(), "final_kl_c": kl_c},
    )
    metrics_path = args.metrics or str(Path(args.out).with_suffix(".metrics.csv"))
    _write_metrics_csv(metrics, model.k_z, metrics_path)
    print(
        json.dumps(
            {
                "model": args.out,
                "metrics": metrics_path,
                "epochs": len(metrics),
                "final_loss": metrics[-1]["loss"],
                "per_unit_kl": per_unit.tolist(),
            }
        )
    )
    return 0


def _projection_config(args):
    cfg = ProjectionConfig()
    if getattr(args, "tol", None) is not None:
        cfg.tol = args.tol
    if getattr(args, "max_iters", None) is not None:
        cfg.max_iters = args.max_iters
    return cfg


def cmd_plan(args):
    model, _ = load_model(args.model)
    req = PlanRequest(
        z=_floats(args.z) if args.z else np.zeros(model.k_z),
        c=args.c,
        x_g=_floats(args.goal),
        project=args.project,
        projection=_projection_config(args),
    )
    try:
        result = plan(model, req)
    except ProjectionDidNotConverge as exc:
        if args.out:
            save_trajectory(exc.result.points, args.out)
        print(json.dumps(exc.result.to_json()["projection"]), file=sys.stderr)
        raise
    if args.out:
        save_trajectory(result.points, args.out)
    doc = result.to_json()
    if not args.full:
        doc.pop("trajectory")
        doc.pop("ee_path")
    print(json.dumps(doc))
    return 0


def cmd_traverse(args):
    model, _ = load_model(args.model)
    if args.grid:
        grid = _floats(args.grid)
    else:
        grid = np.linspace(-2.5, 2.5, 7)
    base = PlanRequest(
        z=_floats(args.z) if args.z else np.zeros(model.k_z),
        c=args.c,
        x_g=_floats(args.goal),
        project=False,
    )
    axis = "c" if args.axis == "c" else int(args.axis)
    results = latent_traversal(model, axis, grid, base)
    bundle = {
        "axis": args.axis,
        "grid": list(np.asarray(grid, dtype=float)),
        "results": [r.to_json() for r in results],
    }
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(bundle, fh)
        fh.write("\n")
    print(json.dumps({"results": len(results), "file": args.out}))
    return 0


def cmd_eval(args):
    model, _ = load_model(args.model)
    demos = _load_demo_dir(args.demos)
    rng = np.random.default_rng(args.seed)
    goals = sample_goals_near_demos(model.chain, demos, args.goal_sigma, args.n, rng)
    classes = demo_classes(model, demos)
    demo_goals = [forward_kinematics(model.chain, d[-1]) for d in demos]
    goal_classes = [
        classes[int(np.argmin([np.linalg.norm(g - dg) for dg in demo_goals]))]
        for g in goals
    ]
    rows, summary = evaluate_generalization(
        model, goals, _projection_config(args), classes=goal_classes, csv_path=args.out
    )
    print(json.dumps(summary))
    return 0


def cmd_serve(args):
    import uvicorn

    from .service import create_app

    app = create_app(model_path=args.model, demos_dir=args.demos)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="atp",
        description="Latent-code trajectory planning: demo synthesis, "
        "augmentation, training, planning, serving.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-demos", help="write scripted demonstration files")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--steps", type=int, default=50, help="rows per trajectory")
    p.add_argument("--families", type=int, default=2)
    p.add_argument("--variants", type=int, default=2)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--chain", help="chain definition JSON")
    p.set_defaults(func=cmd_gen_demos)

    p = sub.add_parser("augment", help="synthesize a labeled dataset from demos")
    p.add_argument("--demos", required=True, help="directory with demo_*.json")
    p.add_argument("--n", type=int, default=4000)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", required=True, help="output JSONL file")
    p.add_argument("--goal-sigma", type=float, default=0.15)
    p.add_argument("--perturb-scale", type=float, default=2e-5)
    p.add_argument("--chain")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("train", help="train a model on a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--metrics", help="metrics CSV path (default: <model>.metrics.csv)")
    p.add_argument("--epochs", type=int, default=250)
    p.add_argument("--batch", type=int, default=100)
    p.add_argument("--gamma", type=float, default=30.0)
    p.add_argument("--cz-max", type=float, default=5.0)
    p.add_argument("--cc-max", type=float, default=None)
    p.add_argument("--tau", type=float, default=0.67)
    p.add_argument("--lr", type=float, default=5e-4)
    p.add_argument("--k-z", type=int, default=5)
    p.add_argument("--k-c", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--chain")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("plan", help="decode a trajectory from a latent code")
    p.add_argument("--model", required=True)
    p.add_argument("--c", type=int, default=0, help="discrete class index")
    p.add_argument("--z", help="comma-separated continuous code")
    p.add_argument("--goal", required=True, help="comma-separated goal position")
    p.add_argument("--project", action="store_true")
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iters", type=int)
    p.add_argument("--out", help="trajectory JSON output path")
    p.add_argument("--full", action="store_true", help="print trajectory and path too")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("traverse", help="sweep one latent axis")
    p.add_argument("--model", required=True)
    p.add_argument("--axis", default="1", help="z index or 'c'")
    p.add_argument("--grid", help="comma-separated grid values")
    p.add_argument("--z", help="base z (defaults to zeros)")
    p.add_argument("--c", type=int, default=0)
    p.add_argument("--goal", required=True)
    p.add_argument("--out", required=True, help="bundle JSON path")
    p.set_defaults(func=cmd_traverse)

    p = sub.add_parser("eval", help="goal-generalization sweep, writes CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--demos", required=True)
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--seed", type=int, default=11)
    p.add_argument("--goal-sigma", type=float, default=0.15)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iters", type=int)
    p.add_argument("--out", required=True, help="CSV output path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("serve", help="HTTP planning service")
    p.add_argument("--model", required=True)
    p.add_argument("--demos", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.set_defaults(func=cmd_serve)
    return parser


def run_cli(argv=None):
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except AtpError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    except OSError as exc:
        print(json.dumps({"error": "OSError", "message": str(exc)}), file=sys.stderr)
        return 1


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
