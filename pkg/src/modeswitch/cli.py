"""Command-line entry points for every pipeline stage.

Each subcommand is a thin adapter over one library operation; outputs are
identical to calling the operation directly with the same configuration.
Exit codes: 0 success, 1 operation failure (one diagnostic line on stderr),
2 usage error.
"""

from __future__ import annotations

import argparse
import os
import re
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import analysis, dataset as ds, pacmap, planner, policy as pol, training
from .errors import ModeSwitchError
from .lander import EnvConfig, load_env_config

DATASET_ENV_VAR = "MODESWITCH_DATASET"


def _point(text: str) -> tuple[str, int]:
    """Parse 'EPISODE:STEP' (an optional ep/step prefix is tolerated)."""
    m = re.fullmatch(r"(?:ep)?([A-Za-z0-9_-]+):(?:step)?(\d+)", text)
    if not m:
        raise argparse.ArgumentTypeError(
            f"expected EPISODE:STEP (e.g. 000012:40), got {text!r}"
        )
    return m.group(1), int(m.group(2))


def _env_config(path: str | None) -> EnvConfig:
    return load_env_config(path) if path else EnvConfig()


def _dataset_dir(args) -> Path:
    if args.dataset:
        return Path(args.dataset)
    env = os.environ.get(DATASET_ENV_VAR)
    if env:
        return Path(env)
    raise ModeSwitchError(
        f"no dataset directory given (use --dataset or ${DATASET_ENV_VAR})"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="modeswitch",
        description="Latent-space behavioral-mode analysis and switching.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a baseline policy with CEM search")
    p.add_argument("--out", required=True, help="policy JSON output path")
    p.add_argument("--env-config", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--activation", choices=["mish", "leaky_relu"], default="mish")
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--iterations", type=int, default=120)
    p.add_argument("--population", type=int, default=48)
    p.add_argument("--episodes-per-candidate", type=int, default=5)

    p = sub.add_parser("eval", help="evaluate a policy over sampled episodes")
    p.add_argument("--policy", required=True)
    p.add_argument("--env-config", default=None)
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("collect", help="roll out episodes into a dataset directory")
    p.add_argument("--policy", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--env-config", default=None)
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--widen", type=float, default=1.0,
                   help="scale the initial-state sampler ranges")

    p = sub.add_parser("embed", help="fit the 2D embedding of dataset latents")
    p.add_argument("--dataset", default=None)
    p.add_argument("--matrix", default=None,
                   help="embed a plain numeric matrix file instead "
                        "(one row per point, comma or whitespace separated)")
    p.add_argument("--episodes", default=None,
                   help="comma-separated episode ids (default: all)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--iters", type=int, default=450)
    p.add_argument("--neighbors", type=int, default=10)
    p.add_argument("--mn-ratio", type=float, default=0.5)
    p.add_argument("--fp-ratio", type=float, default=2.0)
    p.add_argument("--out", default=None,
                   help="output directory for --matrix mode")

    p = sub.add_parser("plan", help="plan actions toward a goal latent point")
    p.add_argument("--dataset", default=None)
    p.add_argument("--problem", default=None,
                   help="problem JSON file (state, goal, horizon, solver)")
    p.add_argument("--source", type=_point, metavar="EP:STEP")
    p.add_argument("--goal", type=_point, metavar="EP:STEP")
    p.add_argument("--horizon", type=int, default=40)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--out", default=None, help="plan JSON output path")

    p = sub.add_parser("switch", help="run baseline vs planned-intervention runs")
    p.add_argument("--dataset", default=None)
    p.add_argument("--source", required=True, type=_point, metavar="EP:STEP")
    p.add_argument("--goal", required=True, type=_point, metavar="EP:STEP")
    p.add_argument("--horizon", type=int, default=40)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--out", required=True, help="report output directory")

    p = sub.add_parser("report", help="re-export a report with embedding overlay")
    p.add_argument("--experiment", required=True, help="existing report directory")
    p.add_argument("--dataset", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--iters", type=int, default=450)

    p = sub.add_parser("serve", help="serve datasets and plan jobs over HTTP")
    p.add_argument("--dataset", default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8008)
    p.add_argument("--workers", type=int, default=1,
                   help="background job worker threads")

    p = sub.add_parser("gradcheck", help="verify planner gradients against FD")
    p.add_argument("--policy", required=True)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--horizon", type=int, default=40)

    return parser


def _cmd_train(args) -> int:
    cfg = training.TrainConfig(
        hidden_width=args.width, activation=args.activation, alpha=args.alpha,
        iterations=args.iterations, population=args.population,
        episodes_per_candidate=args.episodes_per_candidate,
    )
    policy, stats = training.train_baseline(_env_config(args.env_config), cfg,
                                            args.seed)
    pol.save_policy(policy, args.out)
    print(f"trained policy -> {args.out}")
    print(f"best training mean return: {stats.best_mean:.3f} "
          f"({stats.iterations_run} iterations)")
    return 0


def _cmd_eval(args) -> int:
    policy = pol.load_policy(args.policy)
    stats = pol.evaluate_policy(policy, _env_config(args.env_config),
                                args.episodes, args.seed)
    print(f"episodes: {args.episodes}")
    print(f"mean return: {stats.mean_return:.3f}")
    print(f"min return: {stats.min_return:.3f}")
    print(f"max return: {stats.max_return:.3f}")
    print(f"solved fraction: {stats.solved_fraction:.3f}")
    for key in sorted(stats.outcome_counts):
        print(f"outcome {key}: {stats.outcome_counts[key]}")
    return 0


def _cmd_collect(args) -> int:
    policy = pol.load_policy(args.policy)
    cfg = _env_config(args.env_config)
    if args.widen != 1.0:
        cfg = replace(cfg, sampler=cfg.sampler.widened(args.widen))
    records = analysis.collect_rollouts(policy, cfg, args.episodes, args.seed)
    ds.write_dataset(records, args.out, cfg, policy)
    counts: dict[str, int] = {}
    for rec in records:
        counts[rec.outcome.value] = counts.get(rec.outcome.value, 0) + 1
    print(f"collected {len(records)} episodes -> {args.out}")
    for key in sorted(counts):
        print(f"outcome {key}: {counts[key]}")
    return 0


def _cmd_embed(args) -> int:
    model = pacmap.PacmapEmbedding(
        n_neighbors=args.neighbors, mn_ratio=args.mn_ratio,
        fp_ratio=args.fp_ratio, n_iters=args.iters, seed=args.seed,
    )
    if args.matrix:
        delim = "," if "," in Path(args.matrix).read_text()[:4096] else None
        points = np.loadtxt(args.matrix, delimiter=delim, ndmin=2)
        directory = Path(args.out or ".")
        directory.mkdir(parents=True, exist_ok=True)
        n = len(points)
        ids, steps, outcomes = [""] * n, [0] * n, [""] * n
    else:
        directory = _dataset_dir(args)
        data = ds.load_dataset(directory)
        subset = args.episodes.split(",") if args.episodes else None
        ids, steps, outcomes, points = data.latent_matrix(subset)
    coords = model.fit_transform(points)
    ds.write_embedding_tables(directory, ids, steps, outcomes, coords,
                              model.loss_history_)
    print(f"embedded {len(ids)} points -> {directory / ds.EMBEDDING_FILE}")
    print(f"final loss: {model.loss_history_[-1]:.6f}")
    return 0


def _plan_config(args) -> planner.PlanConfig:
    return planner.PlanConfig(max_iters=args.max_iters, tol=args.tol,
                              restarts=args.restarts, seed=args.seed)


def _resolve_plan_inputs(args):
    """Problem definition from either a problem file or dataset point refs."""
    from .lander import LanderState

    spec_doc = None
    config = _plan_config(args)
    if args.problem:
        doc = ds.read_json(args.problem)
        solver = doc.get("solver", {})
        config = planner.PlanConfig(
            max_iters=int(solver.get("max_iters", args.max_iters)),
            tol=float(solver.get("tol", args.tol)),
            restarts=int(solver.get("restarts", args.restarts)),
            seed=int(solver.get("seed", args.seed)),
        )
        horizon = int(doc.get("horizon", args.horizon))
        if "policy" in doc:
            policy = pol.load_policy(doc["policy"])
            env_config = (load_env_config(doc["env_config"])
                          if "env_config" in doc else EnvConfig())
        else:
            data = ds.load_dataset(_dataset_dir(args))
            if data.policy is None:
                raise ModeSwitchError("dataset carries no policy file")
            policy, env_config = data.policy, data.env_config
        if "x0" in doc:
            x0 = LanderState.from_vector(doc["x0"][:6])
        else:
            data = ds.load_dataset(_dataset_dir(args))
            ref = doc["source"]
            x0 = data.get(str(ref["episode"])).state_at(int(ref["step"]))
        if "goal_latent" in doc:
            z_goal = np.asarray(doc["goal_latent"], dtype=float)
        else:
            data = ds.load_dataset(_dataset_dir(args))
            ref = doc["goal"]
            z_goal = data.get(str(ref["episode"])).latent_at(int(ref["step"]))
        spec_doc = {k: doc[k] for k in ("source", "goal") if k in doc}
        return x0, z_goal, horizon, policy, env_config, config, spec_doc

    if not args.source or not args.goal:
        raise ModeSwitchError("either --problem or --source/--goal is required")
    data = ds.load_dataset(_dataset_dir(args))
    if data.policy is None:
        raise ModeSwitchError("dataset carries no policy file")
    spec = analysis.InterventionSpec(
        args.source[0], args.source[1], args.goal[0], args.goal[1], args.horizon
    )
    x0, z_goal = spec.resolve(data)
    return (x0, z_goal, args.horizon, data.policy, data.env_config, config,
            spec.to_dict())


def _cmd_plan(args) -> int:
    x0, z_goal, horizon, policy, env_config, config, spec_doc = \
        _resolve_plan_inputs(args)
    problem = planner.PlanProblem(
        x0=x0, z_goal=z_goal, horizon=horizon, policy=policy,
        params=env_config.physics, obs_scales=env_config.obs_scales,
    )
    result = planner.plan(problem, config)
    doc = analysis._plan_to_dict(result)
    doc["version"] = 1
    if spec_doc:
        doc["spec"] = spec_doc
    out = args.out or "plan.json"
    ds.dump_json(doc, out)
    print(f"plan -> {out}")
    print(f"terminal objective: {result.terminal_objective:.6g} "
          f"({result.status.value}, {result.restarts_used} restarts)")
    return 0


def _cmd_switch(args) -> int:
    directory = _dataset_dir(args)
    data = ds.load_dataset(directory)
    if data.policy is None:
        raise ModeSwitchError(f"dataset {directory} has no {ds.POLICY_FILE}")
    spec = analysis.InterventionSpec(
        args.source[0], args.source[1], args.goal[0], args.goal[1], args.horizon
    )
    report = analysis.switch_experiment(data.policy, data.env_config, data,
                                        spec, _plan_config(args))
    analysis.export_report(report, args.out)
    print(f"report -> {args.out}")
    print(f"baseline return: {report.baseline_return:.3f} "
          f"({report.baseline.outcome.value})")
    if report.switched is not None:
        print(f"switched return: {report.switched_return:.3f} "
              f"({report.switched.outcome.value})")
        print(f"flip: {report.flip}")
    else:
        print(f"plan failed: {report.plan_error}")
    return 0


def _cmd_report(args) -> int:
    directory = _dataset_dir(args)
    data = ds.load_dataset(directory)
    report = analysis.load_report(args.experiment)
    _, _, _, latents = data.latent_matrix()
    model = pacmap.PacmapEmbedding(n_iters=args.iters, seed=args.seed)
    model.fit(latents)
    analysis.export_report(report, args.out, embedding=model)
    print(f"report with overlay -> {args.out}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(_dataset_dir(args), workers=args.workers)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def _cmd_gradcheck(args) -> int:
    policy = pol.load_policy(args.policy)
    rng = np.random.default_rng(args.seed)
    problem, _ = planner.planted_goal_problem(policy, rng, horizon=args.horizon)
    report = planner.gradient_check(problem, n_samples=args.samples,
                                    seed=args.seed)
    print(f"samples checked: {report.n_checked}")
    print(f"max relative error: {report.max_rel_error:.3e}")
    print(f"median relative error: {report.median_rel_error:.3e}")
    print(f"kink-adjacent samples skipped: {report.kink_skips}")
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "eval": _cmd_eval,
    "collect": _cmd_collect,
    "embed": _cmd_embed,
    "plan": _cmd_plan,
    "switch": _cmd_switch,
    "report": _cmd_report,
    "serve": _cmd_serve,
    "gradcheck": _cmd_gradcheck,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (ModeSwitchError, OSError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
