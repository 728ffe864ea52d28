# Copyright 2025 ACCESS-NRI and contributors. See the top-level COPYRIGHT file for details.
# SPDX-License-Identifier: Apache-2.0

"""Command line interface, ``dtg-plan``.

Every subcommand reads its inputs by path and writes its outputs under ``--out``. The exit code is 0 on success
and 1 on any handled error, whose message is logged.
"""

import argparse
import logging
from collections.abc import Sequence
from dataclasses import replace
from pathlib import Path

import numpy as np

from dtg.planning.ablation import VARIANTS, ablation_suite, ablation_table
from dtg.planning.allocation import allocate_routes
from dtg.planning.bench import FORMULATIONS, bench_suite, formulation_speedup, plot_bench
from dtg.planning.config import load_config
from dtg.planning.graphgen import generate_graph
from dtg.planning.lp_format import export_lp, export_solution, import_solution
from dtg.planning.metrics import ProtectionLog, protection, protection_log, protection_metric
from dtg.planning.pipeline import check_routes, load_terrain, obstacle_cost_map, run_pipeline
from dtg.planning.rendering import graph_dot, graph_svg, plan_dot, plan_svg
from dtg.planning.serialization import (
    generated_to_dict,
    graph_from_dict,
    graph_to_dict,
    read_json,
    routes_from_dict,
    routes_to_dict,
    scenario_from_dict,
    scenario_to_dict,
    solution_from_dict,
    solution_to_dict,
    write_json,
)
from dtg.planning.simulation import SimulationParams, simulate_team
from dtg.planning.solver import solve_milp

logger = logging.getLogger(__name__)


def _model(args):
    graph = graph_from_dict(read_json(args.graph))
    scenario = scenario_from_dict(read_json(args.scenario))
    return graph, scenario, FORMULATIONS[args.formulation](graph, scenario)


def cmd_run(args) -> None:
    config = load_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["output_dir"] = args.out
    bundle = run_pipeline(replace(config, **overrides), resume=args.resume)
    if args.archive:
        bundle.archive(overwrite=True)
    for key, value in sorted(bundle.summary.items()):
        print(f"{key}: {value}")


def cmd_gen_graph(args) -> None:
    config = load_config(args.config)
    seed = config.seed if args.seed is None else args.seed
    config = replace(config, seed=seed)
    dem, obstacles = load_terrain(config)
    generated = generate_graph(dem, obstacles, config.observer_distribution(), config.graphgen, config.refine, seed)
    write_json(graph_to_dict(generated.graph), args.out / "graph.json")
    scenario = config.scenario.build(generated.graph, generated.edge_params)
    write_json(scenario_to_dict(scenario), args.out / "scenario.json")
    write_json(generated_to_dict(generated), args.out / "graphgen.json")
    print(f"{generated.graph!r}")


def cmd_build_model(args) -> None:
    _, _, model = _model(args)
    write_json(
        {"name": model.name, "variables": model.n_variables, "constraints": len(model.constraints)},
        args.out / "model.json",
    )
    print(f"{model!r}")


def cmd_export_lp(args) -> None:
    _, _, model = _model(args)
    path = args.out / f"{args.formulation}.lp"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(export_lp(model))
    print(path)


def cmd_solve(args) -> None:
    graph, scenario, model = _model(args)
    if args.import_solution is not None:
        solution = import_solution(args.import_solution.read_text(), model)
    else:
        report = solve_milp(model, budget=args.budget, method=args.method, node_limit=args.node_limit)
        print(f"status: {report.status.value}")
        if report.incumbent is None:
            raise RuntimeError(f"No plan found, solver ended with status {report.status.value}")
        solution = report.incumbent
        path = args.out / "solution.sol"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(export_solution(model, report.values, report.objective))
    problems = solution.check(graph, scenario)
    if problems:
        raise ValueError(f"Solution violates the model: {'; '.join(problems)}")
    write_json(solution_to_dict(solution), args.out / "solution.json")
    print(f"objective: {solution.objective}")


def cmd_allocate(args) -> None:
    graph = graph_from_dict(read_json(args.graph))
    solution = solution_from_dict(read_json(args.solution))
    starts = [loc for loc, n in zip(solution.locations, solution.p[:, 0], strict=True) for _ in range(int(n))]
    routes = allocate_routes(graph, solution.p, starts)
    check_routes(graph, solution, routes)
    write_json(routes_to_dict(routes), args.out / "routes.json")
    print(f"{routes!r}")


def cmd_simulate(args) -> None:
    graph = graph_from_dict(read_json(args.graph))
    routes = routes_from_dict(read_json(args.routes))
    params, cost_map = SimulationParams(), None
    if args.config is not None:
        config = load_config(args.config)
        _, obstacles = load_terrain(config)
        params, cost_map = config.simulation, obstacle_cost_map(obstacles)
    if args.seed is not None:
        params = replace(params, seed=args.seed)
    result = simulate_team(routes, graph, params, cost_map)
    path = args.out / "simulation.jsonl"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(result.to_jsonl())
    write_json(protection_log(result.records).to_dict(), args.out / "protection.json")
    print(f"{result!r}, min separation {result.min_separation():.3f} m")


def cmd_metric(args) -> None:
    log = ProtectionLog.from_dict(read_json(args.log))
    print(f"{protection}: {protection_metric(log, args.weights):.6f}")


def cmd_render(args) -> None:
    graph = graph_from_dict(read_json(args.graph))
    args.out.mkdir(parents=True, exist_ok=True)
    if args.routes is None:
        (args.out / "graph.svg").write_text(graph_svg(graph))
        (args.out / "graph.dot").write_text(graph_dot(graph))
    else:
        routes = routes_from_dict(read_json(args.routes))
        (args.out / "plan.svg").write_text(plan_svg(graph, routes))
        (args.out / "plan.dot").write_text(plan_dot(graph, routes))
    print(args.out)


def cmd_ablate(args) -> None:
    graph = graph_from_dict(read_json(args.graph))
    scenario = scenario_from_dict(read_json(args.scenario))
    results = ablation_suite(graph, scenario, budget=args.budget, method=args.method, variants=tuple(args.variants))
    rows = ablation_table(results)
    write_json(
        {
            "variants": rows,
            "solutions": {
                name: solution_to_dict(r.solution) for name, r in results.items() if r.solution is not None
            },
        },
        args.out / "ablation.json",
    )
    for row in rows:
        print(f"{row['variant']:>10}: {row['status']}, objective {row['objective']}")


def cmd_bench(args) -> None:
    stats = bench_suite(
        densities=tuple(args.densities),
        team_sizes=tuple(args.team_sizes),
        n_nodes=args.nodes,
        seeds=tuple(args.seeds),
        budget=args.budget,
        method=args.method,
    )
    plain = stats.pint.dequantify()
    plain = plain.rename({metric: metric.name for metric in stats.data_vars})
    write_json(plain.to_dict(data="list"), args.out / "bench.json")
    fig = plot_bench(stats, show=False)
    fig.savefig(args.out / "bench.png")
    speedup = formulation_speedup(stats).pint.dequantify()
    print(f"median speedup of milp over gmip: {float(np.nanmedian(speedup.values)):.2f}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dtg-plan", description="Multi-robot planning on dynamic topological graphs")
    parser.add_argument("-v", "--verbose", action="store_true", help="Log debug messages.")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name: str, func, summary: str, out: bool = True) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=summary)
        p.set_defaults(func=func)
        if out:
            p.add_argument("--out", type=Path, default=Path("."), help="Output directory.")
        return p

    def model_inputs(p: argparse.ArgumentParser):
        p.add_argument("--graph", type=Path, required=True, help="Graph JSON.")
        p.add_argument("--scenario", type=Path, required=True, help="Scenario JSON.")
        p.add_argument("--formulation", choices=sorted(FORMULATIONS), default="milp", help="Model formulation.")

    def solver_options(p: argparse.ArgumentParser):
        p.add_argument("--method", choices=("highs", "bnb"), default="highs", help="Solver backend.")
        p.add_argument("--budget", type=float, default=None, help="Time budget in seconds.")

    p = command("run", cmd_run, "Run the full pipeline from a config file.", out=False)
    p.add_argument("config", type=Path, help="Pipeline YAML config.")
    p.add_argument("--out", type=Path, default=None, help="Output directory, overriding the config.")
    p.add_argument("--seed", type=int, default=None, help="Random seed, overriding the config.")
    p.add_argument("--resume", action="store_true", help="Reuse the graph and solution of a previous run.")
    p.add_argument("--archive", action="store_true", help="Pack the artifacts into a tar.gz archive.")

    p = command("gen-graph", cmd_gen_graph, "Generate a graph and scenario from terrain.")
    p.add_argument("config", type=Path, help="Pipeline YAML config.")
    p.add_argument("--seed", type=int, default=None, help="Random seed, overriding the config.")

    model_inputs(command("build-model", cmd_build_model, "Build a model and report its size."))
    model_inputs(command("export-lp", cmd_export_lp, "Write a model in LP format."))

    p = command("solve", cmd_solve, "Solve a model.")
    model_inputs(p)
    solver_options(p)
    p.add_argument("--node-limit", type=int, default=None, help="Branch and bound node limit.")
    p.add_argument("--import-solution", type=Path, default=None, help="Read an external solution instead.")

    p = command("allocate", cmd_allocate, "Split a solution into robot routes.")
    p.add_argument("--graph", type=Path, required=True, help="Graph JSON.")
    p.add_argument("--solution", type=Path, required=True, help="Solution JSON.")

    p = command("simulate", cmd_simulate, "Execute routes with MPPI-controlled robots.")
    p.add_argument("--graph", type=Path, required=True, help="Graph JSON.")
    p.add_argument("--routes", type=Path, required=True, help="Routes JSON.")
    p.add_argument("--config", type=Path, default=None, help="Pipeline config for simulation parameters and terrain.")
    p.add_argument("--seed", type=int, default=None, help="Random seed.")

    p = command("metric", cmd_metric, "Compute the protection metric.", out=False)
    p.add_argument("--log", type=Path, required=True, help="Protection log JSON.")
    p.add_argument("--weights", type=float, nargs=3, default=(1.0, 1.0, 1.0), help="Overwatch, formation, cover.")

    p = command("render", cmd_render, "Render a graph, or a plan when routes are given, to SVG and DOT.")
    p.add_argument("--graph", type=Path, required=True, help="Graph JSON.")
    p.add_argument("--routes", type=Path, default=None, help="Routes JSON.")

    p = command("ablate", cmd_ablate, "Solve ablation variants of a scenario.")
    p.add_argument("--graph", type=Path, required=True, help="Graph JSON.")
    p.add_argument("--scenario", type=Path, required=True, help="Scenario JSON.")
    p.add_argument("--variants", nargs="+", choices=VARIANTS, default=list(VARIANTS), help="Variants to solve.")
    solver_options(p)

    p = command("bench", cmd_bench, "Benchmark both formulations on random graphs.")
    p.add_argument("--densities", type=float, nargs="+", default=[0.2, 0.5, 0.8], help="Edge densities.")
    p.add_argument("--team-sizes", type=int, nargs="+", default=[1, 2, 3], help="Team sizes.")
    p.add_argument("--nodes", type=int, default=6, help="Nodes per graph.")
    p.add_argument("--seeds", type=int, nargs="+", default=[0], help="Random seeds.")
    solver_options(p)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO, format="%(asctime)s %(name)s %(levelname)s: %(message)s"
    )
    try:
        args.func(args)
    except (OSError, KeyError, ValueError, RuntimeError) as e:
        logger.error(f"dtg-plan {args.command}: {e}")
        return 1
    return 0
