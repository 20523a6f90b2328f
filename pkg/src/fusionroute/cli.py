"""Command line interface: generate, route, validate, sweep."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import baseline, harness, netgraph, router
from .netgraph import GenParams, GeneratorKind
from .rate import PROB_TOL, exhaustive_rate, monte_carlo_rate


def _add_generate(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("generate", help="generate a random network document")
    p.add_argument("--switches", type=int, default=100)
    p.add_argument("--users", type=int, default=10)
    p.add_argument("--demands", type=int, default=20)
    p.add_argument("--degree", type=float, default=10.0)
    p.add_argument("--capacity", type=int, default=10)
    p.add_argument("--q", type=float, default=0.9)
    p.add_argument("--alpha", type=float, default=1e-4)
    p.add_argument("--area", type=float, default=10_000.0)
    p.add_argument(
        "--generator",
        choices=[g.value for g in GeneratorKind],
        default=GeneratorKind.WAXMAN.value,
    )
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=["text", "dot"], default="text")


def _add_route(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("route", help="compute a route plan for one network")
    p.add_argument("--network", required=True)
    p.add_argument("--demands", help="separate demand document (defaults to the network file)")
    p.add_argument(
        "--algo",
        choices=[a.value for a in harness.Algorithm],
        default=harness.Algorithm.NFUSION.value,
    )
    p.add_argument("--h", type=int, default=router.DEFAULT_PATHS_PER_WIDTH)
    p.add_argument("--out")
    p.add_argument("--format", choices=["text", "dot", "csv"], default="text")


def _add_validate(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("validate", help="check a plan against the oracles")
    p.add_argument("--network", required=True)
    p.add_argument("--plan", required=True)
    p.add_argument("--mc", type=int, default=0, help="Monte Carlo trials per demand")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-elements", type=int, default=24)


def _add_sweep(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("sweep", help="run a parameter sweep from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="CSV output path")
    p.add_argument("--plot", action="store_true", help="render a figure next to the CSV")
    p.add_argument("--no-timings", action="store_true", help="blank timing columns")


def _cmd_generate(args) -> int:
    params = GenParams(
        generator=GeneratorKind(args.generator),
        n_switches=args.switches,
        n_users=args.users,
        n_demands=args.demands,
        area_side=args.area,
        avg_degree=args.degree,
        capacity=args.capacity,
        swap_prob=args.q,
        alpha=args.alpha,
        seed=args.seed,
    )
    network, demands = netgraph.generate(params)
    out = Path(args.out)
    if args.format == "dot":
        out.write_text(netgraph.to_dot(network))
    else:
        out.write_bytes(netgraph.save_network(network, demands))
    print(
        f"wrote {out}: {len(network.user_ids())} users, "
        f"{len(network.switch_ids())} switches, {len(network.edges)} edges, "
        f"{len(demands)} demands, mean switch degree {network.mean_switch_degree():.2f}"
    )
    return 0


def _load_inputs(args):
    network = netgraph.load_network(Path(args.network).read_bytes())
    demand_src = Path(args.demands or args.network).read_bytes()
    demands = netgraph.load_demands(demand_src, network)
    if not demands:
        raise ValueError("no demands found in the input documents")
    return network, demands


def _cmd_route(args) -> int:
    network, demands = _load_inputs(args)
    algo = harness.Algorithm(args.algo)
    if algo in (harness.Algorithm.NFUSION, harness.Algorithm.ALG3ONLY):
        plan = router.run_pipeline(
            network, demands, args.h, augment=algo is harness.Algorithm.NFUSION
        )
        plan.verify(network)
        rates = {d.id: plan.demand_rate(network, d.id) for d in demands}
        doc = router.plan_to_document(network, plan, mode=algo.value)
        dot = router.plan_to_dot(network, plan)
    else:
        bplan = (
            baseline.run_qcast(network, demands, args.h)
            if algo is harness.Algorithm.QCAST
            else baseline.run_qcast_n(network, demands, args.h)
        )
        bplan.verify(network)
        rates = {d.id: bplan.demand_rate(network, d.id) for d in demands}
        doc = None
        dot = None
    total = sum(rates.values())
    print(f"algorithm={algo.value} total_rate={total:.12f}")
    for d in demands:
        print(f"  demand {d.id} ({d.source} -> {d.dest}): rate={rates[d.id]:.12f}")
    if args.out:
        out = Path(args.out)
        if args.format == "dot":
            if dot is None:
                raise ValueError("dot export is only available for flow-graph plans")
            out.write_text(dot)
        elif args.format == "csv":
            lines = ["demand,source,dest,rate"]
            lines += [f"{d.id},{d.source},{d.dest},{rates[d.id]:.12f}" for d in demands]
            out.write_text("\n".join(lines) + "\n")
        else:
            if doc is None:
                raise ValueError("plan export is only available for flow-graph plans")
            out.write_bytes(doc)
        print(f"wrote {out}")
    return 0


def _cmd_validate(args) -> int:
    network = netgraph.load_network(Path(args.network).read_bytes())
    plan = router.plan_from_document(Path(args.plan).read_bytes(), network)
    worst = 0.0
    failures = 0
    for did in sorted(plan.flow_graphs):
        fg = plan.flow_graphs[did]
        analytic = plan.demand_rate(network, did)
        exact = exhaustive_rate(network, fg, max_elements=args.max_elements)
        diff = abs(analytic - exact)
        worst = max(worst, diff)
        line = f"demand {did}: analytic={analytic:.12f} exhaustive={exact:.12f} |diff|={diff:.3e}"
        if args.mc:
            est, err = monte_carlo_rate(
                network, fg, args.mc, harness.derive_seed(args.seed, did)
            )
            line += f" mc={est:.6f}±{err:.6f}"
            if abs(est - exact) > 4 * max(err, 1e-12):
                failures += 1
                line += " MC-DEVIATES"
        print(line)
    print(f"max |analytic - exhaustive| = {worst:.3e}")
    ok = worst <= PROB_TOL and failures == 0
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


def _cmd_sweep(args) -> int:
    config = harness.parse_config(Path(args.config).read_text())
    rows = harness.run_experiment(config)
    out = Path(args.out)
    out.write_bytes(harness.emit_csv(rows, include_timings=not args.no_timings))
    print(f"wrote {out} ({len(rows)} rows)")
    if args.plot:
        from . import plots

        fig_path = plots.plot_sweep(rows, out.with_suffix(".png"))
        print(f"wrote {fig_path}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="fusionroute",
        description="Routing engine and simulator for fusion-capable quantum networks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _add_generate(sub)
    _add_route(sub)
    _add_validate(sub)
    _add_sweep(sub)
    args = parser.parse_args(argv)
    handlers = {
        "generate": _cmd_generate,
        "route": _cmd_route,
        "validate": _cmd_validate,
        "sweep": _cmd_sweep,
    }
    try:
        return handlers[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
