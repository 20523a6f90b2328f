"""Experiment configuration, parameter sweeps, and result emission.

A sweep varies one parameter over a list of values; each point generates
``networks_per_point`` seeded networks, runs every requested algorithm on
each, and averages the analytic total rate.  Results serialize to a CSV
with a fixed column order and formatting so seeded runs are reproducible
byte for byte (timing columns can be blanked for such comparisons).
"""

from __future__ import annotations

import configparser
import enum
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import baseline, router
from .netgraph import Demand, GenParams, GeneratorKind, Network, generate
from .router import plan_to_dot
from .rate import monte_carlo_rate

CSV_COLUMNS = (
    "sweep_var",
    "value",
    "algorithm",
    "seed",
    "rate",
    "mc_rate",
    "mc_stderr",
    "t_alg1_ms",
    "t_alg3_ms",
    "t_alg4_ms",
)


class Algorithm(enum.Enum):
    NFUSION = "nfusion"
    ALG3ONLY = "alg3only"
    QCAST = "qcast"
    QCASTN = "qcastn"


class SweepVariable(enum.Enum):
    P_UNIFORM = "p_uniform"
    Q = "q"
    CAPACITY = "capacity"
    N_SWITCHES = "n_switches"
    N_DEMANDS = "n_demands"
    AVG_DEGREE = "avg_degree"
    GENERATOR = "generator"


@dataclass(frozen=True)
class ExperimentConfig:
    base: GenParams
    variable: SweepVariable
    values: tuple
    networks_per_point: int = 5
    algorithms: tuple[Algorithm, ...] = (Algorithm.NFUSION,)
    h: int = router.DEFAULT_PATHS_PER_WIDTH
    mc_trials: int | None = None
    seed: int = 0

    def validate(self) -> None:
        if self.networks_per_point < 1:
            raise ValueError("networks_per_point must be at least 1")
        if not self.algorithms:
            raise ValueError("no algorithms selected")
        if self.h < 1:
            raise ValueError("h must be at least 1")
        for value in self.values:
            _check_value(self.variable, value)


def _check_value(variable: SweepVariable, value) -> None:
    if variable is SweepVariable.P_UNIFORM:
        if not 0.0 < float(value) <= 1.0:
            raise ValueError(f"p_uniform value {value} outside (0, 1]")
    elif variable is SweepVariable.Q:
        if not 0.0 <= float(value) <= 1.0:
            raise ValueError(f"q value {value} outside [0, 1]")
    elif variable is SweepVariable.GENERATOR:
        GeneratorKind(value)  # raises on unknown name
    else:
        if float(value) <= 0:
            raise ValueError(f"{variable.value} value {value} must be positive")
        if variable is not SweepVariable.AVG_DEGREE and int(value) != float(value):
            raise ValueError(f"{variable.value} value {value} must be an integer")


def _apply_sweep(base: GenParams, variable: SweepVariable, value) -> GenParams:
    if variable is SweepVariable.P_UNIFORM:
        return base  # probabilities are overridden after generation
    if variable is SweepVariable.Q:
        return replace(base, swap_prob=float(value))
    if variable is SweepVariable.CAPACITY:
        return replace(base, capacity=int(value))
    if variable is SweepVariable.N_SWITCHES:
        return replace(base, n_switches=int(value))
    if variable is SweepVariable.N_DEMANDS:
        return replace(base, n_demands=int(value))
    if variable is SweepVariable.AVG_DEGREE:
        return replace(base, avg_degree=float(value))
    return replace(base, generator=GeneratorKind(value))


def override_link_probs(network: Network, p: float) -> Network:
    """Copy of the network with every link probability set to ``p``."""
    if not 0.0 < p <= 1.0:
        raise ValueError(f"uniform link probability {p} outside (0, 1]")
    edges = [replace(e, link_prob=p) for e in network.edges]
    return Network(list(network.nodes), edges)


def derive_seed(*parts: int) -> int:
    """Stable 63-bit seed derived from integer parts."""
    state = np.random.SeedSequence(parts).generate_state(1, dtype=np.uint64)[0]
    return int(state >> np.uint64(1))


@dataclass(frozen=True)
class NetworkRun:
    """One algorithm on one generated network."""

    gen_seed: int
    rate: float
    mc_rate: float | None
    mc_stderr: float | None
    timings: dict


@dataclass(frozen=True)
class ResultRow:
    variable: SweepVariable
    value: object
    algorithm: Algorithm
    seed: int
    runs: tuple[NetworkRun, ...]
    mean_rate: float

    @property
    def per_network_rates(self) -> list[float]:
        return [r.rate for r in self.runs]


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values) if values else 0.0


def _run_algorithm(
    network: Network,
    demands: Sequence[Demand],
    algorithm: Algorithm,
    h: int,
    mc_trials: int | None,
    mc_seed: int,
) -> NetworkRun:
    if algorithm in (Algorithm.NFUSION, Algorithm.ALG3ONLY):
        plan = router.run_pipeline(
            network, demands, h, augment=algorithm is Algorithm.NFUSION
        )
        plan.verify(network)
        rate = plan.total_rate(network)
        timings = plan.timings
        mc_rate = mc_stderr = None
        if mc_trials:
            total = 0.0
            var = 0.0
            for idx, did in enumerate(sorted(plan.flow_graphs)):
                est, err = monte_carlo_rate(
                    network, plan.flow_graphs[did], mc_trials, derive_seed(mc_seed, idx)
                )
                total += est
                var += err * err
            mc_rate, mc_stderr = total, math.sqrt(var)
        return NetworkRun(0, rate, mc_rate, mc_stderr, timings)
    if algorithm is Algorithm.QCAST:
        plan = baseline.run_qcast(network, demands, h)
    else:
        plan = baseline.run_qcast_n(network, demands, h)
    plan.verify(network)
    return NetworkRun(0, plan.total_rate(network), None, None, plan.timings)


def run_experiment(config: ExperimentConfig) -> list[ResultRow]:
    """Run the sweep and return one aggregated row per (value, algorithm)."""
    config.validate()
    rows: list[ResultRow] = []
    for vi, value in enumerate(config.values):
        params = _apply_sweep(config.base, config.variable, value)
        per_algo: dict[Algorithm, list[NetworkRun]] = {a: [] for a in config.algorithms}
        for ni in range(config.networks_per_point):
            gen_seed = derive_seed(config.seed, vi, ni)
            network, demands = generate(replace(params, seed=gen_seed))
            if config.variable is SweepVariable.P_UNIFORM:
                network = override_link_probs(network, float(value))
            for ai, algorithm in enumerate(config.algorithms):
                run = _run_algorithm(
                    network,
                    demands,
                    algorithm,
                    config.h,
                    config.mc_trials,
                    derive_seed(config.seed, vi, ni, ai),
                )
                per_algo[algorithm].append(replace(run, gen_seed=gen_seed))
        for algorithm in config.algorithms:
            runs = tuple(per_algo[algorithm])
            rows.append(
                ResultRow(
                    config.variable,
                    value,
                    algorithm,
                    config.seed,
                    runs,
                    _mean([r.rate for r in runs]),
                )
            )
    return rows


# ---------------------------------------------------------------------------
# Emission


def _fmt_value(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, GeneratorKind):
        return value.value
    if isinstance(value, int):
        return str(value)
    return f"{float(value):g}"


def _fmt_opt(value: float | None) -> str:
    return "" if value is None else f"{value:.12f}"


def emit_csv(rows: Sequence[ResultRow], *, include_timings: bool = True) -> bytes:
    """Render rows to CSV bytes with fixed column order and formatting."""
    lines = [",".join(CSV_COLUMNS)]
    for row in rows:
        mc_rates = [r.mc_rate for r in row.runs if r.mc_rate is not None]
        mc_errs = [r.mc_stderr for r in row.runs if r.mc_stderr is not None]
        mc_rate = _mean(mc_rates) if mc_rates else None
        mc_stderr = (
            math.sqrt(sum(e * e for e in mc_errs)) / len(mc_errs) if mc_errs else None
        )
        if include_timings:
            t = [
                f"{_mean([r.timings.get(k, 0.0) for r in row.runs]):.3f}"
                for k in ("alg1_ms", "alg3_ms", "alg4_ms")
            ]
        else:
            t = ["", "", ""]
        lines.append(
            ",".join(
                [
                    row.variable.value,
                    _fmt_value(row.value),
                    row.algorithm.value,
                    str(row.seed),
                    f"{row.mean_rate:.12f}",
                    _fmt_opt(mc_rate),
                    _fmt_opt(mc_stderr),
                    *t,
                ]
            )
        )
    return ("\n".join(lines) + "\n").encode()


def emit_dot(network: Network, plan: router.RoutePlan) -> bytes:
    return plan_to_dot(network, plan).encode()


# ---------------------------------------------------------------------------
# Config files


def parse_config(text: str) -> ExperimentConfig:
    """Parse a flat key/value config with [network], [sweep], [run] sections."""
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ValueError(f"malformed config: {exc}") from exc

    net = parser["network"] if parser.has_section("network") else {}
    base = GenParams(
        generator=GeneratorKind(net.get("generator", "waxman")),
        n_switches=int(net.get("switches", 100)),
        n_users=int(net.get("users", 10)),
        n_demands=int(net.get("demands", 20)),
        area_side=float(net.get("area_side", 10_000.0)),
        avg_degree=float(net.get("avg_degree", 10.0)),
        capacity=int(net.get("capacity", 10)),
        swap_prob=float(net.get("q", 0.9)),
        alpha=float(net.get("alpha", 1e-4)),
    )

    if not parser.has_section("sweep"):
        raise ValueError("config missing [sweep] section")
    sweep = parser["sweep"]
    try:
        variable = SweepVariable(sweep.get("variable", ""))
    except ValueError as exc:
        raise ValueError(f"unknown sweep variable {sweep.get('variable')!r}") from exc
    raw_values = [v.strip() for v in sweep.get("values", "").split(",") if v.strip()]
    values: list = []
    for raw in raw_values:
        if variable is SweepVariable.GENERATOR:
            values.append(raw)
        elif variable in (SweepVariable.P_UNIFORM, SweepVariable.Q, SweepVariable.AVG_DEGREE):
            values.append(float(raw))
        else:
            values.append(int(raw))
    networks_per_point = int(sweep.get("networks_per_point", 5))

    run = parser["run"] if parser.has_section("run") else {}
    algo_names = [a.strip() for a in run.get("algorithms", "nfusion").split(",") if a.strip()]
    try:
        algorithms = tuple(Algorithm(a) for a in algo_names)
    except ValueError as exc:
        raise ValueError(f"unknown algorithm in {algo_names}") from exc
    mc_trials = int(run.get("mc_trials", 0)) or None

    config = ExperimentConfig(
        base=base,
        variable=variable,
        values=tuple(values),
        networks_per_point=networks_per_point,
        algorithms=algorithms,
        h=int(run.get("h", router.DEFAULT_PATHS_PER_WIDTH)),
        mc_trials=mc_trials,
        seed=int(run.get("seed", 0)),
    )
    config.validate()
    return config
