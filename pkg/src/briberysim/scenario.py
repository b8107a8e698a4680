"""Scenario loading and batch execution.

A scenario is a JSON file bundling game parameters and/or a chain-sim
config with an ordered task list. Tasks either verify a claim (theorem
checks, dominance, cascade monotonicity, deposit bound) or produce data
(contract trace replay, chain simulations, parameter sweeps). Reports are
machine-readable: one JSON report per run plus per-task CSV artifacts.

Reproducibility contract: every random draw derives from the scenario seed
and a task/run/cell index path, frequencies are reported as exact
count/total rationals, and the serialized report contains no timestamps,
so rerunning a scenario yields a byte-identical report.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from . import __version__
from .chainsim import (
    Consensus,
    SimConfig,
    run_attack_detailed,
    sim_config_from_payload,
    trace_to_csv,
)
from .contract import replay_events, summary_to_csv
from .equilibrium import (
    cascade_to_csv,
    check_weak_dominance_game1,
    deposit_bound,
    deposit_bound_attained,
    find_deviation_cascade,
    verify_deposit_bound,
    verify_theorem,
)
from .games import (
    GameParams,
    PowerDistribution,
    params_from_json_dict,
    validate_params,
)
from .rational import format_rational, parse_rational
from .seeding import derive_seed

SCHEMA_VERSION = 1

TASK_KINDS = (
    "verify_t1",
    "verify_t3",
    "verify_t4",
    "dominance",
    "cascade",
    "deposit_bound",
    "contract_trace",
    "chain_sim",
    "sweep",
)

DEFAULT_INSTANCES = {"verify_t1": 1000, "verify_t3": 500, "verify_t4": 1000}
DEFAULT_SWEEP_CELL_CAP = 512


class ScenarioError(ValueError):
    """A scenario file failed to parse or validate."""


@dataclass(frozen=True)
class TaskSpec:
    kind: str
    options: dict


@dataclass(frozen=True)
class Scenario:
    schema_version: int
    name: str
    seed: int
    params: GameParams | None
    sim_payload: dict | None
    tasks: tuple[TaskSpec, ...]
    output_dir: str | None
    base_dir: Path

    def sim_config(self, rng_seed: int) -> SimConfig:
        if self.sim_payload is None:
            raise ScenarioError("scenario has no 'sim' section")
        return sim_config_from_payload(self.sim_payload, "sim", rng_seed=rng_seed)

    def require_params(self, task: str) -> GameParams:
        if self.params is None:
            raise ScenarioError(f"task '{task}' needs the scenario 'params' section")
        return self.params


def load_scenario(path: str | Path) -> Scenario:
    """Load and fully validate a scenario file.

    Parse errors name the offending field; game parameters are validated
    against the model assumptions and any violation is a load error.
    """
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            # parse_float receives the raw text, so 0.55 becomes exactly 11/20
            doc = json.load(fh, parse_float=Fraction)
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario {path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ScenarioError(f"scenario {path}: top level must be an object")

    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ScenarioError(
            f"scenario {path}: schema_version must be {SCHEMA_VERSION}, got {version!r}"
        )
    if "name" not in doc or not isinstance(doc["name"], str):
        raise ScenarioError(f"scenario {path}: missing string field 'name'")
    if "seed" not in doc or not isinstance(doc["seed"], int):
        raise ScenarioError(f"scenario {path}: missing integer field 'seed'")

    params = None
    if "params" in doc:
        try:
            params = params_from_json_dict(doc["params"], "params")
        except ValueError as exc:
            raise ScenarioError(f"scenario {path}: {exc}") from exc
        violations = validate_params(params)
        if violations:
            raise ScenarioError(
                f"scenario {path}: params violate assumptions: "
                + "; ".join(str(v) for v in violations)
            )

    sim_payload = None
    if "sim" in doc:
        sim_payload = doc["sim"]
        try:
            sim_config_from_payload(sim_payload, "sim", rng_seed=0)  # structural check
        except ValueError as exc:
            raise ScenarioError(f"scenario {path}: {exc}") from exc

    raw_tasks = doc.get("tasks", [])
    if not isinstance(raw_tasks, list):
        raise ScenarioError(f"scenario {path}: 'tasks' must be an array")
    tasks: list[TaskSpec] = []
    for index, entry in enumerate(raw_tasks):
        if not isinstance(entry, dict) or "kind" not in entry:
            raise ScenarioError(f"scenario {path}: tasks[{index}] needs a 'kind' field")
        kind = entry["kind"]
        if kind not in TASK_KINDS:
            raise ScenarioError(
                f"scenario {path}: tasks[{index}].kind {kind!r} not one of {TASK_KINDS}"
            )
        options = {k: v for k, v in entry.items() if k != "kind"}
        tasks.append(TaskSpec(kind=kind, options=options))

    scenario = Scenario(
        schema_version=version,
        name=doc["name"],
        seed=doc["seed"],
        params=params,
        sim_payload=sim_payload,
        tasks=tuple(tasks),
        output_dir=doc.get("output_dir"),
        base_dir=path.parent,
    )
    _check_task_inputs(scenario)
    return scenario


def _check_task_inputs(scenario: Scenario) -> None:
    for index, task in enumerate(scenario.tasks):
        where = f"tasks[{index}] ({task.kind})"
        if task.kind in ("dominance", "cascade", "deposit_bound") and scenario.params is None:
            raise ScenarioError(f"{where}: scenario has no 'params' section")
        if task.kind in ("chain_sim",) and scenario.sim_payload is None:
            raise ScenarioError(f"{where}: scenario has no 'sim' section")
        if task.kind == "cascade":
            order = task.options.get("order")
            if not isinstance(order, list) or not all(isinstance(i, int) for i in order):
                raise ScenarioError(f"{where}: 'order' must be an array of node indices")
        if task.kind == "contract_trace":
            events = task.options.get("events")
            if not isinstance(events, str):
                raise ScenarioError(f"{where}: 'events' must be a path string")
            if not (scenario.base_dir / events).exists():
                raise ScenarioError(f"{where}: events file not found: {events}")
        if task.kind == "sweep":
            grid = task.options.get("grid")
            if not isinstance(grid, dict):
                raise ScenarioError(f"{where}: 'grid' must be an object of axis arrays")


@dataclass(frozen=True)
class TaskResult:
    kind: str
    index: int
    passed: bool | None  # None: informational task, no pass/fail meaning
    payload: dict
    artifacts: tuple[str, ...] = ()

    def to_payload(self) -> dict:
        return {
            "kind": self.kind,
            "index": self.index,
            "passed": self.passed,
            "artifacts": list(self.artifacts),
            "result": self.payload,
        }


@dataclass
class RunReport:
    scenario_name: str
    seed: int
    tool_version: str
    tasks: list[TaskResult] = field(default_factory=list)
    wall_time_s: float = 0.0  # console-only; kept out of the serialized payload

    @property
    def all_passed(self) -> bool:
        return all(t.passed is not False for t in self.tasks)

    @property
    def exit_code(self) -> int:
        return 0 if self.all_passed else 1

    def to_payload(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "scenario": self.scenario_name,
            "seed": self.seed,
            "tool_version": self.tool_version,
            "all_passed": self.all_passed,
            "tasks": [t.to_payload() for t in self.tasks],
        }


def report_json(report: RunReport) -> str:
    return json.dumps(report.to_payload(), indent=2, sort_keys=True) + "\n"


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def run_scenario(
    scenario: Scenario,
    output_dir: str | Path | None = None,
    seed: int | None = None,
) -> RunReport:
    """Execute the scenario's tasks in declared order and write artifacts.

    `seed` overrides the scenario seed. Task failures are results (reflected
    in the report and the exit code), not exceptions; only I/O and malformed
    inputs raise.
    """
    seed = scenario.seed if seed is None else seed
    out = Path(output_dir) if output_dir is not None else (
        Path(scenario.output_dir) if scenario.output_dir else None
    )
    report = RunReport(scenario_name=scenario.name, seed=seed, tool_version=__version__)
    started = time.perf_counter()
    for index, task in enumerate(scenario.tasks):
        report.tasks.append(_run_task(scenario, task, index, seed, out))
    report.wall_time_s = time.perf_counter() - started
    if out is not None:
        _write(out / "report.json", report_json(report))
    return report


def _run_task(
    scenario: Scenario, task: TaskSpec, index: int, seed: int, out: Path | None
) -> TaskResult:
    task_seed = derive_seed(seed, "task", index)
    opts = task.options
    artifacts: list[str] = []

    if task.kind in ("verify_t1", "verify_t3", "verify_t4"):
        theorem = task.kind.removeprefix("verify_").upper()
        instances = int(opts.get("instances", DEFAULT_INSTANCES[task.kind]))
        n_range = tuple(opts.get("n_range", (3, 8)))
        mutation = opts.get("mutation")
        verification = verify_theorem(theorem, task_seed, instances, n_range, mutation=mutation)
        return TaskResult(task.kind, index, verification.all_passed, verification.to_payload())

    if task.kind == "dominance":
        params = scenario.require_params(task.kind)
        dominance = check_weak_dominance_game1(params)
        return TaskResult(task.kind, index, dominance.weakly_dominates, dominance.to_payload())

    if task.kind == "cascade":
        params = scenario.require_params(task.kind)
        trace = find_deviation_cascade(params, tuple(opts["order"]))
        if out is not None:
            import io

            buffer = io.StringIO()
            cascade_to_csv(trace, buffer)
            name = f"cascade_{index}.csv"
            _write(out / name, buffer.getvalue())
            artifacts.append(name)
        return TaskResult(task.kind, index, trace.all_monotone, trace.to_payload(), tuple(artifacts))

    if task.kind == "deposit_bound":
        params = scenario.require_params(task.kind)
        bound = deposit_bound(params)
        above = verify_deposit_bound(params, bound + 1)
        attained = deposit_bound_attained(params)
        at_bound = verify_deposit_bound(params, bound)
        passed = above.sufficient and (not attained or not at_bound.sufficient)
        payload = {
            "deposit_bound": format_rational(bound),
            "bound_is_exclusive": True,
            "bound_attained": attained,
            "check_above_bound": above.to_payload(),
            "check_at_bound": at_bound.to_payload(),
        }
        return TaskResult(task.kind, index, passed, payload)

    if task.kind == "contract_trace":
        events_path = scenario.base_dir / opts["events"]
        with open(events_path, "r", encoding="utf-8") as fh:
            replay = replay_events(fh)
        summary = replay.summary()
        if out is not None:
            import io

            buffer = io.StringIO()
            summary_to_csv(summary, buffer)
            name = f"contract_trace_{index}.csv"
            _write(out / name, buffer.getvalue())
            artifacts.append(name)
        payload = {
            "events": opts["events"],
            "final_phase": replay.final_state.phase.value,
            "final_order": replay.final_state.order.value,
            "settlement": summary.to_payload(),
        }
        return TaskResult(task.kind, index, summary.conservation_holds(), payload, tuple(artifacts))

    if task.kind == "chain_sim":
        runs = int(opts.get("runs", 1))
        # stream 0 of the sim-run seed space; sweep cell c uses stream c, so a
        # single-cell sweep reproduces a direct chain_sim task exactly
        cfg_index = 0
        successes = 0
        first_payload = None
        for run_index in range(runs):
            config = scenario.sim_config(derive_seed(seed, "sim-run", cfg_index, run_index))
            detail = run_attack_detailed(config, record_trace=bool(opts.get("trace")) and run_index == 0)
            if detail.result.success:
                successes += 1
            if run_index == 0:
                first_payload = detail.result.to_payload()
                if opts.get("trace") and out is not None:
                    import io

                    buffer = io.StringIO()
                    trace_to_csv(detail.trace, buffer)
                    name = f"chain_trace_{index}.csv"
                    _write(out / name, buffer.getvalue())
                    artifacts.append(name)
        payload = {
            "runs": runs,
            "successes": successes,
            "success_rate": format_rational(Fraction(successes, runs)),
            "success_rate_decimal": f"{successes / runs:.6f}",
            "first_run": first_payload,
        }
        return TaskResult(task.kind, index, None, payload, tuple(artifacts))

    if task.kind == "sweep":
        return _run_sweep(scenario, task, index, seed, out)

    raise ScenarioError(f"unknown task kind {task.kind!r}")


def _run_sweep(
    scenario: Scenario, task: TaskSpec, index: int, seed: int, out: Path | None
) -> TaskResult:
    """Parameter sweep over bribe pool, minion share, confirmations, threshold.

    Each cell synthesizes a 4-node network (two minions and two honest
    nodes splitting their sides evenly, so no single node reaches the
    threshold for any share in (0, 1)), runs seeded attack simulations, and
    derives the bribed reward vector and deposit bound. Cells whose derived
    parameters violate an assumption are recorded as rejected rows.
    """
    opts = task.options
    grid = opts["grid"]

    def axis(key: str, default: list) -> list:
        values = grid.get(key, default)
        if not isinstance(values, list) or not values:
            raise ScenarioError(f"sweep grid axis '{key}' must be a non-empty array")
        return values

    d_m_axis = [parse_rational(v, "grid.d_m") for v in axis("d_m", ["9"])]
    share_axis = [parse_rational(v, "grid.minion_share") for v in axis("minion_share", ["3/4"])]
    conf_axis = [int(v) for v in axis("confirmations", [3])]
    t_axis = [parse_rational(v, "grid.t") for v in axis("t", ["1/2"])]

    runs_per_cell = int(opts.get("runs_per_cell", 100))
    horizon = int(opts.get("horizon_slots", 2000))
    consensus = Consensus(opts.get("consensus", "pow_longest_chain"))
    r_h = parse_rational(opts.get("r_h", 2), "sweep.r_h")
    r_d = parse_rational(opts.get("r_d", -1), "sweep.r_d")
    r_dp = parse_rational(opts.get("r_dp", -3), "sweep.r_dp")
    cap = int(opts.get("max_cells", DEFAULT_SWEEP_CELL_CAP))

    cells = [
        (d_m, share, conf, t)
        for d_m in d_m_axis
        for share in share_axis
        for conf in conf_axis
        for t in t_axis
    ]
    if len(cells) > cap:
        raise ScenarioError(f"sweep has {len(cells)} cells, exceeding the cap {cap}")

    rows: list[dict] = []
    for cell_index, (d_m, share, conf, t) in enumerate(cells):
        row: dict = {
            "cell": cell_index,
            "d_m": format_rational(d_m),
            "minion_share": format_rational(share),
            "confirmations": conf,
            "t": format_rational(t),
        }
        if not 0 < share < 1:
            row.update(valid=False, violation=f"minion share {format_rational(share)} not in (0, 1)")
            rows.append(row)
            continue
        powers = PowerDistribution((share / 2, share / 2, (1 - share) / 2, (1 - share) / 2))
        candidate = GameParams(
            powers=powers,
            threshold_t=t,
            reward_honest=(r_h,) * 4,
            reward_deviant_vs_honest=(r_d,) * 4,
            reward_malicious=tuple(r_h + p * d_m for p in powers),
            reward_deviant_vs_malicious=(r_dp,) * 4,
        )
        violations = validate_params(candidate)
        if violations:
            row.update(valid=False, violation="; ".join(str(v) for v in violations))
            rows.append(row)
            continue
        successes = 0
        for run_index in range(runs_per_cell):
            config = SimConfig(
                powers=powers,
                minions=frozenset({0, 1}),
                consensus=consensus,
                confirmations=conf,
                horizon_slots=horizon,
                block_reward=Fraction(1),
                double_spend_value=d_m,
                rng_seed=derive_seed(seed, "sim-run", cell_index, run_index),
                threshold_t=t,
            )
            if run_attack_detailed(config).result.success:
                successes += 1
        row.update(
            valid=True,
            violation="",
            runs=runs_per_cell,
            successes=successes,
            success_rate=format_rational(Fraction(successes, runs_per_cell)),
            success_rate_decimal=f"{successes / runs_per_cell:.6f}",
            r_m_min=format_rational(min(candidate.reward_malicious)),
            r_m_max=format_rational(max(candidate.reward_malicious)),
            deposit_bound=format_rational(deposit_bound(candidate)),
        )
        rows.append(row)

    artifacts: list[str] = []
    if out is not None:
        import csv
        import io

        buffer = io.StringIO()
        fieldnames = [
            "cell",
            "d_m",
            "minion_share",
            "confirmations",
            "t",
            "valid",
            "violation",
            "runs",
            "successes",
            "success_rate",
            "success_rate_decimal",
            "r_m_min",
            "r_m_max",
            "deposit_bound",
        ]
        writer = csv.DictWriter(buffer, fieldnames=fieldnames, restval="")
        writer.writeheader()
        writer.writerows(rows)
        name = f"sweep_{index}.csv"
        _write(out / name, buffer.getvalue())
        artifacts.append(name)

    payload = {"cells": len(cells), "runs_per_cell": runs_per_cell, "rows": rows}
    return TaskResult("sweep", index, None, payload, tuple(artifacts))
