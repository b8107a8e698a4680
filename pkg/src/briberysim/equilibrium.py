"""Equilibrium checks and randomized verification of the collusion claims.

Machine-checks four claims about the two games, by direct enumeration over
randomly generated valid parameter sets:

* T1: in the no-collusion game, all-honest is a strict Nash equilibrium.
* T2: a per-minion contract deposit strictly above
  max_i(r_m_i + max(|r_d_i|, |r_dp_i|)) removes every incentive to disobey
  the contract's order, whatever the other nodes do.
* T3: in the collusion game, any subset deviating from all-honest to
  commitment earns at least its honest reward (and all-honest is therefore
  not strict: a lone deviator always breaks even).
* T4: in the collusion game, all-commit is a strict Nash equilibrium.

Everything here is exact Fraction arithmetic; profile scans are exhaustive
(2^n subsets), which caps enumeration at small n.
"""

from __future__ import annotations

import csv
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import IO, Sequence

from .games import (
    GameParams,
    NodeId,
    PowerDistribution,
    Strategy,
    StrategyProfile,
    Variant,
    all_commit,
    all_honest,
    opposing_strategy,
    params_to_json_dict,
    payoff_vector,
    utility,
)
from .rational import format_rational, format_rational_list
from .seeding import derive_seed

ENUMERATION_LIMIT = 12  # 2^12 opponent profiles per node is the largest exhaustive scan

THEOREM_IDS = ("T1", "T2", "T3", "T4")


class EnumerationLimitError(ValueError):
    """Requested an exhaustive scan over more nodes than the configured cap."""


@dataclass(frozen=True)
class Deviation:
    """A profitable-or-breaking-even unilateral deviation (Nash counterexample)."""

    node: NodeId
    strategy: Strategy
    payoff_before: Fraction
    payoff_after: Fraction

    def to_payload(self) -> dict:
        return {
            "node": self.node,
            "deviation": self.strategy.value,
            "payoff_before": format_rational(self.payoff_before),
            "payoff_after": format_rational(self.payoff_after),
        }


@dataclass(frozen=True)
class NashReport:
    is_strict_nash: bool
    counterexample: Deviation | None
    profiles_checked: int

    def to_payload(self) -> dict:
        return {
            "is_strict_nash": self.is_strict_nash,
            "profiles_checked": self.profiles_checked,
            "counterexample": None
            if self.counterexample is None
            else self.counterexample.to_payload(),
        }


def is_strict_nash(params: GameParams, profile: StrategyProfile) -> NashReport:
    """Check strictness of `profile` by flipping each node's strategy once.

    Strict means every unilateral flip strictly lowers the deviator's
    payoff; a flip that merely breaks even is already a counterexample.
    """
    base = payoff_vector(params, profile)
    checked = 1
    for node in range(profile.n):
        flipped_strategy = (
            opposing_strategy(profile.variant)
            if profile.choices[node] is Strategy.HONEST
            else Strategy.HONEST
        )
        flipped = profile.with_choice(node, flipped_strategy)
        after = utility(params, flipped, node)
        checked += 1
        if after >= base[node]:
            return NashReport(
                is_strict_nash=False,
                counterexample=Deviation(node, flipped_strategy, base[node], after),
                profiles_checked=checked,
            )
    return NashReport(is_strict_nash=True, counterexample=None, profiles_checked=checked)


@dataclass(frozen=True)
class NodeDominance:
    node: NodeId
    never_worse: bool
    strictly_better_somewhere: bool


@dataclass(frozen=True)
class DominanceReport:
    weakly_dominates: bool
    per_node: tuple[NodeDominance, ...]
    opponent_profiles_checked: int

    def to_payload(self) -> dict:
        return {
            "weakly_dominates": self.weakly_dominates,
            "opponent_profiles_checked": self.opponent_profiles_checked,
            "per_node": [
                {
                    "node": d.node,
                    "never_worse": d.never_worse,
                    "strictly_better_somewhere": d.strictly_better_somewhere,
                }
                for d in self.per_node
            ],
        }


def check_weak_dominance_game1(
    params: GameParams, max_nodes: int = ENUMERATION_LIMIT
) -> DominanceReport:
    """Does commitment weakly dominate honesty in the collusion game?

    For each node, enumerates all 2^(n-1) opponent assignments and compares
    the node's payoff under COMMIT vs HONEST: never worse everywhere, and
    strictly better against at least one opponent profile.
    """
    n = params.n
    if n > max_nodes:
        raise EnumerationLimitError(f"n = {n} exceeds the enumeration limit {max_nodes}")
    opponents_per_node = 2 ** (n - 1)
    per_node: list[NodeDominance] = []
    for node in range(n):
        others = [i for i in range(n) if i != node]
        never_worse = True
        strictly_better = False
        for mask in range(opponents_per_node):
            choices = [Strategy.HONEST] * n
            for bit, other in enumerate(others):
                if mask >> bit & 1:
                    choices[other] = Strategy.COMMIT
            choices[node] = Strategy.COMMIT
            u_commit = utility(params, StrategyProfile(tuple(choices), Variant.COLLUSION), node)
            choices[node] = Strategy.HONEST
            u_honest = utility(params, StrategyProfile(tuple(choices), Variant.COLLUSION), node)
            if u_commit < u_honest:
                never_worse = False
                break
            if u_commit > u_honest:
                strictly_better = True
        per_node.append(NodeDominance(node, never_worse, strictly_better))
    return DominanceReport(
        weakly_dominates=all(d.never_worse and d.strictly_better_somewhere for d in per_node),
        per_node=tuple(per_node),
        opponent_profiles_checked=opponents_per_node,
    )


@dataclass(frozen=True)
class CascadeStep:
    step: int
    node_flipped: NodeId
    deviating: tuple[NodeId, ...]
    profile: StrategyProfile
    payoffs: tuple[Fraction, ...]
    deviator_monotone: bool


@dataclass(frozen=True)
class CascadeTrace:
    """One deviation sequence: honest nodes flip to commitment one at a time."""

    order: tuple[NodeId, ...]
    initial_payoffs: tuple[Fraction, ...]
    steps: tuple[CascadeStep, ...]
    final_profile: StrategyProfile

    @property
    def all_monotone(self) -> bool:
        return all(s.deviator_monotone for s in self.steps)

    def to_payload(self) -> dict:
        return {
            "order": list(self.order),
            "initial_payoffs": format_rational_list(self.initial_payoffs),
            "steps": [
                {
                    "step": s.step,
                    "node_flipped": s.node_flipped,
                    "deviating_set": list(s.deviating),
                    "payoffs": format_rational_list(s.payoffs),
                    "deviator_monotone": s.deviator_monotone,
                }
                for s in self.steps
            ],
            "final_profile": [c.value for c in self.final_profile.choices],
            "all_monotone": self.all_monotone,
        }


def find_deviation_cascade(params: GameParams, order: Sequence[NodeId]) -> CascadeTrace:
    """Flip nodes from honest to committed in `order`, recording payoffs.

    A step is deviator-monotone when every node that has deviated so far
    earns at least what it earned at the previous step. `order` must list
    distinct node indices; covering all nodes ends at the all-commit
    profile.
    """
    n = params.n
    order = tuple(order)
    if len(set(order)) != len(order) or any(i < 0 or i >= n for i in order):
        raise ValueError(f"order {order!r} is not a permutation of node indices (n = {n})")

    profile = all_honest(n, Variant.COLLUSION)
    previous = payoff_vector(params, profile)
    initial = previous
    deviating: list[NodeId] = []
    steps: list[CascadeStep] = []
    for step_index, node in enumerate(order, start=1):
        profile = profile.with_choice(node, Strategy.COMMIT)
        deviating.append(node)
        payoffs = payoff_vector(params, profile)
        monotone = all(payoffs[i] >= previous[i] for i in deviating)
        steps.append(
            CascadeStep(
                step=step_index,
                node_flipped=node,
                deviating=tuple(sorted(deviating)),
                profile=profile,
                payoffs=payoffs,
                deviator_monotone=monotone,
            )
        )
        previous = payoffs
    return CascadeTrace(
        order=order, initial_payoffs=initial, steps=tuple(steps), final_profile=profile
    )


def cascade_to_csv(trace: CascadeTrace, fh: IO[str]) -> None:
    """CSV export: step, deviating_set, payoff_0..payoff_{n-1}, monotone."""
    n = len(trace.initial_payoffs)
    writer = csv.writer(fh)
    writer.writerow(["step", "deviating_set", *[f"payoff_{i}" for i in range(n)], "monotone"])
    writer.writerow([0, "", *format_rational_list(trace.initial_payoffs), True])
    for step in trace.steps:
        writer.writerow(
            [
                step.step,
                ";".join(str(i) for i in step.deviating),
                *format_rational_list(step.payoffs),
                step.deviator_monotone,
            ]
        )


# --- Deposit bound (T2) ---------------------------------------------------

def deposit_bound(params: GameParams) -> Fraction:
    """Infimum of deterring minion deposits: max_i(r_m_i + max(|r_d_i|, |r_dp_i|)).

    Valid deposits are strictly greater than this value; the bound itself
    is not always sufficient (see `verify_deposit_bound`).
    """
    return max(
        params.reward_malicious[i]
        + max(
            abs(params.reward_deviant_vs_honest[i]),
            abs(params.reward_deviant_vs_malicious[i]),
        )
        for i in range(params.n)
    )


def deposit_bound_attained(params: GameParams) -> bool:
    """True when some node's worst obey-vs-disobey payoff gap equals the bound.

    The bound over-approximates the true largest gap max_i(r_m_i -
    min(r_d_i, r_dp_i)) whenever the relevant penalty is positive; only
    when the two coincide does a deposit of exactly the bound fail.
    """
    true_max_gap = max(
        params.reward_malicious[i]
        - min(params.reward_deviant_vs_honest[i], params.reward_deviant_vs_malicious[i])
        for i in range(params.n)
    )
    return true_max_gap == deposit_bound(params)


@dataclass(frozen=True)
class DepositViolation:
    node: NodeId
    x: Fraction  # payoff for obeying the contract's order
    y: Fraction  # payoff for disobeying, before the deposit is slashed

    def to_payload(self) -> dict:
        return {"node": self.node, "x": format_rational(self.x), "y": format_rational(self.y)}


@dataclass(frozen=True)
class DepositCheck:
    sufficient: bool
    violation: DepositViolation | None
    pairs_checked: int

    def to_payload(self) -> dict:
        return {
            "sufficient": self.sufficient,
            "pairs_checked": self.pairs_checked,
            "violation": None if self.violation is None else self.violation.to_payload(),
        }


def verify_deposit_bound(params: GameParams, deposit: Fraction) -> DepositCheck:
    """Exhaustively check that losing `deposit` deters every order violation.

    A violating node earns y - deposit instead of the obeying payoff x,
    where x and y each range over the node's four possible rewards; the
    deposit suffices iff y - deposit < x for all 16 pairs at every node.
    """
    deposit = Fraction(deposit)
    checked = 0
    for node in range(params.n):
        rewards = (
            params.reward_malicious[node],
            params.reward_honest[node],
            params.reward_deviant_vs_honest[node],
            params.reward_deviant_vs_malicious[node],
        )
        for y in rewards:
            for x in rewards:
                checked += 1
                if y - deposit >= x:
                    return DepositCheck(
                        sufficient=False,
                        violation=DepositViolation(node=node, x=x, y=y),
                        pairs_checked=checked,
                    )
    return DepositCheck(sufficient=True, violation=None, pairs_checked=checked)


# --- Random instance generation -------------------------------------------

MUTATION_DEVIANT_REWARD_ABOVE_HONEST = "deviant_reward_above_honest"
MUTATIONS = (MUTATION_DEVIANT_REWARD_ABOVE_HONEST,)


def random_game_params(
    rng: random.Random,
    n_range: tuple[int, int] = (3, 8),
    reward_scale: int = 10,
    power_scale: int = 20,
    mutation: str | None = None,
) -> GameParams:
    """Draw a valid parameter set by rejection sampling with repair.

    Powers come from normalized positive random integers, redrawn until no
    node reaches the threshold; rewards are integers repaired to satisfy
    the ordering constraints. `mutation` deliberately breaks one repair
    (currently: draw r_d above r_h, so honest-protocol deviation pays),
    for verifying that the theorem checkers can fail.
    """
    if mutation is not None and mutation not in MUTATIONS:
        raise ValueError(f"unknown mutation {mutation!r}; known: {MUTATIONS}")
    n_min, n_max = n_range
    n = rng.randint(n_min, n_max)
    while True:
        weights = [rng.randint(1, power_scale) for _ in range(n)]
        total = sum(weights)
        powers = tuple(Fraction(w, total) for w in weights)
        # t in [1/2, 3/4], granularity 1/20
        threshold = Fraction(1, 2) + Fraction(rng.randint(0, 5), 20)
        if all(p < threshold for p in powers):
            break

    r_h = [Fraction(rng.randint(1, reward_scale)) for _ in range(n)]
    if mutation == MUTATION_DEVIANT_REWARD_ABOVE_HONEST:
        r_d = [r_h[i] + rng.randint(1, reward_scale) for i in range(n)]
    else:
        r_d = [r_h[i] - rng.randint(1, reward_scale) for i in range(n)]
    r_m = [r_h[i] + rng.randint(1, reward_scale) for i in range(n)]
    r_dp = [r_m[i] - rng.randint(1, 2 * reward_scale) for i in range(n)]
    return GameParams(
        powers=PowerDistribution(powers),
        threshold_t=threshold,
        reward_honest=tuple(r_h),
        reward_deviant_vs_honest=tuple(r_d),
        reward_malicious=tuple(r_m),
        reward_deviant_vs_malicious=tuple(r_dp),
    )


# --- Theorem verification --------------------------------------------------

@dataclass(frozen=True)
class TheoremFailure:
    instance_index: int
    params: GameParams
    description: str

    def to_payload(self) -> dict:
        return {
            "instance_index": self.instance_index,
            "params": params_to_json_dict(self.params),
            "description": self.description,
        }


@dataclass(frozen=True)
class VerificationReport:
    theorem: str
    instances_tested: int
    all_passed: bool
    first_failure: TheoremFailure | None

    def to_payload(self) -> dict:
        return {
            "theorem": self.theorem,
            "instances_tested": self.instances_tested,
            "all_passed": self.all_passed,
            "first_failure": None if self.first_failure is None else self.first_failure.to_payload(),
        }


def _check_t1(params: GameParams) -> str | None:
    report = is_strict_nash(params, all_honest(params.n, Variant.NO_COLLUSION))
    if not report.is_strict_nash:
        ce = report.counterexample
        return (
            f"all-honest not strict in the no-collusion game: node {ce.node} deviates to "
            f"{ce.strategy.value} for {format_rational(ce.payoff_after)} >= "
            f"{format_rational(ce.payoff_before)}"
        )
    return None


def _check_t3(params: GameParams) -> str | None:
    n = params.n
    t = params.threshold_t
    # subset power sums via the lowest-set-bit recurrence
    subset_power = [Fraction(0)] * (1 << n)
    for mask in range(1, 1 << n):
        low = mask & -mask
        subset_power[mask] = subset_power[mask ^ low] + params.powers[low.bit_length() - 1]
    for mask in range(1, 1 << n):
        ordered_malicious = subset_power[mask] > t
        for i in range(n):
            if not mask >> i & 1:
                continue
            payoff = params.reward_malicious[i] if ordered_malicious else params.reward_honest[i]
            if payoff < params.reward_honest[i]:
                return (
                    f"deviating subset {mask:#x}: node {i} earns {format_rational(payoff)} < "
                    f"honest reward {format_rational(params.reward_honest[i])}"
                )
    nash = is_strict_nash(params, all_honest(n, Variant.COLLUSION))
    if nash.is_strict_nash:
        return "all-honest is strict in the collusion game, but a lone deviator must break even"
    return None


def _check_t4(params: GameParams) -> str | None:
    report = is_strict_nash(params, all_commit(params.n))
    if not report.is_strict_nash:
        ce = report.counterexample
        return (
            f"all-commit not strict in the collusion game: node {ce.node} deviates to "
            f"{ce.strategy.value} for {format_rational(ce.payoff_after)} >= "
            f"{format_rational(ce.payoff_before)}"
        )
    return None


_CHECKS = {"T1": _check_t1, "T3": _check_t3, "T4": _check_t4}


def _validate_verifier_args(instances: int, n_range: tuple[int, int]) -> None:
    if instances < 1:
        raise ValueError("instances must be >= 1")
    n_min, n_max = n_range
    if not (3 <= n_min <= n_max <= 8):
        raise ValueError(f"n_range {n_range} must lie within [3, 8] (subset scans are 2^n)")


def verify_theorem(
    theorem: str,
    generator_seed: int,
    instances: int,
    n_range: tuple[int, int] = (3, 8),
    mutation: str | None = None,
) -> VerificationReport:
    """Check one equilibrium claim over randomly drawn valid parameter sets.

    T1 checks all-honest strictness in the no-collusion game; T3 scans all
    2^n - 1 deviating subsets in the collusion game (and that all-honest is
    not strict there); T4 checks all-commit strictness. The report is a
    pure function of (theorem, generator_seed, instances, n_range,
    mutation): each instance draws from its own stream derived from the
    seed and the instance index.
    """
    if theorem not in _CHECKS:
        raise ValueError(f"theorem must be one of {sorted(_CHECKS)}, got {theorem!r}")
    _validate_verifier_args(instances, n_range)
    check = _CHECKS[theorem]
    for index in range(instances):
        rng = random.Random(derive_seed(generator_seed, "instance", index))
        params = random_game_params(rng, n_range, mutation=mutation)
        failure = check(params)
        if failure is not None:
            return VerificationReport(
                theorem=theorem,
                instances_tested=index + 1,
                all_passed=False,
                first_failure=TheoremFailure(index, params, failure),
            )
    return VerificationReport(
        theorem=theorem, instances_tested=instances, all_passed=True, first_failure=None
    )


def verify_deposit_theorem(
    generator_seed: int,
    instances: int,
    n_range: tuple[int, int] = (3, 8),
) -> VerificationReport:
    """Randomized check of the deposit bound (T2).

    For every instance, a deposit one unit above the bound must pass the
    exhaustive 16-pair scan; when the bound coincides with the true largest
    payoff gap, the bound itself must fail (witnessing that the bound is an
    exclusive one).
    """
    _validate_verifier_args(instances, n_range)
    for index in range(instances):
        rng = random.Random(derive_seed(generator_seed, "instance", index))
        params = random_game_params(rng, n_range)
        bound = deposit_bound(params)
        above = verify_deposit_bound(params, bound + 1)
        if not above.sufficient:
            return VerificationReport(
                theorem="T2",
                instances_tested=index + 1,
                all_passed=False,
                first_failure=TheoremFailure(
                    index,
                    params,
                    f"deposit {format_rational(bound + 1)} above the bound judged insufficient",
                ),
            )
        if deposit_bound_attained(params):
            at_bound = verify_deposit_bound(params, bound)
            if at_bound.sufficient:
                return VerificationReport(
                    theorem="T2",
                    instances_tested=index + 1,
                    all_passed=False,
                    first_failure=TheoremFailure(
                        index,
                        params,
                        f"bound {format_rational(bound)} is attained yet judged sufficient",
                    ),
                )
    return VerificationReport(
        theorem="T2", instances_tested=instances, all_passed=True, first_failure=None
    )
