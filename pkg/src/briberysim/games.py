"""Strategic-form model of validator collusion.

A blockchain is maintained by n rational nodes, node i holding voting power
v_i with sum(v) = 1. A protocol (honest or malicious) executes in a period
only if the power behind it strictly exceeds a public threshold t >= 1/2.
Two games share one parameter set:

* the no-collusion game: each node independently runs the honest or the
  malicious protocol;
* the collusion game: a briber's contract collects commitments, and orders
  the committed nodes to run the malicious protocol only once their joint
  power exceeds t (otherwise it orders the honest protocol, so commitment
  is never punished).

Per-node rewards:

* reward_honest (r_h)               honest protocol executes, node ran it
* reward_deviant_vs_honest (r_d)    honest protocol executes, node deviated
* reward_malicious (r_m)            malicious protocol executes, node ran it
* reward_deviant_vs_malicious (r_dp) malicious protocol executes, node did not

The model's standing assumptions, referenced by number in validation
messages and scenario errors:

1. nodes have strictly positive powers normalized to sum exactly 1 (n >= 2);
2. an external contract platform with a perfect oracle exists (modeled as
   plain in-process data, nothing to validate here);
3. r_h > 0 and r_d < r_h for every node;
4. r_m > r_h and r_dp < r_m for every node;
5. 1/2 <= t < 1 and no single node reaches t on its own.

All comparisons against t are strict and exact: power sums landing exactly
on t count as "not enough", which is why every quantity is a Fraction.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterable, Sequence

from .rational import format_rational, format_rational_list, parse_rational, parse_rational_list

NodeId = int


class Strategy(Enum):
    """A node's pure strategy."""

    HONEST = "honest"        # run the honest protocol
    MALICIOUS = "malicious"  # run the malicious protocol unconditionally
    COMMIT = "commit"        # commit to the bribery contract and obey its order


class Variant(Enum):
    """Which game a profile belongs to."""

    NO_COLLUSION = "no_collusion"  # strategies {HONEST, MALICIOUS}
    COLLUSION = "collusion"        # strategies {HONEST, COMMIT}


LEGAL_STRATEGIES: dict[Variant, frozenset[Strategy]] = {
    Variant.NO_COLLUSION: frozenset({Strategy.HONEST, Strategy.MALICIOUS}),
    Variant.COLLUSION: frozenset({Strategy.HONEST, Strategy.COMMIT}),
}


def opposing_strategy(variant: Variant) -> Strategy:
    """The non-honest strategy available in a variant."""
    return Strategy.MALICIOUS if variant is Variant.NO_COLLUSION else Strategy.COMMIT


class ProfileVariantMismatch(ValueError):
    """A strategy profile uses strategies illegal for its game variant."""


@dataclass(frozen=True)
class PowerDistribution:
    """Per-node voting power shares.

    Construction only coerces values to Fractions; whether the distribution
    is admissible (all positive, sums to exactly 1) is a validation question
    answered by `validate_params`.
    """

    powers: tuple[Fraction, ...]

    def __post_init__(self):
        object.__setattr__(self, "powers", tuple(Fraction(p) for p in self.powers))

    def __len__(self) -> int:
        return len(self.powers)

    def __getitem__(self, index: int) -> Fraction:
        return self.powers[index]

    def __iter__(self):
        return iter(self.powers)

    @property
    def n(self) -> int:
        return len(self.powers)

    def total(self) -> Fraction:
        return sum(self.powers, Fraction(0))

    def is_normalized(self) -> bool:
        return all(p > 0 for p in self.powers) and self.total() == 1


@dataclass(frozen=True)
class GameParams:
    """One parameter set shared by both games.

    Reward vectors are per-node (heterogeneous rewards are allowed); use
    `GameParams.uniform` when every node earns the same amounts. Arbitrary
    candidates are accepted here so that `validate_params` can report
    violations as data.
    """

    powers: PowerDistribution
    threshold_t: Fraction
    reward_honest: tuple[Fraction, ...]
    reward_deviant_vs_honest: tuple[Fraction, ...]
    reward_malicious: tuple[Fraction, ...]
    reward_deviant_vs_malicious: tuple[Fraction, ...]

    def __post_init__(self):
        object.__setattr__(self, "threshold_t", Fraction(self.threshold_t))
        for name in (
            "reward_honest",
            "reward_deviant_vs_honest",
            "reward_malicious",
            "reward_deviant_vs_malicious",
        ):
            values = tuple(Fraction(v) for v in getattr(self, name))
            if len(values) != self.powers.n:
                raise ValueError(
                    f"{name} has {len(values)} entries for {self.powers.n} nodes"
                )
            object.__setattr__(self, name, values)

    @property
    def n(self) -> int:
        return self.powers.n

    @classmethod
    def uniform(
        cls,
        powers: Iterable[Fraction | int | str],
        threshold_t: Fraction | int | str,
        reward_honest: Fraction | int | str,
        reward_deviant_vs_honest: Fraction | int | str,
        reward_malicious: Fraction | int | str,
        reward_deviant_vs_malicious: Fraction | int | str,
    ) -> "GameParams":
        """Build params where every node has the same four rewards."""
        dist = PowerDistribution(tuple(Fraction(p) for p in powers))
        n = dist.n
        return cls(
            powers=dist,
            threshold_t=Fraction(threshold_t),
            reward_honest=(Fraction(reward_honest),) * n,
            reward_deviant_vs_honest=(Fraction(reward_deviant_vs_honest),) * n,
            reward_malicious=(Fraction(reward_malicious),) * n,
            reward_deviant_vs_malicious=(Fraction(reward_deviant_vs_malicious),) * n,
        )


@dataclass(frozen=True)
class AssumptionViolation:
    """One violated model assumption, found by `validate_params`."""

    assumption: int
    node: NodeId | None
    message: str

    def __str__(self) -> str:
        return self.message


@dataclass(frozen=True)
class StrategyProfile:
    """One strategy per node, tied to a game variant."""

    choices: tuple[Strategy, ...]
    variant: Variant

    def __post_init__(self):
        object.__setattr__(self, "choices", tuple(self.choices))
        legal = LEGAL_STRATEGIES[self.variant]
        for i, choice in enumerate(self.choices):
            if choice not in legal:
                raise ProfileVariantMismatch(
                    f"node {i} plays {choice.value}, illegal in {self.variant.value}"
                )

    @property
    def n(self) -> int:
        return len(self.choices)

    def with_choice(self, node: NodeId, strategy: Strategy) -> "StrategyProfile":
        choices = list(self.choices)
        choices[node] = strategy
        return StrategyProfile(tuple(choices), self.variant)


def all_honest(n: int, variant: Variant) -> StrategyProfile:
    return StrategyProfile((Strategy.HONEST,) * n, variant)


def all_malicious(n: int) -> StrategyProfile:
    return StrategyProfile((Strategy.MALICIOUS,) * n, Variant.NO_COLLUSION)


def all_commit(n: int) -> StrategyProfile:
    return StrategyProfile((Strategy.COMMIT,) * n, Variant.COLLUSION)


@dataclass(frozen=True)
class AggregatePowers:
    """Power split induced by a profile: honest side vs the opposing side
    (malicious nodes in the no-collusion game, committed nodes otherwise)."""

    v_h: Fraction
    v_opposing: Fraction


def validate_params(params: GameParams) -> list[AssumptionViolation]:
    """Check every model assumption; an empty list means the params are valid.

    Violations are data, not exceptions: each one names the assumption
    number and, where applicable, the offending node index.
    """
    violations: list[AssumptionViolation] = []
    n = params.n
    t = params.threshold_t

    if n < 2:
        violations.append(
            AssumptionViolation(1, None, f"Assumption 1: need at least 2 nodes, got {n}")
        )
    for i, p in enumerate(params.powers):
        if p <= 0:
            violations.append(
                AssumptionViolation(
                    1, i, f"Assumption 1: v_{i} = {format_rational(p)} is not strictly positive"
                )
            )
    total = params.powers.total()
    if total != 1:
        violations.append(
            AssumptionViolation(
                1, None, f"Assumption 1: powers sum to {format_rational(total)}, not 1"
            )
        )

    for i in range(n):
        r_h = params.reward_honest[i]
        r_d = params.reward_deviant_vs_honest[i]
        if r_h <= 0:
            violations.append(
                AssumptionViolation(
                    3, i, f"Assumption 3: r_h_{i} = {format_rational(r_h)} is not positive"
                )
            )
        if r_d >= r_h:
            violations.append(
                AssumptionViolation(
                    3,
                    i,
                    f"Assumption 3: r_d_{i} = {format_rational(r_d)} >= "
                    f"r_h_{i} = {format_rational(r_h)}",
                )
            )

    for i in range(n):
        r_h = params.reward_honest[i]
        r_m = params.reward_malicious[i]
        r_dp = params.reward_deviant_vs_malicious[i]
        if r_m <= r_h:
            violations.append(
                AssumptionViolation(
                    4,
                    i,
                    f"Assumption 4: r_m_{i} = {format_rational(r_m)} <= "
                    f"r_h_{i} = {format_rational(r_h)}",
                )
            )
        if r_dp >= r_m:
            violations.append(
                AssumptionViolation(
                    4,
                    i,
                    f"Assumption 4: r_dp_{i} = {format_rational(r_dp)} >= "
                    f"r_m_{i} = {format_rational(r_m)}",
                )
            )

    if t < Fraction(1, 2):
        violations.append(
            AssumptionViolation(5, None, f"Assumption 5: t = {format_rational(t)} < 1/2")
        )
    # t >= 1 makes every protocol unreachable (total power is 1), so the
    # threshold would be meaningless; reported under the same assumption.
    if t >= 1:
        violations.append(
            AssumptionViolation(
                5, None, f"Assumption 5: t = {format_rational(t)} >= 1, unreachable threshold"
            )
        )
    for i, p in enumerate(params.powers):
        if p >= t:
            violations.append(
                AssumptionViolation(
                    5, i, f"Assumption 5: v_{i} = {format_rational(p)} >= t = {format_rational(t)}"
                )
            )

    return violations


def is_valid(params: GameParams) -> bool:
    return not validate_params(params)


def aggregate_powers(profile: StrategyProfile, powers: PowerDistribution) -> AggregatePowers:
    """Sum powers on each side of a profile.

    For normalized distributions v_h + v_opposing == 1 exactly; both sides
    are summed independently rather than taking a complement, so that the
    identity is a checkable property of the arithmetic.
    """
    if profile.n != powers.n:
        raise ValueError(f"profile has {profile.n} choices for {powers.n} nodes")
    v_h = Fraction(0)
    v_opposing = Fraction(0)
    for choice, power in zip(profile.choices, powers):
        if choice is Strategy.HONEST:
            v_h += power
        else:
            v_opposing += power
    return AggregatePowers(v_h=v_h, v_opposing=v_opposing)


def utility_game0(params: GameParams, profile: StrategyProfile, node: NodeId) -> Fraction:
    """Payoff of `node` in the no-collusion game.

    Exactly one case applies: honest protocol executes (v_h > t), malicious
    protocol executes (v_m > t), or neither side clears the threshold and
    the system stalls, paying everyone 0.
    """
    if profile.variant is not Variant.NO_COLLUSION:
        raise ProfileVariantMismatch("utility_game0 needs a no-collusion profile")
    agg = aggregate_powers(profile, params.powers)
    honest = profile.choices[node] is Strategy.HONEST
    if agg.v_h > params.threshold_t:
        return params.reward_honest[node] if honest else params.reward_deviant_vs_honest[node]
    if agg.v_opposing > params.threshold_t:
        return params.reward_deviant_vs_malicious[node] if honest else params.reward_malicious[node]
    return Fraction(0)


def utility_game1(params: GameParams, profile: StrategyProfile, node: NodeId) -> Fraction:
    """Payoff of `node` in the collusion game.

    The contract orders the malicious protocol only when committed power
    exceeds t; in every other regime the committed nodes run the honest
    protocol, so the full network earns the honest reward. A stall can
    therefore never happen in this game.
    """
    if profile.variant is not Variant.COLLUSION:
        raise ProfileVariantMismatch("utility_game1 needs a collusion profile")
    agg = aggregate_powers(profile, params.powers)
    if agg.v_opposing > params.threshold_t:
        if profile.choices[node] is Strategy.COMMIT:
            return params.reward_malicious[node]
        return params.reward_deviant_vs_malicious[node]
    return params.reward_honest[node]


def utility(params: GameParams, profile: StrategyProfile, node: NodeId) -> Fraction:
    if profile.variant is Variant.NO_COLLUSION:
        return utility_game0(params, profile, node)
    return utility_game1(params, profile, node)


def payoff_vector(params: GameParams, profile: StrategyProfile) -> tuple[Fraction, ...]:
    """All nodes' payoffs for one profile, computing the power split once."""
    agg = aggregate_powers(profile, params.powers)
    t = params.threshold_t
    payoffs: list[Fraction] = []
    if profile.variant is Variant.NO_COLLUSION:
        for i, choice in enumerate(profile.choices):
            honest = choice is Strategy.HONEST
            if agg.v_h > t:
                payoffs.append(
                    params.reward_honest[i] if honest else params.reward_deviant_vs_honest[i]
                )
            elif agg.v_opposing > t:
                payoffs.append(
                    params.reward_deviant_vs_malicious[i] if honest else params.reward_malicious[i]
                )
            else:
                payoffs.append(Fraction(0))
    else:
        ordered_malicious = agg.v_opposing > t
        for i, choice in enumerate(profile.choices):
            if ordered_malicious:
                payoffs.append(
                    params.reward_malicious[i]
                    if choice is Strategy.COMMIT
                    else params.reward_deviant_vs_malicious[i]
                )
            else:
                payoffs.append(params.reward_honest[i])
    return tuple(payoffs)


# JSON document schema: powers/t/r_h/r_d/r_m/r_dp, rationals as strings.

def params_to_json_dict(params: GameParams) -> dict:
    return {
        "powers": format_rational_list(params.powers),
        "t": format_rational(params.threshold_t),
        "r_h": format_rational_list(params.reward_honest),
        "r_d": format_rational_list(params.reward_deviant_vs_honest),
        "r_m": format_rational_list(params.reward_malicious),
        "r_dp": format_rational_list(params.reward_deviant_vs_malicious),
    }


def params_from_json_dict(doc: dict, context: str = "params") -> GameParams:
    """Parse a params document, naming the missing/invalid field on error."""
    if not isinstance(doc, dict):
        raise ValueError(f"{context}: expected an object")
    for key in ("powers", "t", "r_h", "r_d", "r_m", "r_dp"):
        if key not in doc:
            raise ValueError(f"{context}: missing field '{key}'")
    powers = PowerDistribution(parse_rational_list(doc["powers"], f"{context}.powers"))
    return GameParams(
        powers=powers,
        threshold_t=parse_rational(doc["t"], f"{context}.t"),
        reward_honest=parse_rational_list(doc["r_h"], f"{context}.r_h"),
        reward_deviant_vs_honest=parse_rational_list(doc["r_d"], f"{context}.r_d"),
        reward_malicious=parse_rational_list(doc["r_m"], f"{context}.r_m"),
        reward_deviant_vs_malicious=parse_rational_list(doc["r_dp"], f"{context}.r_dp"),
    )


def profile_from_choices(choices: Sequence[str], variant: Variant) -> StrategyProfile:
    """Build a profile from strategy value strings ("honest", "commit", ...)."""
    return StrategyProfile(tuple(Strategy(c) for c in choices), variant)
