"""Double-spend fork simulation.

Desk-scale model of the malicious protocol: a payment lands in the first
block after genesis; once that block is buried under the required number of
confirmations, colluding nodes (minions) abandon the canonical chain and
work on a fork rooted at the target block's parent, reverting the payment
if the fork wins.

Block production is one block per slot, the producer drawn with probability
equal to its power share (Proof-of-Work hash rate and Proof-of-Stake stake
are both abstracted this way). Honest nodes always extend the longest chain
they have, keeping their current chain on ties (first-seen), so the fork
must become strictly longer to win.

Two consensus flavors:

* longest-chain (PoW): the race alone decides; success probabilities obey
  the gambler's-ruin closed form (see `catch_up_probability`).
* deposit-slashing (PoS): working the fork means signing a second block at
  an already-signed height, a slashable offense. Every fork block by a
  minion is counted as a double-sign and spawns a slashing proof; honest
  producers include all pending proofs in their blocks, minions never do.
  The fork wins only if minion power exceeds the endorsement threshold for
  the required number of consecutive post-confirmation slots and the fork
  outgrows the honest chain; then the honest blocks carrying the proofs are
  reverted with the rest, so no proof survives on the final chain.
"""

from __future__ import annotations

import random
import warnings
from bisect import bisect_right
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Iterable, Sequence

from .games import GameParams, NodeId, PowerDistribution, validate_params
from .rational import format_rational, format_rational_list, parse_rational, parse_rational_list


class Consensus(Enum):
    POW_LONGEST_CHAIN = "pow_longest_chain"
    POS_SLASHING = "pos_slashing"


@dataclass(frozen=True)
class Block:
    id: int
    parent: int | None
    height: int
    producer: NodeId | None  # None for genesis
    slot: int                # -1 for genesis
    contains_target_tx: bool = False
    contains_slashing_proof: bool = False


@dataclass
class ChainState:
    """Block tree built during one run; single-threaded, mutated in place."""

    blocks: dict[int, Block]
    canonical_tip: int
    target_block: int | None
    confirmations_required: int

    def height_of(self, block_id: int) -> int:
        return self.blocks[block_id].height

    def canonical_chain(self) -> list[Block]:
        """Blocks from genesis to the canonical tip."""
        chain = []
        cursor: int | None = self.canonical_tip
        while cursor is not None:
            block = self.blocks[cursor]
            chain.append(block)
            cursor = block.parent
        chain.reverse()
        return chain

    def confirmations(self, block_id: int) -> int:
        """Confirmation count on the canonical chain; the block itself counts as 1."""
        block = self.blocks[block_id]
        return self.blocks[self.canonical_tip].height - block.height + 1


@dataclass(frozen=True)
class SimConfig:
    powers: PowerDistribution
    minions: frozenset[NodeId]
    consensus: Consensus
    confirmations: int
    horizon_slots: int
    block_reward: Fraction
    double_spend_value: Fraction
    rng_seed: int
    threshold_t: Fraction = Fraction(1, 2)  # PoS endorsement threshold

    def __post_init__(self):
        object.__setattr__(self, "minions", frozenset(self.minions))
        object.__setattr__(self, "block_reward", Fraction(self.block_reward))
        object.__setattr__(self, "double_spend_value", Fraction(self.double_spend_value))
        object.__setattr__(self, "threshold_t", Fraction(self.threshold_t))
        if not self.powers.is_normalized():
            raise ValueError("sim config: powers must be positive and sum to exactly 1")
        if self.confirmations < 1:
            raise ValueError("sim config: confirmations must be >= 1")
        if self.horizon_slots <= 0:
            raise ValueError("sim config: horizon_slots must be > 0")
        if any(i < 0 or i >= self.powers.n for i in self.minions):
            raise ValueError("sim config: minions must be node indices")

    def minion_power(self) -> Fraction:
        return sum((self.powers[i] for i in self.minions), Fraction(0))


@dataclass(frozen=True)
class AttackResult:
    success: bool
    slots_elapsed: int
    fork_length: int
    reverted_blocks: int
    per_node_blocks_canonical: dict[NodeId, int]
    consensus: Consensus
    slashing_proofs_censored: int = 0
    double_signs: dict[NodeId, int] = field(default_factory=dict)

    def to_payload(self) -> dict:
        return {
            "success": self.success,
            "slots_elapsed": self.slots_elapsed,
            "fork_length": self.fork_length,
            "reverted_blocks": self.reverted_blocks,
            "per_node_blocks_canonical": {
                str(i): c for i, c in sorted(self.per_node_blocks_canonical.items())
            },
            "consensus": self.consensus.value,
            "slashing_proofs_censored": self.slashing_proofs_censored,
            "double_signs": {str(i): c for i, c in sorted(self.double_signs.items())},
        }


@dataclass(frozen=True)
class TraceRow:
    slot: int
    producer: NodeId
    chain: str   # "canonical" or "fork"
    height: int
    event: str   # "", "target", "trigger", "success"


@dataclass(frozen=True)
class SimRun:
    result: AttackResult
    chain: ChainState
    trace: tuple[TraceRow, ...]


def catch_up_probability(minion_share: Fraction, deficit: int) -> Fraction:
    """Gambler's-ruin closed form for the post-confirmation race.

    Each post-confirmation slot goes to the fork with probability p =
    minion_share and to the honest chain with probability q = 1 - p; the
    probability that the fork ever closes a gap of `deficit` net blocks is
    (p/q)^deficit for p < q and 1 otherwise. In this simulation's geometry
    the fork starts `confirmations` blocks behind and must end strictly
    ahead, so winning means closing a deficit of confirmations + 1.
    """
    minion_share = Fraction(minion_share)
    if deficit < 0:
        raise ValueError("deficit must be >= 0")
    if minion_share >= Fraction(1, 2):
        return Fraction(1)
    ratio = minion_share / (1 - minion_share)
    return ratio**deficit


def run_attack_detailed(config: SimConfig, record_trace: bool = False) -> SimRun:
    """Run one seeded attack simulation, keeping the block tree and trace."""
    rng = random.Random(config.rng_seed)
    n = config.powers.n
    # cumulative producer boundaries; float rounding only biases draws by ~1e-16
    boundaries: list[float] = []
    acc = Fraction(0)
    for p in config.powers:
        acc += p
        boundaries.append(float(acc))
    boundaries[-1] = 1.0

    genesis = Block(id=0, parent=None, height=0, producer=None, slot=-1)
    chain = ChainState(
        blocks={0: genesis},
        canonical_tip=0,
        target_block=None,
        confirmations_required=config.confirmations,
    )
    trace: list[TraceRow] = []
    next_id = 1
    honest_tip = genesis
    fork_root: Block | None = None
    fork_tip: Block | None = None
    attack_started = False
    trigger_slot = -1
    success = False
    slots_elapsed = 0

    pos = config.consensus is Consensus.POS_SLASHING
    pos_can_finalize = config.minion_power() > config.threshold_t
    double_signs: dict[NodeId, int] = {}
    pending_proofs = 0
    total_offenses = 0
    proofs_in_block: dict[int, int] = {}

    for slot in range(config.horizon_slots):
        slots_elapsed = slot + 1
        producer = bisect_right(boundaries, rng.random())
        if producer >= n:  # guard against rng.random() == 1.0 edge
            producer = n - 1
        event = ""

        if not attack_started:
            block = Block(
                id=next_id,
                parent=honest_tip.id,
                height=honest_tip.height + 1,
                producer=producer,
                slot=slot,
                contains_target_tx=chain.target_block is None,
            )
            next_id += 1
            chain.blocks[block.id] = block
            honest_tip = block
            chain.canonical_tip = block.id
            if block.contains_target_tx:
                chain.target_block = block.id
                event = "target"
            target = chain.blocks[chain.target_block]
            if chain.confirmations(chain.target_block) >= config.confirmations:
                attack_started = True
                trigger_slot = slot
                fork_root = chain.blocks[target.parent]
                fork_tip = fork_root
                event = "trigger" if event == "" else event
            if record_trace:
                trace.append(TraceRow(slot, producer, "canonical", block.height, event))
            continue

        if producer in config.minions:
            # producing on the fork re-signs a height the producer already
            # attested on the canonical chain: one double-sign per fork block
            block = Block(
                id=next_id,
                parent=fork_tip.id,
                height=fork_tip.height + 1,
                producer=producer,
                slot=slot,
            )
            next_id += 1
            chain.blocks[block.id] = block
            fork_tip = block
            if pos:
                double_signs[producer] = double_signs.get(producer, 0) + 1
                total_offenses += 1
                pending_proofs += 1
            side = "fork"
        else:
            include = pos and pending_proofs > 0
            block = Block(
                id=next_id,
                parent=honest_tip.id,
                height=honest_tip.height + 1,
                producer=producer,
                slot=slot,
                contains_slashing_proof=include,
            )
            next_id += 1
            chain.blocks[block.id] = block
            honest_tip = block
            chain.canonical_tip = block.id
            if include:
                proofs_in_block[block.id] = pending_proofs
                pending_proofs = 0
            side = "canonical"

        fork_ahead = fork_tip.height > honest_tip.height
        if config.consensus is Consensus.POW_LONGEST_CHAIN:
            success = fork_ahead
        else:
            endorsed_slots = slot - trigger_slot
            success = fork_ahead and pos_can_finalize and endorsed_slots >= config.confirmations
        if success:
            event = "success"
        if record_trace:
            trace.append(TraceRow(slot, producer, side, block.height, event))
        if success:
            break

    reverted = 0
    if success:
        reverted = honest_tip.height - fork_root.height
        chain.canonical_tip = fork_tip.id

    per_node = {i: 0 for i in range(n)}
    proofs_on_final = 0
    for block in chain.canonical_chain():
        if block.producer is not None:
            per_node[block.producer] += 1
        proofs_on_final += proofs_in_block.get(block.id, 0)

    result = AttackResult(
        success=success,
        slots_elapsed=slots_elapsed,
        fork_length=(fork_tip.height - fork_root.height) if fork_root is not None else 0,
        reverted_blocks=reverted,
        per_node_blocks_canonical=per_node,
        consensus=config.consensus,
        slashing_proofs_censored=total_offenses - proofs_on_final,
        double_signs=double_signs,
    )
    return SimRun(result=result, chain=chain, trace=tuple(trace))


def run_attack(config: SimConfig) -> AttackResult:
    """Run one seeded attack simulation; deterministic in the config."""
    return run_attack_detailed(config, record_trace=False).result


@dataclass(frozen=True)
class SlashingAudit:
    offenses_by_node: dict[NodeId, int]
    offenses_total: int
    proofs_included: int
    proofs_censored: int
    censorship_intact: bool           # no proof landed although the attack succeeded
    slashable_nodes: tuple[NodeId, ...]  # offenders with evidence on the final chain

    def to_payload(self) -> dict:
        return {
            "offenses_by_node": {str(i): c for i, c in sorted(self.offenses_by_node.items())},
            "offenses_total": self.offenses_total,
            "proofs_included": self.proofs_included,
            "proofs_censored": self.proofs_censored,
            "censorship_intact": self.censorship_intact,
            "slashable_nodes": list(self.slashable_nodes),
        }


def pos_slashing_audit(result: AttackResult) -> SlashingAudit:
    """Audit the slashing evidence of a deposit-slashing run.

    In a successful attack every proof must have been censored off the
    final chain; in a failed attack the included proofs make the offending
    minions slashable.
    """
    if result.consensus is not Consensus.POS_SLASHING:
        raise ValueError("slashing audit requires a deposit-slashing run")
    total = sum(result.double_signs.values())
    included = total - result.slashing_proofs_censored
    offenders = tuple(sorted(i for i, c in result.double_signs.items() if c > 0))
    slashable = offenders if (not result.success and included > 0) else ()
    return SlashingAudit(
        offenses_by_node=dict(result.double_signs),
        offenses_total=total,
        proofs_included=included,
        proofs_censored=result.slashing_proofs_censored,
        censorship_intact=(not result.success) or included == 0,
        slashable_nodes=slashable,
    )


def derive_game_params(
    config: SimConfig,
    result: AttackResult | None,
    reward_honest: Sequence[Fraction],
    reward_deviant_vs_honest: Sequence[Fraction],
    reward_deviant_vs_malicious: Sequence[Fraction],
    bribe_pool: Fraction,
) -> GameParams:
    """Turn a simulated attack into game parameters.

    The malicious reward is the honest reward plus the node's power share
    of the bribe pool: r_m_i = r_h_i + v_i * D_m. The remaining rewards
    pass through unchanged, and the result must satisfy every model
    assumption (a non-positive bribe pool breaks r_m > r_h immediately).
    """
    bribe_pool = Fraction(bribe_pool)
    if bribe_pool > config.double_spend_value:
        warnings.warn(
            "bribe pool exceeds the double-spend value; the attack does not pay for itself",
            stacklevel=2,
        )
    if result is not None and not result.success:
        warnings.warn(
            "deriving rewards from an unsuccessful attack run", stacklevel=2
        )
    params = GameParams(
        powers=config.powers,
        threshold_t=config.threshold_t,
        reward_honest=tuple(Fraction(r) for r in reward_honest),
        reward_deviant_vs_honest=tuple(Fraction(r) for r in reward_deviant_vs_honest),
        reward_malicious=tuple(
            Fraction(r) + config.powers[i] * bribe_pool for i, r in enumerate(reward_honest)
        ),
        reward_deviant_vs_malicious=tuple(Fraction(r) for r in reward_deviant_vs_malicious),
    )
    violations = validate_params(params)
    if violations:
        raise ValueError(
            "derived params violate model assumptions: " + "; ".join(str(v) for v in violations)
        )
    return params


# --- JSON payloads -----------------------------------------------------------

def sim_config_to_payload(config: SimConfig) -> dict:
    return {
        "powers": format_rational_list(config.powers),
        "minions": sorted(config.minions),
        "consensus": config.consensus.value,
        "confirmations": config.confirmations,
        "horizon_slots": config.horizon_slots,
        "block_reward": format_rational(config.block_reward),
        "double_spend_value": format_rational(config.double_spend_value),
        "threshold_t": format_rational(config.threshold_t),
        "rng_seed": config.rng_seed,
    }


def sim_config_from_payload(
    doc: dict, context: str = "sim", rng_seed: int | None = None
) -> SimConfig:
    """Parse a sim config document, naming the missing/invalid field on error."""
    if not isinstance(doc, dict):
        raise ValueError(f"{context}: expected an object")
    for key in ("powers", "minions", "consensus", "confirmations", "horizon_slots"):
        if key not in doc:
            raise ValueError(f"{context}: missing field '{key}'")
    try:
        consensus = Consensus(doc["consensus"])
    except ValueError:
        raise ValueError(
            f"{context}.consensus: {doc['consensus']!r} is not one of "
            f"{[c.value for c in Consensus]}"
        ) from None
    return SimConfig(
        powers=PowerDistribution(parse_rational_list(doc["powers"], f"{context}.powers")),
        minions=frozenset(int(i) for i in doc["minions"]),
        consensus=consensus,
        confirmations=int(doc["confirmations"]),
        horizon_slots=int(doc["horizon_slots"]),
        block_reward=parse_rational(doc.get("block_reward", 1), f"{context}.block_reward"),
        double_spend_value=parse_rational(
            doc.get("double_spend_value", 0), f"{context}.double_spend_value"
        ),
        rng_seed=int(doc.get("rng_seed", 0)) if rng_seed is None else rng_seed,
        threshold_t=parse_rational(doc.get("threshold_t", "1/2"), f"{context}.threshold_t"),
    )


def trace_to_csv(rows: Iterable[TraceRow], fh) -> None:
    import csv

    writer = csv.writer(fh)
    writer.writerow(["slot", "producer", "chain", "height", "event"])
    for row in rows:
        writer.writerow([row.slot, row.producer, row.chain, row.height, row.event])
