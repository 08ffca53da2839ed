"""Round execution, exhaustive enumeration and report aggregation."""

from __future__ import annotations

import itertools
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable, Sequence

from . import analysis
from .adversary import EveStrategy, ImpersonationP1, ImpersonationP2, InterceptResend, PassiveStrategy
from .protocols import (
    Announcement,
    P1Alice,
    P1Bob,
    P2Alice,
    P2Bob,
    Pulse,
    RoundAborted,
    RoundRecord,
    angle_grid,
    describe_outcome_basis,
    p1_alice_encode,
    p1_alice_prepare,
    p1_bob_decode,
    p1_bob_rotate,
    p2_alice_encode_block,
    p2_alice_prepare,
    p2_bob_decode,
    p2_bob_measure,
    p2_bob_shuffle,
    p2_outcome_basis,
)
from .rng import BLOCK_ROUNDS, RandomStream, RngDiscipline

STRATEGIES = ("none", "impersonation", "intercept-resend")
ACTIVE = {"impersonation", "intercept-resend"}

StrategyFactory = Callable[[], "EveStrategy | None"]


def parse_angles(spec: str) -> int | None:
    """``"continuous"`` -> None, ``"grid:K"`` -> K."""
    if spec == "continuous":
        return None
    kind, _, k = spec.partition(":")
    if kind != "grid" or not k.isdigit():
        raise ValueError(f"angles must be 'continuous' or 'grid:K', got {spec!r}")
    if int(k) < 2:
        raise ValueError("grid K must be >= 2")
    return int(k)


@dataclass(frozen=True)
class SimConfig:
    protocol: int = 1
    attack: str = "none"
    rounds: int = 1000
    seed: int = 0
    angles: str = "continuous"
    threshold: float = analysis.DEFAULT_THRESHOLD
    out: Path | None = None
    rounds_csv: Path | None = None

    def __post_init__(self):
        if self.protocol not in (1, 2):
            raise ValueError(f"protocol must be 1 or 2, got {self.protocol}")
        if self.attack not in STRATEGIES and self.attack != "passive":
            raise ValueError(f"unknown attack {self.attack!r}")
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must lie in (0, 1)")
        parse_angles(self.angles)

    @property
    def grid(self) -> int | None:
        return parse_angles(self.angles)

    def echo(self) -> dict:
        # output paths and worker counts do not affect results and are left out
        return {
            "protocol": self.protocol,
            "attack": self.attack,
            "rounds": self.rounds,
            "seed": self.seed,
            "angles": self.angles,
            "threshold": self.threshold,
        }


# -- round execution -------------------------------------------------------


def _expect(pulses: Sequence[Pulse | None] | None, n: int) -> Sequence[Pulse]:
    if pulses is None or len(pulses) != n or any(p is None for p in pulses):
        raise RoundAborted(f"expected {n} pulse(s) on the channel")
    return pulses


def execute_p1(
    alice: P1Alice,
    bob: P1Bob,
    strategy: EveStrategy | None,
    eve_rng: RandomStream,
    meas_rng: RandomStream,
    round_id: int = 0,
) -> RoundRecord:
    rec = RoundRecord(round_id, 1, alice.k, thetas=(alice.theta,), phi=bob.phi)
    try:
        pulses = (p1_alice_prepare(alice, round_id),)
        if strategy is not None:
            pulses = strategy.tap_leg1(pulses, eve_rng)
        (at_bob,) = _expect(pulses, 1)

        pulses = (p1_bob_rotate(bob, at_bob),)
        if strategy is not None:
            pulses = strategy.tap_leg2(pulses, eve_rng)
        (at_alice,) = _expect(pulses, 1)

        final = p1_alice_encode(alice, at_alice)
        if strategy is not None:
            final = strategy.tap_leg3(final, eve_rng)
        (final,) = _expect((final,), 1)

        before = meas_rng.draws
        rec.k_bob = p1_bob_decode(bob, final, meas_rng)
        rec.measurement_draws = meas_rng.draws - before
    except RoundAborted:
        rec.aborted = True
        return rec
    if strategy is not None:
        rec.eve_guess = strategy.key_guess
    return rec


def execute_p2(
    alice: P2Alice,
    bob: P2Bob,
    strategy: EveStrategy | None,
    eve_rng: RandomStream,
    meas_rng: RandomStream,
    round_id: int = 0,
) -> RoundRecord:
    rec = RoundRecord(
        round_id, 2, alice.k, thetas=(alice.theta1, alice.theta2), phi=bob.phi, s=bob.s, b=alice.b
    )
    try:
        pulses = p2_alice_prepare(alice, round_id)
        if strategy is not None:
            pulses = strategy.tap_leg1(pulses, eve_rng)
        first, second = _expect(pulses, 2)

        pulses = p2_bob_shuffle(bob, first, second)
        if strategy is not None:
            pulses = strategy.tap_leg2(pulses, eve_rng)
        first, second = _expect(pulses, 2)

        final = p2_alice_encode_block(alice, first, second)
        if strategy is not None:
            final = strategy.tap_leg3(final, eve_rng)
        (final,) = _expect((final,), 1)

        before = meas_rng.draws
        rec.l = p2_bob_measure(bob, final, meas_rng)
        rec.measurement_draws = meas_rng.draws - before
    except RoundAborted:
        rec.aborted = True
        return rec

    announcement = Announcement(round_id, alice.b)
    rec.k_bob = p2_bob_decode(bob.s, announcement.b, rec.l)
    if strategy is not None:
        strategy.on_announcement(announcement)
        rec.eve_guess = strategy.key_guess
    return rec


def make_strategy(name: str, protocol: int) -> EveStrategy | None:
    if name == "none":
        return None
    if name == "passive":
        return PassiveStrategy()
    if name == "impersonation":
        return ImpersonationP1() if protocol == 1 else ImpersonationP2(*derive_e2_selection())
    if name == "intercept-resend":
        return InterceptResend()
    raise ValueError(f"unknown strategy {name!r}")


def _draw_round(
    config: SimConfig,
    disc: RngDiscipline,
    index: int,
    factory: StrategyFactory | None,
) -> RoundRecord:
    alice_rng = disc.stream(index, "alice")
    bob_rng = disc.stream(index, "bob")
    eve_rng = disc.stream(index, "eve")
    meas_rng = disc.stream(index, "measurement")
    strategy = factory() if factory is not None else make_strategy(config.attack, config.protocol)
    if config.protocol == 1:
        alice = P1Alice(alice_rng.angle(), alice_rng.bit())
        bob = P1Bob(bob_rng.angle())
        rec = execute_p1(alice, bob, strategy, eve_rng, meas_rng, index)
    else:
        alice = P2Alice(alice_rng.angle(), alice_rng.angle(), alice_rng.bit(), alice_rng.bit())
        bob = P2Bob(bob_rng.angle(), bob_rng.bit())
        rec = execute_p2(alice, bob, strategy, eve_rng, meas_rng, index)
    rec.eve_active = strategy is not None and not isinstance(strategy, PassiveStrategy)
    return rec


def run_round(
    config: SimConfig, index: int, strategy_factory: StrategyFactory | None = None
) -> RoundRecord:
    """Run round ``index`` of ``config`` with its own per-role random streams."""
    return _draw_round(config, RngDiscipline(config.seed, config.grid), index, strategy_factory)


def run_rounds(
    config: SimConfig,
    workers: int = 1,
    strategy_factory: StrategyFactory | None = None,
) -> list[RoundRecord]:
    disc = RngDiscipline(config.seed, config.grid)
    if config.attack == "impersonation" and config.protocol == 2:
        derive_e2_selection()  # warm the cache before threads start

    def chunk(start: int) -> list[RoundRecord]:
        stop = min(start + BLOCK_ROUNDS, config.rounds)
        return [_draw_round(config, disc, i, strategy_factory) for i in range(start, stop)]

    starts = range(0, config.rounds, BLOCK_ROUNDS)
    if workers <= 1:
        parts = [chunk(s) for s in starts]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(chunk, starts))
    return [r for part in parts for r in part]


# -- conventions -----------------------------------------------------------

E2_CANDIDATES = ((0, 1), (0, -1), (1, 1), (1, -1))


@lru_cache(maxsize=1)
def derive_e2_selection() -> tuple[int, int]:
    """Pick the E2 photon and quarter-turn sign for the protocol-2 attack.

    Candidates are tried in order (first photon before second, + before -);
    the first one that gives Bob ``l = s ^ k ^ b`` with certainty and Eve the
    right key in every round of a pi/4 grid enumeration wins.
    """
    for index, sgn in E2_CANDIDATES:
        result = enumerate_exhaustive(2, lambda: ImpersonationP2(index, sgn), grid=4, stop_on_failure=True)
        if result.all_passed:
            return index, sgn
    raise RuntimeError("no E2 selection reproduces Bob's honest outcome")


def conventions() -> dict:
    index, sgn = derive_e2_selection()
    return {
        "blocking_factor": "b=0 forwards the first pulse, b=1 the second",
        "p2_outcome_orientation": describe_outcome_basis(p2_outcome_basis()),
        "e2_selection": (
            f"{'first' if index == 0 else 'second'} pulse of E2, "
            f"rotated by {'+' if sgn > 0 else '-'}(-1)^(k^b) pi/4"
        ),
        "p1_key_encoding": "+pi/4 -> k=0, -pi/4 -> k=1",
        "flip": "rotation by +pi/2",
    }


# -- exhaustive enumeration ------------------------------------------------


@dataclass
class EnumerationRow:
    params: dict
    passed: bool
    failures: list[str]
    record: RoundRecord | None = field(default=None, repr=False)


@dataclass
class EnumerationResult:
    protocol: int
    strategy: str
    grid: int
    rows: list[EnumerationRow] = field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.rows)

    @property
    def failed(self) -> list[EnumerationRow]:
        return [r for r in self.rows if not r.passed]

    @property
    def records(self) -> list[RoundRecord]:
        return [r.record for r in self.rows]

    @property
    def all_passed(self) -> bool:
        return bool(self.rows) and not self.failed


def _check(rec: RoundRecord, attacked: bool) -> list[str]:
    failures = []
    if rec.aborted:
        return ["round aborted"]
    if rec.k_bob != rec.k_alice:
        failures.append("k_bob != k_alice")
    if rec.protocol == 2 and rec.l != rec.s ^ rec.k_alice ^ rec.b:
        failures.append("l != s^k^b")
    if rec.measurement_draws:
        failures.append("Bob's measurement was not deterministic")
    if attacked and rec.eve_guess != rec.k_alice:
        failures.append("eve_guess != k_alice")
    return failures


def enumerate_exhaustive(
    protocol: int,
    strategy: str | StrategyFactory = "none",
    grid: int = 8,
    seed: int = 0,
    stop_on_failure: bool = False,
) -> EnumerationResult:
    """Run every combination of key bits and grid angles and check the identities.

    Honest rounds must give ``k_bob == k`` (and ``l == s^k^b`` for protocol 2)
    with a deterministic final measurement; attacked rounds must in addition
    give ``eve_guess == k``. Eve's own random choices come from seeded streams
    in grid mode, except the protocol-1 impersonation bit ``p`` which is
    enumerated.
    """
    angles = angle_grid(grid)
    disc = RngDiscipline(seed, grid)
    name = strategy if isinstance(strategy, str) else getattr(strategy, "__name__", "custom")
    result = EnumerationResult(protocol, name, grid)

    if isinstance(strategy, str):
        attacked = strategy in ACTIVE
        p1_forced_p = strategy == "impersonation" and protocol == 1
        factory = lambda: make_strategy(strategy, protocol)  # noqa: E731
    else:
        attacked = True
        p1_forced_p = False
        factory = strategy

    if protocol == 1:
        p_axis = (0, 1) if p1_forced_p else (None,)
        space = itertools.product(p_axis, (0, 1), angles, angles)
        for i, (p, k, theta, phi) in enumerate(space):
            strat = ImpersonationP1(p=p) if p is not None else factory()
            rec = execute_p1(
                P1Alice(theta, k), P1Bob(phi), strat,
                disc.stream(i, "eve"), disc.stream(i, "measurement"), i,
            )
            params = {"k": k, "theta": theta, "phi": phi}
            if p is not None:
                params["p"] = p
            failures = _check(rec, attacked)
            result.rows.append(EnumerationRow(params, not failures, failures, rec))
            if failures and stop_on_failure:
                break
    elif protocol == 2:
        space = itertools.product((0, 1), (0, 1), (0, 1), angles, angles, angles)
        for i, (s, k, b, t1, t2, phi) in enumerate(space):
            rec = execute_p2(
                P2Alice(t1, t2, k, b), P2Bob(phi, s), factory(),
                disc.stream(i, "eve"), disc.stream(i, "measurement"), i,
            )
            failures = _check(rec, attacked)
            params = {"s": s, "k": k, "b": b, "theta1": t1, "theta2": t2, "phi": phi}
            result.rows.append(EnumerationRow(params, not failures, failures, rec))
            if failures and stop_on_failure:
                break
    else:
        raise ValueError(f"protocol must be 1 or 2, got {protocol}")
    return result


# -- aggregation -----------------------------------------------------------


@dataclass
class SimReport:
    config: dict
    rounds: int
    aborted: int
    qber: float | None
    eve_accuracy: float | None
    mi_ab: float | None
    mi_ae: float | None
    detected: bool
    conventions: dict
    records: list[RoundRecord] = field(default_factory=list, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "rounds": self.rounds,
            "aborted": self.aborted,
            "qber": self.qber,
            "eve_accuracy": self.eve_accuracy,
            "mi_ab": self.mi_ab,
            "mi_ae": self.mi_ae,
            "detected": self.detected,
            "conventions": self.conventions,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def summarize(config: SimConfig, records: list[RoundRecord]) -> SimReport:
    aborted = sum(r.aborted for r in records)
    done = analysis.completed(records)
    qber = analysis.qber(done) if done else None
    mi_ab = analysis.mutual_information(analysis.key_confusion(done)) if done else None
    try:
        eve_acc = analysis.eve_accuracy(done)
        mi_ae = analysis.mutual_information(analysis.eve_confusion(done))
    except analysis.AnalysisError:
        eve_acc = mi_ae = None
    detected = qber is not None and analysis.detection_verdict(qber, config.threshold).detected
    return SimReport(
        config=config.echo(),
        rounds=len(records),
        aborted=aborted,
        qber=qber,
        eve_accuracy=eve_acc,
        mi_ab=mi_ab,
        mi_ae=mi_ae,
        detected=detected,
        conventions=conventions(),
        records=records,
    )


def run(config: SimConfig, workers: int = 1) -> SimReport:
    """Run all rounds and aggregate; the result does not depend on ``workers``."""
    return summarize(config, run_rounds(config, workers))
