"""Honest Alice and Bob for the two blind-polarization-basis protocols.

Each function is one step of one party. The harness calls them leg by leg so
that an eavesdropper can sit on every leg of the quantum channel.

Protocol 1 (single photon, three legs)::

    Alice: |0> rotated by theta        --leg1-->  Bob rotates by phi
    Alice: undo theta, add +-pi/4       <--leg2--
                                        --leg3-->  Bob undoes phi, measures

Protocol 2 (two photons, Bob shuffles with s, Alice blocks one with b, then
announces b publicly).
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

from .polarization import (
    COMPUTATIONAL,
    DIAGONAL,
    QUARTER,
    ZERO,
    MeasurementBasis,
    PolarizationState,
    UniformSource,
    canonicalize,
    measure,
    rotate,
    xor,
)


class RoundAborted(Exception):
    """A pulse that the protocol needs never arrived."""


class Slot(str, enum.Enum):
    SINGLE = "single"
    FIRST = "first"
    SECOND = "second"


class Pulse(NamedTuple):
    id: int
    slot: Slot
    state: PolarizationState

    def rotated(self, delta: float) -> Pulse:
        return Pulse(self.id, self.slot, rotate(self.state, delta))


@dataclass(frozen=True, slots=True)
class Announcement:
    round_id: int
    b: int


def sign(bit: int) -> int:
    """``(-1)**bit``."""
    return -1 if bit else 1


@dataclass(frozen=True, slots=True)
class P1Alice:
    theta: float
    k: int


@dataclass(frozen=True, slots=True)
class P1Bob:
    phi: float


@dataclass(frozen=True, slots=True)
class P2Alice:
    theta1: float
    theta2: float
    k: int
    b: int


@dataclass(frozen=True, slots=True)
class P2Bob:
    phi: float
    s: int


@dataclass(slots=True)
class RoundRecord:
    round: int
    protocol: int
    k_alice: int
    k_bob: int | None = None
    thetas: tuple[float, ...] = ()
    phi: float | None = None
    s: int | None = None
    b: int | None = None
    l: int | None = None
    eve_guess: int | None = None
    eve_active: bool = False
    aborted: bool = False
    # uniforms Bob's final measurement consumed; 0 means the outcome was certain
    measurement_draws: int = 0


# -- Protocol 1 ------------------------------------------------------------


def p1_alice_prepare(alice: P1Alice, round_id: int = 0) -> Pulse:
    return Pulse(round_id, Slot.SINGLE, rotate(ZERO, alice.theta))


def p1_bob_rotate(bob: P1Bob, p: Pulse) -> Pulse:
    return p.rotated(bob.phi)


def p1_alice_encode(alice: P1Alice, p: Pulse) -> Pulse:
    """Undo theta, then rotate by +pi/4 for k=0 or -pi/4 for k=1."""
    return p.rotated(-alice.theta).rotated(sign(alice.k) * QUARTER)


def p1_bob_decode(bob: P1Bob, p: Pulse, rand: UniformSource) -> int:
    """Undo phi and measure in the +-pi/4 basis (+pi/4 reads as 0)."""
    outcome, _ = measure(rotate(p.state, -bob.phi), DIAGONAL, rand)
    return outcome


# -- Protocol 2 ------------------------------------------------------------


def p2_alice_prepare(alice: P2Alice, round_id: int = 0) -> tuple[Pulse, Pulse]:
    return (
        Pulse(round_id, Slot.FIRST, rotate(ZERO, alice.theta1)),
        Pulse(round_id, Slot.SECOND, rotate(ZERO, alice.theta2)),
    )


def p2_bob_shuffle(bob: P2Bob, p1: Pulse, p2: Pulse) -> tuple[Pulse, Pulse]:
    return (
        p1.rotated(bob.phi + sign(bob.s) * QUARTER),
        p2.rotated(bob.phi + sign(bob.s ^ 1) * QUARTER),
    )


def p2_alice_encode_block(alice: P2Alice, p1: Pulse | None, p2: Pulse | None) -> Pulse:
    """Encode k on both returned pulses and forward one of them.

    ``b = 0`` lets the first pulse through, ``b = 1`` the second.
    """
    if p1 is None or p2 is None:
        raise RoundAborted("Alice did not receive both pulses back")
    key_turn = sign(alice.k) * QUARTER
    first = p1.rotated(-alice.theta1 + key_turn)
    second = p2.rotated(-alice.theta2 + key_turn)
    return second if alice.b else first


def p2_bob_measure(
    bob: P2Bob, p: Pulse, rand: UniformSource, basis: MeasurementBasis | None = None
) -> int:
    """Undo phi and read the prekey bit ``l`` in the computational basis."""
    if basis is None:
        basis = p2_outcome_basis()
    outcome, _ = measure(rotate(p.state, -bob.phi), basis, rand)
    return outcome


def p2_bob_decode(s: int, b: int, l: int) -> int:
    return xor(s, b, l)


def angle_grid(k: int) -> list[float]:
    """The ``2k`` multiples of ``pi/k`` in ``[0, 2pi)``."""
    if k < 2:
        raise ValueError("grid K must be >= 2")
    return [canonicalize(math.pi * j / k) for j in range(2 * k)]


class _NoDraws:
    def uniform(self) -> float:
        raise AssertionError("outcome was expected to be certain")


@lru_cache(maxsize=1)
def p2_outcome_basis() -> MeasurementBasis:
    """Label orientation of Bob's computational-basis readout.

    Both labelings of {|0>, |1>} are tried against every honest round on a
    pi/4 grid; the one for which ``l == s ^ k ^ b`` always holds is returned.
    """
    candidates = [COMPUTATIONAL, MeasurementBasis(math.pi / 2.0)]
    grid = angle_grid(4)
    consistent = []
    for basis in candidates:
        ok = True
        for s, k, b, t1, t2, phi in itertools.product((0, 1), (0, 1), (0, 1), grid, grid, grid):
            alice, bob = P2Alice(t1, t2, k, b), P2Bob(phi, s)
            back = p2_bob_shuffle(bob, *p2_alice_prepare(alice))
            try:
                l = p2_bob_measure(bob, p2_alice_encode_block(alice, *back), _NoDraws(), basis)
            except AssertionError:
                ok = False
                break
            if l != s ^ k ^ b:
                ok = False
                break
        if ok:
            consistent.append(basis)
    if len(consistent) != 1:
        raise RuntimeError(f"expected exactly one consistent orientation, found {len(consistent)}")
    return consistent[0]


def describe_outcome_basis(basis: MeasurementBasis) -> str:
    zero = "|0>" if basis.beta == 0.0 else "|1>"
    one = "|1>" if basis.beta == 0.0 else "|0>"
    return f"computational basis, l=0 on {zero}, l=1 on {one}"
