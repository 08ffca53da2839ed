"""Eavesdropper strategies that tap the quantum channel leg by leg.

A strategy sees only what crosses the channel: the pulses on each leg and the
public announcement. It can hold pulses between hooks (perfect storage within
a round) and must return what it forwards. Returning fewer pulses than it
received, or ``None`` on the last leg, drops the photon and aborts the round.

One strategy instance serves exactly one round.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

from .polarization import (
    COMPUTATIONAL,
    DIAGONAL,
    QUARTER,
    MeasurementBasis,
    PolarizationState,
    angles_equivalent,
    flip,
    is_deterministic,
    measure,
    rotate,
)
from .protocols import Announcement, Pulse, p2_outcome_basis, sign
from .rng import RandomStream


class AttackDiagnostic(RuntimeError):
    """An attack met a pulse it should be able to read with certainty but cannot.

    Under the protocols as modelled this never happens; seeing it means the
    harness or a party step is wired wrong.
    """


class EveStrategy:
    """Pass-through taps. Subclasses override the hooks they need."""

    def __init__(self) -> None:
        self.key_guess: int | None = None

    def tap_leg1(self, pulses: Sequence[Pulse], rand: RandomStream) -> Sequence[Pulse]:
        return pulses

    def tap_leg2(self, pulses: Sequence[Pulse], rand: RandomStream) -> Sequence[Pulse]:
        return pulses

    def tap_leg3(self, pulse: Pulse, rand: RandomStream) -> Pulse | None:
        return pulse

    def on_announcement(self, announcement: Announcement) -> int | None:
        return self.key_guess


class PassiveStrategy(EveStrategy):
    pass


class ImpersonationP1(EveStrategy):
    """Impersonation attack on protocol 1.

    Eve keeps Alice's photon (set 1) and plays Alice towards Bob with her own
    photon in |p>. She hands set 1 back to Alice without Bob's rotation, so
    Alice's encoded photon comes out at exactly +-pi/4 and Eve reads k. Eve
    then finishes Bob's session herself on the photon Bob rotated.

    ``flip_op`` is injectable so the flip semantics can be swapped out in
    negative controls. ``p`` forces Eve's choice for exhaustive checks.
    """

    def __init__(
        self,
        flip_op: Callable[[PolarizationState], PolarizationState] = flip,
        p: int | None = None,
    ):
        super().__init__()
        self.flip_op = flip_op
        self.forced_p = p
        self.set1: Pulse | None = None
        self.p: int | None = None
        self.set2: Pulse | None = None
        self.k: int | None = None

    def tap_leg1(self, pulses, rand):
        (alice_pulse,) = pulses
        self.set1 = alice_pulse
        self.p = rand.bit() if self.forced_p is None else self.forced_p
        own = PolarizationState(self.p * math.pi / 2.0)
        return (Pulse(alice_pulse.id, alice_pulse.slot, own),)

    def tap_leg2(self, pulses, rand):
        (bob_pulse,) = pulses
        self.set2 = bob_pulse
        return (self.set1,)

    def tap_leg3(self, pulse, rand):
        if not angles_equivalent(pulse.state.angle, QUARTER) and not angles_equivalent(
            pulse.state.angle, -QUARTER
        ):
            raise AttackDiagnostic(
                f"Alice's encoded photon at {pulse.state.angle!r} is not at +-pi/4"
            )
        self.k, _ = measure(pulse.state, DIAGONAL, rand)
        self.key_guess = self.k
        state = self.set2.state
        if self.p == 1:
            state = self.flip_op(state)
        state = rotate(state, sign(self.k) * QUARTER)
        return Pulse(self.set2.id, self.set2.slot, state)


class ImpersonationP2(EveStrategy):
    """Impersonation attack on protocol 2.

    Eve plays Bob towards Alice with shuffling bit ``s' = 0`` and plays Alice
    towards Bob with her own random angles, which she strips off Bob's
    returned photons (set E2). Alice's forwarded photon then reveals
    ``k ^ b``; Eve rotates one E2 photon by a quarter-turn whose sign depends
    on ``k ^ b`` and sends it on. After the announcement ``k = b ^ (k ^ b)``.

    ``e2_index`` and ``e2_sign`` pick which E2 photon to send and the sign of
    the quarter-turn, ``sign * (-1)**(k^b) * pi/4``.
    """

    def __init__(self, e2_index: int, e2_sign: int, basis: MeasurementBasis | None = None):
        super().__init__()
        if e2_index not in (0, 1) or e2_sign not in (1, -1):
            raise ValueError("e2_index must be 0 or 1 and e2_sign +1 or -1")
        self.e2_index = e2_index
        self.e2_sign = e2_sign
        self.basis = basis if basis is not None else p2_outcome_basis()
        self.s_prime = 0
        self.own_thetas: tuple[float, float] | None = None
        self.e1: tuple[Pulse, Pulse] | None = None
        self.e2: tuple[Pulse, Pulse] | None = None
        self.l_prime: int | None = None

    def tap_leg1(self, pulses, rand):
        first, second = pulses
        self.e1 = (first, second)
        self.own_thetas = (rand.angle(), rand.angle())
        return tuple(
            Pulse(p.id, p.slot, PolarizationState(t)) for p, t in zip(pulses, self.own_thetas)
        )

    def tap_leg2(self, pulses, rand):
        first, second = pulses
        self.e2 = (first.rotated(-self.own_thetas[0]), second.rotated(-self.own_thetas[1]))
        return (
            self.e1[0].rotated(sign(self.s_prime) * QUARTER),
            self.e1[1].rotated(sign(self.s_prime ^ 1) * QUARTER),
        )

    def tap_leg3(self, pulse, rand):
        if not is_deterministic(pulse.state, self.basis):
            raise AttackDiagnostic(
                f"Alice's forwarded photon at {pulse.state.angle!r} is not a basis state"
            )
        self.l_prime, _ = measure(pulse.state, self.basis, rand)
        chosen = self.e2[self.e2_index]
        turn = self.e2_sign * sign(self.l_prime) * QUARTER
        return Pulse(pulse.id, pulse.slot, rotate(chosen.state, turn))

    def on_announcement(self, announcement):
        if self.l_prime is None:
            raise AttackDiagnostic("announcement arrived before Eve measured the final photon")
        self.key_guess = announcement.b ^ self.l_prime
        return self.key_guess


class InterceptResend(EveStrategy):
    """Measure the final photon and resend the collapsed state.

    The baseline attack that the honest protocol does detect. By default Eve
    measures in the computational basis; ``random_basis`` picks the
    computational or diagonal basis per round instead.
    """

    def __init__(self, random_basis: bool = False):
        super().__init__()
        self.random_basis = random_basis

    def tap_leg3(self, pulse, rand):
        basis = COMPUTATIONAL
        if self.random_basis and rand.bit():
            basis = DIAGONAL
        outcome, post = measure(pulse.state, basis, rand)
        self.key_guess = outcome
        return Pulse(pulse.id, pulse.slot, post)
