import itertools
import math

import numpy as np
import pytest
from scipy import integrate

from blindqkd.adversary import (
    AttackDiagnostic,
    EveStrategy,
    ImpersonationP1,
    ImpersonationP2,
    InterceptResend,
    PassiveStrategy,
)
from blindqkd.analysis import qber
from blindqkd.harness import SimConfig, derive_e2_selection, execute_p1, execute_p2, run_rounds
from blindqkd.polarization import ONE, ZERO, PolarizationState, swap_coefficients
from blindqkd.protocols import (
    Announcement,
    P1Alice,
    P1Bob,
    P2Alice,
    P2Bob,
    Pulse,
    Slot,
    angle_grid,
    p1_alice_encode,
    p1_alice_prepare,
    p1_bob_decode,
    p1_bob_rotate,
    p2_alice_prepare,
    p2_bob_shuffle,
)
from blindqkd.rng import RandomStream

PI = math.pi


def stream(*values):
    return RandomStream(values)


def pulse(angle, slot=Slot.SINGLE, id=0):
    return Pulse(id, slot, PolarizationState(angle))


class NoDraws:
    def uniform(self):
        raise AssertionError("measurement should have been certain")


class TestImpersonationP1:
    @pytest.mark.parametrize("u, p, angle", [(0.1, 0, 0.0), (0.9, 1, PI / 2)])
    def test_leg1_sends_own_photon(self, u, p, angle):
        eve = ImpersonationP1()
        (out,) = eve.tap_leg1((pulse(0.77, id=4),), stream(u))
        assert eve.p == p
        assert out.state.angle == pytest.approx(angle)
        assert out.id == 4
        assert eve.set1.state.angle == pytest.approx(0.77)

    def test_leg1_p_is_fair(self):
        rand = RandomStream.from_seed(2)
        zeros = 0
        for _ in range(10_000):
            eve = ImpersonationP1()
            eve.tap_leg1((pulse(0.0),), rand)
            zeros += eve.p == 0
        assert abs(zeros / 10_000 - 0.5) < 0.02

    def test_leg2_returns_set1_unmodified(self):
        eve = ImpersonationP1()
        eve.tap_leg1((pulse(PI / 6),), stream(0.1))
        (back,) = eve.tap_leg2((pulse(1.0),), stream())
        assert back.state.angle == pytest.approx(PI / 6)

    @pytest.mark.parametrize("p, offset", [(0, 0.0), (1, PI / 2)])
    def test_stored_bob_pulse(self, p, offset):
        phi = 2.4
        eve = ImpersonationP1(p=p)
        (to_bob,) = eve.tap_leg1((pulse(0.3),), stream())
        eve.tap_leg2((p1_bob_rotate(P1Bob(phi), to_bob),), stream())
        assert eve.set2.state.angle == pytest.approx(phi + offset)

    def _round(self, theta, phi, k, p, flip_op=None):
        alice, bob = P1Alice(theta, k), P1Bob(phi)
        eve = ImpersonationP1(p=p) if flip_op is None else ImpersonationP1(flip_op, p=p)
        rec = execute_p1(alice, bob, eve, stream(), RandomStream.from_seed(0))
        return eve, rec

    def test_leg3_k0_p0(self):
        phi = 1.3
        eve = ImpersonationP1(p=0)
        alice, bob = P1Alice(0.5, 0), P1Bob(phi)
        (to_bob,) = eve.tap_leg1((p1_alice_prepare(alice),), stream())
        (to_alice,) = eve.tap_leg2((p1_bob_rotate(bob, to_bob),), stream())
        delivered = eve.tap_leg3(p1_alice_encode(alice, to_alice), NoDraws())
        assert delivered.state.angle == pytest.approx(phi + PI / 4)
        assert eve.key_guess == 0
        assert p1_bob_decode(bob, delivered, NoDraws()) == 0

    def test_leg3_k1_p1(self):
        phi = 0.4
        eve = ImpersonationP1(p=1)
        alice, bob = P1Alice(2.0, 1), P1Bob(phi)
        (to_bob,) = eve.tap_leg1((p1_alice_prepare(alice),), stream())
        (to_alice,) = eve.tap_leg2((p1_bob_rotate(bob, to_bob),), stream())
        delivered = eve.tap_leg3(p1_alice_encode(alice, to_alice), NoDraws())
        assert delivered.state.angle == pytest.approx(phi + PI - PI / 4)
        assert delivered.state.equivalent(PolarizationState(phi - PI / 4))
        assert p1_bob_decode(bob, delivered, NoDraws()) == 1

    def test_exhaustive_p_k_phi_grid(self):
        cases = list(itertools.product((0, 1), (0, 1), angle_grid(8)))
        assert len(cases) == 64
        for p, k, phi in cases:
            eve, rec = self._round(1.1, phi, k, p)
            assert rec.k_bob == k
            assert rec.eve_guess == k
            assert rec.measurement_draws == 0

    def test_leg3_rejects_unexpected_photon(self):
        eve = ImpersonationP1(p=0)
        eve.tap_leg1((pulse(0.0),), stream())
        eve.tap_leg2((pulse(0.3),), stream())
        with pytest.raises(AttackDiagnostic):
            eve.tap_leg3(pulse(0.3), stream(0.5))

    def test_reflection_flip_breaks_the_attack(self):
        phi = 0.3  # generic: not a multiple of pi/4
        bad = [self._round(0.5, phi, k, 1, swap_coefficients)[1] for k in (0, 1)]
        # with a reflection Bob's final state depends on phi
        assert all(r.measurement_draws == 1 for r in bad)


class TestImpersonationP2:
    def _legs(self, alice, bob, eve, eve_rand):
        to_bob = eve.tap_leg1(p2_alice_prepare(alice), eve_rand)
        to_alice = eve.tap_leg2(p2_bob_shuffle(bob, *to_bob), eve_rand)
        return to_bob, to_alice

    def test_leg1_delivers_own_angles(self):
        eve = ImpersonationP2(0, 1)
        alice = P2Alice(0.2, 0.9, 0, 0)
        sent = p2_alice_prepare(alice, round_id=8)
        grid_rand = RandomStream([0.3 / (2 * PI), 1.1 / (2 * PI)])
        out = eve.tap_leg1(sent, grid_rand)
        assert [p.state.angle for p in out] == pytest.approx([0.3, 1.1])
        assert [(p.id, p.slot) for p in out] == [(8, Slot.FIRST), (8, Slot.SECOND)]
        assert [p.state.angle for p in eve.e1] == pytest.approx([0.2, 0.9])

    @pytest.mark.parametrize("s", [0, 1])
    def test_leg2_strips_own_angles_and_shuffles_e1(self, s):
        phi = 1.9
        eve = ImpersonationP2(0, 1)
        alice, bob = P2Alice(0.2, 0.9, 0, 0), P2Bob(phi, s)
        _, to_alice = self._legs(alice, bob, eve, RandomStream.from_seed(4))
        sgn = -1 if s else 1
        assert eve.e2[0].state.equivalent(PolarizationState(phi + sgn * PI / 4))
        assert eve.e2[1].state.equivalent(PolarizationState(phi - sgn * PI / 4))
        assert to_alice[0].state.equivalent(PolarizationState(0.2 + PI / 4))
        assert to_alice[1].state.equivalent(PolarizationState(0.9 - PI / 4))

    def test_all_bit_combinations(self):
        rng = np.random.default_rng(21)
        e2 = derive_e2_selection()
        for s, k, b in itertools.product((0, 1), repeat=3):
            for t1, t2, phi in rng.uniform(0, 2 * PI, (20, 3)):
                eve = ImpersonationP2(*e2)
                rec = execute_p2(
                    P2Alice(t1, t2, k, b), P2Bob(phi, s), eve,
                    RandomStream.from_seed(int(t1 * 1e6)), RandomStream.from_seed(0),
                )
                assert eve.l_prime == k ^ b
                assert rec.l == s ^ k ^ b
                assert rec.k_bob == k
                assert rec.eve_guess == k
                assert rec.measurement_draws == 0

    def test_derived_selection_is_first_pulse_positive_turn(self):
        assert derive_e2_selection() == (0, 1)

    @pytest.mark.parametrize("e2", [(0, -1), (1, 1)])
    def test_wrong_selection_fails(self, e2):
        rec = execute_p2(
            P2Alice(0.1, 0.2, 0, 0), P2Bob(0.3, 0), ImpersonationP2(*e2),
            RandomStream.from_seed(1), RandomStream.from_seed(2),
        )
        # honest value would be l = s^k^b = 0
        assert rec.l == 1
        assert rec.k_bob != rec.k_alice

    @pytest.mark.parametrize("l_prime, b, guess", [(1, 0, 1), (1, 1, 0), (0, 1, 1), (0, 0, 0)])
    def test_announcement(self, l_prime, b, guess):
        eve = ImpersonationP2(0, 1)
        eve.l_prime = l_prime
        assert eve.on_announcement(Announcement(0, b)) == guess
        assert eve.key_guess == guess

    def test_announcement_before_leg3(self):
        with pytest.raises(AttackDiagnostic):
            ImpersonationP2(0, 1).on_announcement(Announcement(0, 0))

    def test_leg3_rejects_uncertain_photon(self):
        eve = ImpersonationP2(0, 1)
        eve.tap_leg1(p2_alice_prepare(P2Alice(0.0, 0.0, 0, 0)), RandomStream.from_seed(0))
        eve.tap_leg2((pulse(0.1), pulse(0.2)), stream())
        with pytest.raises(AttackDiagnostic):
            eve.tap_leg3(pulse(PI / 4, Slot.FIRST), stream(0.5))

    def test_rejects_bad_selection(self):
        with pytest.raises(ValueError):
            ImpersonationP2(2, 1)


class TestInterceptResend:
    def test_delivers_computational_state(self):
        rand = RandomStream.from_seed(3)
        for a in np.random.default_rng(3).uniform(0, 2 * PI, 200):
            out = InterceptResend().tap_leg3(pulse(a), rand)
            assert out.state.equivalent(ZERO) or out.state.equivalent(ONE)

    def test_analytic_qber_is_a_quarter(self):
        # oracle: average of the per-phi error cos^2(2 phi)/2 over a uniform phi
        value, _ = integrate.quad(lambda phi: math.cos(2 * phi) ** 2 / 2, 0, 2 * PI)
        assert value / (2 * PI) == pytest.approx(0.25, abs=1e-12)

    def test_qber_monte_carlo(self):
        records = run_rounds(SimConfig(protocol=1, attack="intercept-resend", rounds=100_000, seed=5))
        assert abs(qber(records) - 0.25) < 0.005

    def test_bob_measurement_becomes_random(self):
        records = run_rounds(SimConfig(protocol=1, attack="intercept-resend", rounds=2000, seed=6))
        assert sum(r.measurement_draws for r in records) / len(records) > 0.99

    def test_random_basis_variant(self):
        eve = InterceptResend(random_basis=True)
        out = eve.tap_leg3(pulse(PI / 4), stream(0.9))
        assert out.state.equivalent(PolarizationState(PI / 4))


class TestIsolation:
    def test_passive_matches_absent(self):
        for i in range(50):
            a = execute_p1(
                P1Alice(0.1 * i, i % 2), P1Bob(0.2 * i), None,
                RandomStream.from_seed(i), RandomStream.from_seed(100 + i), i,
            )
            b = execute_p1(
                P1Alice(0.1 * i, i % 2), P1Bob(0.2 * i), PassiveStrategy(),
                RandomStream.from_seed(i), RandomStream.from_seed(100 + i), i,
            )
            assert a == b

    def test_base_strategy_is_pass_through(self):
        eve = EveStrategy()
        ps = (pulse(0.1),)
        assert eve.tap_leg1(ps, stream()) is ps
        assert eve.tap_leg2(ps, stream()) is ps
        assert eve.tap_leg3(ps[0], stream()) is ps[0]
        assert eve.on_announcement(Announcement(0, 1)) is None
