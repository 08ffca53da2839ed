"""Linear polarization qubits as real angles.

A state with angle ``a`` is the unit vector ``cos(a)|0> - sin(a)|1>``. Every
operation the blind-basis protocols need (rotations, flips, measurements in
a linear basis) keeps the state on this real circle, so a single canonical
angle is an exact representation. Angles ``a`` and ``a + pi`` differ only by a
global phase of -1 and are physically the same state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol

TAU = 2.0 * math.pi
QUARTER = math.pi / 4.0

# Born probabilities this close to 0 or 1 are treated as certain outcomes.
DETERMINISTIC_TOL = 1e-9
# Angle tolerance (mod pi) for measurement-equivalence.
EQUIVALENCE_TOL = 1e-9


class UniformSource(Protocol):
    def uniform(self) -> float: ...


def canonicalize(x: float) -> float:
    """Reduce ``x`` radians into ``[0, 2*pi)``."""
    if not math.isfinite(x):
        raise ValueError(f"angle must be finite, got {x!r}")
    r = x % TAU
    # x % TAU can round up to TAU for tiny negative x
    if r >= TAU:
        r = 0.0
    return r


def xor(*bits: int) -> int:
    out = 0
    for b in bits:
        out ^= b
    return out


class PolarizationState:
    """Single-photon linear polarization ``cos(a)|0> - sin(a)|1>``.

    Immutable; ``angle`` is stored canonicalized to ``[0, 2pi)``. Equality is
    exact on the stored angle; use ``equivalent`` for physical equality.
    """

    __slots__ = ("angle",)

    def __init__(self, angle: float):
        object.__setattr__(self, "angle", canonicalize(angle))

    def __setattr__(self, name, value):
        raise AttributeError("PolarizationState is immutable")

    def __eq__(self, other):
        if not isinstance(other, PolarizationState):
            return NotImplemented
        return self.angle == other.angle

    def __hash__(self):
        return hash(self.angle)

    def __repr__(self):
        return f"PolarizationState(angle={self.angle!r})"

    def equivalent(self, other: PolarizationState, tol: float = EQUIVALENCE_TOL) -> bool:
        """True when both states give identical Born statistics (equal mod pi)."""
        return angles_equivalent(self.angle, other.angle, tol)

    def amplitudes(self) -> tuple[float, float]:
        return math.cos(self.angle), -math.sin(self.angle)


ZERO = PolarizationState(0.0)
# -|1>, the same physical state as |1>
ONE = PolarizationState(math.pi / 2.0)


def angles_equivalent(a: float, b: float, tol: float = EQUIVALENCE_TOL) -> bool:
    d = (a - b) % math.pi
    return min(d, math.pi - d) <= tol


@dataclass(frozen=True, slots=True)
class MeasurementBasis:
    """Projective basis spanned by the states at ``beta`` and ``beta + pi/2``.

    Outcome 0 is the ``beta`` vector, outcome 1 the orthogonal one.
    """

    beta: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "beta", canonicalize(self.beta))

    def vector(self, outcome: int) -> PolarizationState:
        return PolarizationState(self.beta + outcome * (math.pi / 2.0))


COMPUTATIONAL = MeasurementBasis(0.0)
# vectors at +pi/4 (outcome 0) and -pi/4 (outcome 1)
DIAGONAL = MeasurementBasis(QUARTER)


def rotate(psi: PolarizationState, delta: float) -> PolarizationState:
    """Apply the real rotation ``U_y(delta)``; rotations add and commute."""
    return PolarizationState(psi.angle + delta)


def flip(psi: PolarizationState) -> PolarizationState:
    """Exchange |0> and |1> by a quarter-turn rotation.

    Being a rotation, this commutes with any unknown rotation already applied
    to the photon. That property is what lets an eavesdropper flip a stored
    photon without knowing the receiver's secret angle.
    """
    return rotate(psi, math.pi / 2.0)


def swap_coefficients(psi: PolarizationState) -> PolarizationState:
    """Reflection ``a|0> + b|1> -> b|0> + a|1>``.

    Also exchanges |0> and |1>, but reverses the sense of rotation, so it does
    not commute with ``rotate``. Kept as a negative control for ``flip``.
    """
    return PolarizationState(-math.pi / 2.0 - psi.angle)


def born_probability(psi: PolarizationState, basis: MeasurementBasis) -> float:
    """Probability of outcome 0, ``cos^2(angle - beta)``."""
    c = math.cos(psi.angle - basis.beta)
    return min(1.0, c * c)


def measure(
    psi: PolarizationState, basis: MeasurementBasis, rand: UniformSource
) -> tuple[int, PolarizationState]:
    """Projective measurement; returns the outcome bit and the collapsed state.

    Certain outcomes (probability within ``DETERMINISTIC_TOL`` of 0 or 1) do
    not draw from ``rand``.
    """
    p0 = born_probability(psi, basis)
    if p0 >= 1.0 - DETERMINISTIC_TOL:
        outcome = 0
    elif p0 <= DETERMINISTIC_TOL:
        outcome = 1
    else:
        outcome = 0 if rand.uniform() < p0 else 1
    return outcome, basis.vector(outcome)


def is_deterministic(psi: PolarizationState, basis: MeasurementBasis) -> bool:
    p0 = born_probability(psi, basis)
    return p0 >= 1.0 - DETERMINISTIC_TOL or p0 <= DETERMINISTIC_TOL
