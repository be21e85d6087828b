"""Spin chain, basis states, pulses and the diagonal energies of H0.

Basis states are plain Python integers: bit ``k`` set means spin ``k`` is in
``|1>`` (sigma_k = -1), bit clear means ``|0>`` (sigma_k = +1).  Spin 0 is the
rightmost character of the printed bit pattern.  Python integers are unbounded,
so the same representation covers a 1000-spin chain, where a state is in
effect the set of spins flipped relative to the ground state ``|0...0>``.

All frequencies are in units of the Ising constant J.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Sequence, Union

import numpy as np

from .errors import InvalidInputError

BasisState = int
StateLike = Union[int, str, Sequence[int]]


@dataclass(frozen=True)
class SpinSystem:
    """Open Ising chain with Larmor frequencies ``omega0 + k * delta_omega``."""

    L: int
    delta_omega: float
    omega0: float = 100.0
    J: float = 1.0

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 1:
            raise InvalidInputError(f"chain length must be a positive integer, got {self.L!r}")
        if not self.delta_omega > 0:
            raise InvalidInputError(f"delta_omega must be positive, got {self.delta_omega!r}")
        if not np.isfinite(self.omega0):
            raise InvalidInputError("omega0 must be finite")
        object.__setattr__(self, "L", int(self.L))

    @cached_property
    def omega(self) -> np.ndarray:
        return self.omega0 + self.delta_omega * np.arange(self.L, dtype=float)

    def larmor(self, k: int) -> float:
        check_spin(self, k)
        return self.omega0 + k * self.delta_omega

    @property
    def dimension(self) -> int:
        return 1 << self.L

    def with_delta_omega(self, delta_omega: float) -> "SpinSystem":
        return SpinSystem(self.L, delta_omega, self.omega0, self.J)


@dataclass(frozen=True)
class Pulse:
    """One rectangular pulse: carrier ``nu``, Rabi frequency, duration, phase."""

    nu: float
    omega_rabi: float
    tau: float
    phi: float = 0.0

    def __post_init__(self):
        if not self.omega_rabi > 0:
            raise InvalidInputError(f"Rabi frequency must be positive, got {self.omega_rabi!r}")
        if not self.tau >= 0:
            raise InvalidInputError(f"pulse duration must be non-negative, got {self.tau!r}")

    @property
    def coupling(self) -> float:
        """Off-diagonal element of the rotating-frame Hamiltonian, ``-Omega/2``."""
        return -0.5 * self.omega_rabi


def check_spin(system: SpinSystem, k: int) -> int:
    if int(k) != k or not 0 <= k < system.L:
        raise InvalidInputError(f"spin index {k!r} outside 0..{system.L - 1}")
    return int(k)


def as_state(system: SpinSystem, state: StateLike) -> BasisState:
    """Normalise an int, a bit string ``'0110'`` or a sigma sequence to an int.

    Sigma sequences are ordered from spin 0 upwards; bit strings are printed
    with spin 0 rightmost.
    """
    L = system.L if isinstance(system, SpinSystem) else int(system)
    if isinstance(state, (int, np.integer)) and not isinstance(state, bool):
        state = int(state)
        if state < 0 or state >> L:
            raise InvalidInputError(f"state {state} does not fit in {L} spins")
        return state
    if isinstance(state, str):
        if len(state) != L or set(state) - {"0", "1"}:
            raise InvalidInputError(f"bit pattern {state!r} is not a {L}-spin state")
        return int(state, 2)
    values = list(state)
    if len(values) != L:
        raise InvalidInputError(f"expected {L} spin values, got {len(values)}")
    out = 0
    for k, s in enumerate(values):
        if s == -1:
            out |= 1 << k
        elif s != 1:
            raise InvalidInputError(f"spin values must be +1 or -1, got {s!r}")
    return out


def bit_string(L: int, state: BasisState) -> str:
    return format(state, f"0{L}b")


def sigma(state: BasisState, k: int) -> int:
    return -1 if (state >> k) & 1 else 1


def sigmas(L: int, state: BasisState) -> np.ndarray:
    """Array of sigma_k for k = 0..L-1."""
    if L <= 62:
        bits = (state >> np.arange(L, dtype=np.int64)) & 1
    else:
        raw = np.frombuffer(state.to_bytes((L + 7) // 8, "little"), dtype=np.uint8)
        bits = np.unpackbits(raw, bitorder="little")[:L].astype(np.int64)
    return 1 - 2 * bits


def flipped_spins(state: BasisState) -> Iterator[int]:
    """Indices of spins in ``|1>``, ascending."""
    while state:
        low = state & -state
        yield low.bit_length() - 1
        state ^= low


def flip(state: BasisState, k: int) -> BasisState:
    return state ^ (1 << k)


def energy(system: SpinSystem, state: StateLike) -> float:
    """Eigenvalue of H0 for a basis state."""
    state = as_state(system, state)
    s = sigmas(system.L, state)
    return float(-0.5 * np.dot(system.omega, s) - 0.5 * system.J * np.dot(s[:-1], s[1:]))


def _neighbor_sum(system: SpinSystem, state: BasisState, k: int) -> int:
    total = 0
    if k > 0:
        total += sigma(state, k - 1)
    if k < system.L - 1:
        total += sigma(state, k + 1)
    return total


def flip_energy(system: SpinSystem, state: BasisState, k: int) -> float:
    """``E(state with spin k flipped) - E(state)``, evaluated locally."""
    return sigma(state, k) * (system.omega0 + k * system.delta_omega
                              + system.J * _neighbor_sum(system, state, k))


def resonance_frequency(system: SpinSystem, state: StateLike, k: int) -> float:
    """Signed energy change for flipping spin ``k`` of ``state``.

    Positive when ``state`` has spin ``k`` in ``|0>`` (the upward transition);
    flipping the argument's spin ``k`` reverses the sign.
    """
    state = as_state(system, state)
    k = check_spin(system, k)
    return flip_energy(system, state, k)


def rotating_shift(system: SpinSystem, state: StateLike, nu: float) -> float:
    """chi_p = -(nu/2) * sum_k sigma_k."""
    state = as_state(system, state)
    n_up = bin(state).count("1")
    return -0.5 * nu * (system.L - 2 * n_up)


def effective_energy(system: SpinSystem, state: StateLike, nu: float) -> float:
    """Diagonal element E_p - chi_p of the rotating-frame Hamiltonian."""
    state = as_state(system, state)
    return energy(system, state) - rotating_shift(system, state, nu)


def effective_flip_shift(system: SpinSystem, state: BasisState, k: int, nu: float) -> float:
    """Change of the rotating-frame diagonal when spin ``k`` flips.

    For a state with spin ``k`` in ``|0>`` this is the detuning of the pulse
    from that transition, ``resonance - nu``.
    """
    return flip_energy(system, state, k) - nu * sigma(state, k)


def effective_flip_shifts(system: SpinSystem, state: BasisState, nu: float) -> np.ndarray:
    """Vectorised :func:`effective_flip_shift` over every spin of the chain."""
    s = sigmas(system.L, state)
    nb = np.zeros(system.L)
    nb[1:] += s[:-1]
    nb[:-1] += s[1:]
    return s * (system.omega - nu + system.J * nb)


@dataclass
class AmplitudeMap:
    """Sparse wavefunction: basis state -> complex amplitude.

    ``frame`` is ``"lab"`` for the laboratory coefficients C_p or ``"rot"`` for
    rotating-frame coefficients A_p.  ``pruned_mass`` accumulates probability
    removed by truncation, ``screened_mass`` an estimate of the admixture
    probability that was never generated because it fell below the screen.
    """

    L: int
    amplitudes: dict = field(default_factory=dict)
    frame: str = "lab"
    pruned_mass: float = 0.0
    screened_mass: float = 0.0

    @classmethod
    def basis(cls, L: int, state: BasisState = 0, frame: str = "lab") -> "AmplitudeMap":
        return cls(L, {int(state): 1.0 + 0.0j}, frame)

    @classmethod
    def from_dense(cls, vector, frame: str = "lab", floor: float = 0.0) -> "AmplitudeMap":
        vector = np.asarray(vector, dtype=complex)
        L = int(round(np.log2(vector.size)))
        if 1 << L != vector.size:
            raise InvalidInputError(f"dense vector length {vector.size} is not a power of two")
        keep = np.flatnonzero(np.abs(vector) ** 2 > floor) if floor > 0 else range(vector.size)
        return cls(L, {int(i): complex(vector[i]) for i in keep}, frame)

    def to_dense(self) -> np.ndarray:
        if self.L > 24:
            raise InvalidInputError(f"refusing to densify a {self.L}-spin state")
        out = np.zeros(1 << self.L, dtype=complex)
        for state, amp in self.amplitudes.items():
            out[state] = amp
        return out

    def amplitude(self, state: BasisState) -> complex:
        return self.amplitudes.get(state, 0.0j)

    def probability(self, state: BasisState) -> float:
        return abs(self.amplitude(state)) ** 2

    def norm2(self) -> float:
        return float(sum(abs(a) ** 2 for a in self.amplitudes.values()))

    def copy(self) -> "AmplitudeMap":
        return AmplitudeMap(self.L, dict(self.amplitudes), self.frame,
                            self.pruned_mass, self.screened_mass)

    def items(self) -> Iterable:
        return self.amplitudes.items()

    def __len__(self) -> int:
        return len(self.amplitudes)

    def rows(self):
        """(index, bit pattern, real, imag) rows in ascending index order."""
        for state in sorted(self.amplitudes):
            amp = self.amplitudes[state]
            yield state, bit_string(self.L, state), amp.real, amp.imag
