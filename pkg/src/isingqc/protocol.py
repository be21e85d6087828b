"""Pulse sequence entangling the two end spins of the chain.

Starting from ``|0...0>``, a pi/2-pulse on spin L-1 prepares
``(|0...0> + i|10...0>)/sqrt(2)``.  A chain of 2L-3 resonant pi-pulses then
walks a flipped domain down the ``|1...>`` branch,

    |10000> -> |11000> -> |11100> -> |10100> -> |10110> -> |10010> -> ... -> |10001>,

while every pulse stays detuned from the ground state by 2J (4J for pulse 4).
Frequencies come from the H0 energy differences of the intended transitions.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .errors import InvalidInputError
from .model import (AmplitudeMap, BasisState, Pulse, SpinSystem, bit_string,
                    effective_flip_shift, flip, resonance_frequency)
from .twolevel import pi_pulse_duration, rabi_2pik


@dataclass(frozen=True)
class ProtocolStep:
    pulse: Pulse
    spin: int
    source: BasisState
    target: BasisState
    ground_detuning: float


@dataclass(frozen=True)
class ProtocolPlan:
    system: SpinSystem
    omega_rabi: float
    steps: tuple

    @property
    def pulses(self) -> List[Pulse]:
        return [s.pulse for s in self.steps]

    @property
    def spins(self) -> List[int]:
        return [s.spin for s in self.steps]

    @property
    def target_state(self) -> BasisState:
        return self.steps[-1].target

    @property
    def ground_state(self) -> BasisState:
        return 0

    @property
    def duration(self) -> float:
        return float(sum(s.pulse.tau for s in self.steps))

    def __len__(self):
        return len(self.steps)

    def table(self) -> str:
        L = self.system.L
        head = f"{'n':>4} {'spin':>5} {'nu':>16} {'Omega':>12} {'tau':>12} {'Delta_g':>8}  transition"
        lines = [head]
        for n, s in enumerate(self.steps, 1):
            lines.append(
                f"{n:>4} {s.spin:>5} {s.pulse.nu:>16.10g} {s.pulse.omega_rabi:>12.6g} "
                f"{s.pulse.tau:>12.6g} {s.ground_detuning:>8.4g}  "
                f"|{bit_string(L, s.source)}> -> |{bit_string(L, s.target)}>"
            )
        return "\n".join(lines)

    def to_dict(self) -> dict:
        sys = self.system
        return {
            "system": {"L": sys.L, "omega0": sys.omega0, "delta_omega": sys.delta_omega, "J": sys.J},
            "omega_rabi": self.omega_rabi,
            "target": bit_string(sys.L, self.target_state),
            "pulses": [
                {
                    "n": n,
                    "spin": s.spin,
                    "nu": s.pulse.nu,
                    "omega_rabi": s.pulse.omega_rabi,
                    "tau": s.pulse.tau,
                    "phi": s.pulse.phi,
                    "source": bit_string(sys.L, s.source),
                    "target": bit_string(sys.L, s.target),
                    "ground_detuning": s.ground_detuning,
                }
                for n, s in enumerate(self.steps, 1)
            ],
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, data: dict) -> "ProtocolPlan":
        sys = SpinSystem(**data["system"])
        steps = tuple(
            ProtocolStep(
                Pulse(p["nu"], p["omega_rabi"], p["tau"], p.get("phi", 0.0)),
                p["spin"], int(p["source"], 2), int(p["target"], 2), p["ground_detuning"],
            )
            for p in data["pulses"]
        )
        return cls(sys, data["omega_rabi"], steps)


def flip_sequence(L: int) -> List[int]:
    """Resonant spin of each pulse: L-1, L-2, then (j, j+1) for j = L-3 .. 0."""
    if L < 3:
        raise InvalidInputError(f"the protocol needs at least 3 spins, got L={L}")
    seq = [L - 1, L - 2]
    for j in range(L - 3, -1, -1):
        seq += [j, j + 1]
    return seq


def generate_protocol(system: SpinSystem, omega_rabi: Optional[float] = None,
                      k_2pik: Optional[int] = None) -> ProtocolPlan:
    """Build the 2L-2 pulse plan.

    Every pulse after the first gets a Rabi frequency proportional to its
    ground-branch detuning, ``Omega * |Delta_n| / 2J``, which reproduces
    Omega_4 = 2 Omega and keeps the near-resonant error the same for all
    pulses.  With ``k_2pik`` the base Omega is the 2*pi*k value for 2J.
    """
    L = system.L
    if L < 3:
        raise InvalidInputError(f"the protocol needs at least 3 spins, got L={L}")
    if k_2pik is not None:
        omega_rabi = rabi_2pik(2 * system.J, k_2pik)
    if omega_rabi is None or not omega_rabi > 0:
        raise InvalidInputError("a positive Rabi frequency or a 2*pi*k order is required")

    steps = []
    state = 0
    for n, k in enumerate(flip_sequence(L), 1):
        lower = state & ~(1 << k)
        nu = resonance_frequency(system, lower, k)
        ground_detuning = effective_flip_shift(system, 0, k, nu)
        if n == 1:
            omega_n = omega_rabi
            tau = pi_pulse_duration(omega_n, 0.5)
        else:
            omega_n = omega_rabi * abs(ground_detuning) / (2 * system.J)
            tau = pi_pulse_duration(omega_n)
        target = flip(state, k)
        steps.append(ProtocolStep(Pulse(nu, omega_n, tau), k, state, target, ground_detuning))
        state = target
    return ProtocolPlan(system, float(omega_rabi), tuple(steps))


@dataclass(frozen=True)
class Outcome:
    P: float
    phi1: float
    phi2: float
    p_ground: float
    p_target: float


def evaluate_outcome(final: AmplitudeMap, plan: ProtocolPlan, target: Optional[BasisState] = None) -> Outcome:
    """Error probability and phases of the ground and target components.

    ``P = 1 - |C_0|^2 - |C_target|^2`` for a normalised state; phi1 = arg C_0 and
    phi2 = arg C_target - phi1, wrapped to (-pi, pi].

    Approximate engines are not exactly unitary, so P is taken as the
    population outside the two wanted states (pruned mass included) relative
    to the total.  For a unit-norm state this is the same number.
    """
    if target is None:
        target = plan.target_state
    c0 = complex(final.amplitude(plan.ground_state))
    ct = complex(final.amplitude(target))
    phi1 = float(np.angle(c0))
    phi2 = float(wrap_phase(np.angle(ct) - phi1))
    p0, pt = abs(c0) ** 2, abs(ct) ** 2
    rest = math.fsum(abs(a) ** 2 for s, a in final.items() if s != plan.ground_state and s != target)
    rest += final.pruned_mass
    return Outcome(float(rest / (rest + p0 + pt)), phi1, phi2, float(p0), float(pt))


def wrap_phase(x):
    """Map angles to (-pi, pi]."""
    y = np.mod(np.asarray(x, dtype=float) + np.pi, 2 * np.pi) - np.pi
    y = np.where(y == -np.pi, np.pi, y)
    return float(y) if np.ndim(y) == 0 else y


def phase_deviation(phi: float, reference: float) -> float:
    """Relative deviation |phi - reference| / |reference| with the difference wrapped."""
    return abs(wrap_phase(phi - reference)) / abs(reference)
