"""Closed-form error budget: near-resonant epsilon_n plus non-resonant mu_n.

Needs no state vectors, so it is the engine of choice for long chains and for
the delta_omega_min(L) scaling curves.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from ..errors import InvalidInputError
from ..model import SpinSystem, check_spin
from ..twolevel import epsilon


def mu_unit(omega_rabi: float, delta_omega: float) -> float:
    """Non-resonant error scale (Omega / 2 delta_omega)^2."""
    return (omega_rabi / (2.0 * delta_omega)) ** 2


def nonresonant_probability(k_res: int, k_other: int, omega_rabi: float, delta_omega: float) -> float:
    """Probability of flipping spin ``k_other`` during a pulse resonant with ``k_res``."""
    if k_res == k_other:
        raise InvalidInputError("the non-resonant spin must differ from the resonant one")
    if omega_rabi >= delta_omega:
        warnings.warn("Omega >= delta_omega: outside the perturbative regime", RuntimeWarning,
                      stacklevel=2)
    return mu_unit(omega_rabi, delta_omega) / float(k_res - k_other) ** 2


def mu_for_pulse(system: SpinSystem, k_res: int, omega_rabi: float) -> float:
    """Total non-resonant probability for one pulse, summed over all other spins."""
    k_res = check_spin(system, k_res)
    d = np.arange(system.L) - k_res
    d = d[d != 0].astype(float)
    return mu_unit(omega_rabi, system.delta_omega) * float(np.sum(1.0 / d**2))


def total_error(per_pulse: Sequence[Tuple[float, float]]) -> float:
    """P = 1 - 1/2 prod(1 - mu_n) - 1/2 prod(1 - mu_n - eps_n)."""
    arr = np.asarray(per_pulse, dtype=float).reshape(-1, 2)
    eps, mu = arr[:, 0], arr[:, 1]
    if np.any(eps < 0) or np.any(mu < 0):
        raise InvalidInputError("probabilities must be non-negative")
    if np.any(eps + mu > 1):
        raise InvalidInputError("epsilon_n + mu_n exceeds 1")
    # 1 - prod(1 - x) as -expm1(sum log1p(-x)) avoids cancellation when P is small
    with np.errstate(divide="ignore"):
        a = -np.expm1(np.sum(np.log1p(-mu)))
        b = -np.expm1(np.sum(np.log1p(-(mu + eps))))
    return float(0.5 * a + 0.5 * b) + 0.0


@dataclass
class ErrorBudget:
    per_pulse: List[Tuple[float, float]]
    mu_unit: float
    total_P: float = field(init=False)

    def __post_init__(self):
        self.total_P = total_error(self.per_pulse)

    @property
    def epsilons(self) -> np.ndarray:
        return np.array([e for e, _ in self.per_pulse])

    @property
    def mus(self) -> np.ndarray:
        return np.array([m for _, m in self.per_pulse])

    def to_dict(self) -> dict:
        return {
            "mu_unit": self.mu_unit,
            "total_P": self.total_P,
            "pulses": [{"n": n, "epsilon": e, "mu": m} for n, (e, m) in enumerate(self.per_pulse, 1)],
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def budget_for_plan(plan) -> ErrorBudget:
    """Error budget of a :class:`~isingqc.protocol.ProtocolPlan`.

    epsilon_n uses the ground-branch detuning of each pulse (zero for the
    first pulse, whose ground-state transition is the intended one) and mu_n
    uses the pulse's own resonant spin and Rabi frequency.
    """
    system = plan.system
    rows = []
    for n, step in enumerate(plan.steps):
        pulse = step.pulse
        eps = 0.0 if n == 0 else epsilon(pulse.omega_rabi, step.ground_detuning, pulse.tau)
        rows.append((eps, mu_for_pulse(system, step.spin, pulse.omega_rabi)))
    return ErrorBudget(rows, mu_unit(plan.omega_rabi, system.delta_omega))


def estimate_error(system: SpinSystem, omega_rabi: float = None, k_2pik: int = None) -> float:
    """Estimator P for the entanglement protocol at the given parameters."""
    from ..protocol import generate_protocol

    return budget_for_plan(generate_protocol(system, omega_rabi, k_2pik)).total_P
