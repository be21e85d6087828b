"""Closed-form dynamics of a single 2x2 block of the rotating-frame Hamiltonian.

A block couples ``|m>`` (resonant spin in ``|0>``) and ``|p>`` (resonant spin
flipped) with diagonal ``(E_m, E_m + delta)`` and off-diagonal ``-Omega/2``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError


def lambda_minus_delta(omega_rabi, delta):
    """``sqrt(Omega^2 + Delta^2) - Delta`` without cancellation for Delta >> Omega."""
    omega_rabi = np.asarray(omega_rabi, dtype=float)
    delta = np.asarray(delta, dtype=float)
    lam = np.hypot(omega_rabi, delta)
    with np.errstate(divide="ignore", invalid="ignore"):
        stable = omega_rabi**2 / (lam + delta)
    return np.where(delta > 0, stable, lam - delta)


def block_vectors(omega_rabi, delta):
    """Eigenvector components ``(a, b)`` with q = (a, b) and Q = (-b, a) over (m, p).

    Broadcasts over array arguments.
    """
    lmd = lambda_minus_delta(omega_rabi, delta)
    norm = np.hypot(lmd, omega_rabi)
    return omega_rabi / norm, lmd / norm


@dataclass(frozen=True)
class TwoLevelBlock:
    e_m: float
    delta: float
    omega_rabi: float

    def __post_init__(self):
        if not self.omega_rabi > 0:
            raise InvalidInputError(f"Rabi frequency must be positive, got {self.omega_rabi!r}")

    @property
    def v(self) -> float:
        return -0.5 * self.omega_rabi

    @property
    def lam(self) -> float:
        return float(np.hypot(self.omega_rabi, self.delta))

    def matrix(self) -> np.ndarray:
        return np.array([[self.e_m, self.v], [self.v, self.e_m + self.delta]])


def block_eigensystem(block: TwoLevelBlock):
    """Eigenvalues ``[e_q, e_Q]`` and eigenvectors as the columns of a 2x2 array.

    Rows of the eigenvector array are the (m, p) components; e_q is the lower
    level, and for delta = 0 the vectors are (|m> +- |p>)/sqrt(2).
    """
    centre = block.e_m + 0.5 * block.delta
    evals = np.array([centre - 0.5 * block.lam, centre + 0.5 * block.lam])
    a, b = block_vectors(block.omega_rabi, block.delta)
    evecs = np.array([[a, -b], [b, a]], dtype=float)
    return evals, evecs


def block_propagator(block: TwoLevelBlock, t0: float, tau: float) -> np.ndarray:
    """Laboratory-frame 2x2 map (C_m, C_p)(t0) -> (C_m, C_p)(t0 + tau)."""
    if tau < 0:
        raise InvalidInputError("pulse duration must be non-negative")
    lam = block.lam
    d = block.delta
    half = 0.5 * lam * tau
    c, s = np.cos(half), np.sin(half)
    mix = 1j * (block.omega_rabi / lam) * s
    stay_m = (c + 1j * (d / lam) * s) * np.exp(-0.5j * tau * d)
    stay_p = (c - 1j * (d / lam) * s) * np.exp(0.5j * tau * d)
    to_p = mix * np.exp(1j * t0 * d + 0.5j * tau * d)
    to_m = mix * np.exp(-1j * t0 * d - 0.5j * tau * d)
    return np.array([[stay_m, to_m], [to_p, stay_p]])


def propagate_block(block: TwoLevelBlock, start: str = "m", t0: float = 0.0, tau: float = 0.0):
    """Amplitudes ``(C_m, C_p)`` after a pulse that starts with the block in ``start``."""
    if start not in ("m", "p"):
        raise InvalidInputError(f"start must be 'm' or 'p', got {start!r}")
    u = block_propagator(block, t0, tau)
    column = u[:, 0] if start == "m" else u[:, 1]
    return complex(column[0]), complex(column[1])


def epsilon(omega_rabi, delta, tau):
    """Probability of the near-resonant transition, (Omega/lambda)^2 sin^2(lambda tau/2)."""
    omega_rabi = np.asarray(omega_rabi, dtype=float)
    if np.any(omega_rabi <= 0):
        raise InvalidInputError("Rabi frequency must be positive")
    lam = np.hypot(omega_rabi, delta)
    out = (omega_rabi / lam) ** 2 * np.sin(0.5 * lam * np.asarray(tau)) ** 2
    return float(out) if np.ndim(out) == 0 else out


def rabi_2pik(delta: float, k: int) -> float:
    """Rabi frequency that makes a detuned block complete ``k`` full cycles in a pi-pulse."""
    if int(k) != k or k < 1:
        raise InvalidInputError(f"2*pi*k order must be a positive integer, got {k!r}")
    if delta == 0:
        raise InvalidInputError("detuning must be non-zero")
    return abs(delta) / np.sqrt(4.0 * k * k - 1.0)


def pi_pulse_duration(omega_rabi: float, fraction: float = 1.0) -> float:
    """Duration of a resonant rotation; ``fraction=0.5`` gives the pi/2-pulse."""
    return fraction * np.pi / omega_rabi
