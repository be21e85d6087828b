"""Exact dynamics by dense diagonalisation of the rotating-frame Hamiltonian.

Basis ordering is the natural binary order of basis-state indices, so dense
vectors and CSV dumps line up across engines.
"""
from __future__ import annotations

import csv
from typing import Sequence

import numpy as np
from scipy.linalg import eigh

from .errors import CapacityError, InvalidInputError
from .model import AmplitudeMap, Pulse, SpinSystem, bit_string

EXACT_LIMIT = 14
NORM_TOLERANCE = 1e-8


def _check_capacity(system: SpinSystem, limit: int):
    if system.L > limit:
        raise CapacityError(
            f"exact engine is limited to L <= {limit} (got L={system.L}); "
            "use the 'improved' or 'estimator' engine for longer chains"
        )


def _sigma_table(L: int) -> np.ndarray:
    idx = np.arange(1 << L)
    return 1 - 2 * ((idx[:, None] >> np.arange(L)) & 1)


def effective_diagonal(system: SpinSystem, nu: float, limit: int = EXACT_LIMIT) -> np.ndarray:
    """E_p - chi_p for every basis state."""
    _check_capacity(system, limit)
    s = _sigma_table(system.L)
    e = -0.5 * s @ system.omega - 0.5 * system.J * np.sum(s[:, :-1] * s[:, 1:], axis=1)
    chi = -0.5 * nu * s.sum(axis=1)
    return e - chi


def _frame_phase(system: SpinSystem, phi: float) -> np.ndarray:
    if phi == 0:
        return None
    s_sum = _sigma_table(system.L).sum(axis=1)
    return np.exp(0.5j * phi * s_sum)


def build_effective_hamiltonian(system: SpinSystem, pulse: Pulse, limit: int = EXACT_LIMIT) -> np.ndarray:
    """Dense real symmetric rotating-frame Hamiltonian for one pulse."""
    diag = effective_diagonal(system, pulse.nu, limit)
    n = diag.size
    h = np.diag(diag)
    idx = np.arange(n)
    for k in range(system.L):
        h[idx, idx ^ (1 << k)] = pulse.coupling
    return h


def to_rotating(c: np.ndarray, diag: np.ndarray, t: float, frame_phase=None) -> np.ndarray:
    """A_p = exp(-i E_p t) C_p (``diag`` holds the rotating-frame diagonal)."""
    a = np.exp(-1j * diag * t) * c
    return a if frame_phase is None else a / frame_phase


def to_lab(a: np.ndarray, diag: np.ndarray, t: float, frame_phase=None) -> np.ndarray:
    c = np.exp(1j * diag * t) * a
    return c if frame_phase is None else c * frame_phase


def _as_vector(state, system: SpinSystem) -> np.ndarray:
    if isinstance(state, AmplitudeMap):
        if state.L != system.L:
            raise InvalidInputError(f"state has {state.L} spins, system has {system.L}")
        return state.to_dense()
    vec = np.asarray(state, dtype=complex)
    if vec.shape != (1 << system.L,):
        raise InvalidInputError(f"dense state must have length {1 << system.L}")
    return vec


def propagate_pulse(state, system: SpinSystem, pulse: Pulse, t0: float = 0.0,
                    limit: int = EXACT_LIMIT):
    """Apply one pulse to laboratory-frame amplitudes.

    Accepts an :class:`AmplitudeMap` or a dense vector and returns the same
    kind.  The diagonal is shifted by its mean before diagonalising; the shift
    cancels between the frame transforms and keeps the phases small.
    """
    _check_capacity(system, limit)
    vec = _as_vector(state, system)
    norm = np.vdot(vec, vec).real
    if abs(norm - 1.0) > NORM_TOLERANCE:
        raise InvalidInputError(f"input state is not normalised (norm^2 = {norm:.12g})")
    out = vec.copy()
    if pulse.tau > 0:
        h = build_effective_hamiltonian(system, pulse, limit)
        diag = np.diag(h).copy()
        shift = diag.mean()
        diag -= shift
        h[np.diag_indices_from(h)] = diag
        evals, evecs = eigh(h, driver="evd")
        fp = _frame_phase(system, pulse.phi)
        a = to_rotating(vec, diag, t0, fp)
        a = evecs @ (np.exp(-1j * evals * pulse.tau) * (evecs.T @ a))
        out = to_lab(a, diag, t0 + pulse.tau, fp)
    if isinstance(state, AmplitudeMap):
        return AmplitudeMap.from_dense(out, frame="lab")
    return out


def run_protocol_exact(system: SpinSystem, pulses: Sequence[Pulse], initial=None,
                       limit: int = EXACT_LIMIT):
    """Apply ``pulses`` back to back starting at t = 0.

    Returns the final state (same kind as ``initial``; defaults to the ground
    state as an :class:`AmplitudeMap`) and the per-pulse norm drift.
    """
    _check_capacity(system, limit)
    if initial is None:
        initial = AmplitudeMap.basis(system.L, 0)
    as_map = isinstance(initial, AmplitudeMap)
    vec = _as_vector(initial, system)
    t = 0.0
    drift = []
    for pulse in pulses:
        before = np.vdot(vec, vec).real
        vec = propagate_pulse(vec, system, pulse, t, limit)
        drift.append(np.vdot(vec, vec).real - before)
        t += pulse.tau
    final = AmplitudeMap.from_dense(vec) if as_map else vec
    return final, drift


def dump_csv(state: AmplitudeMap, path):
    """Write amplitudes as (index, bits, real, imag) rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "bits", "real", "imag"])
        for idx, bits, re, im in state.rows():
            writer.writerow([idx, bits, f"{re:.12g}", f"{im:.12g}"])
