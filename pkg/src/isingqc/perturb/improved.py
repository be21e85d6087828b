"""Improved perturbation theory on sparse wavefunctions.

Each eigenstate of the rotating-frame Hamiltonian is approximated by an
eigenvector of its own 2x2 block plus first-order admixtures of the two
eigenvectors of every neighbouring block (one non-resonant spin flip away),
which gives at most 2L components.  Eigenvalues carry the second-order
shifts.  The propagation never touches the 2^L-dimensional space: only blocks
holding amplitude, and their neighbours when the admixture is large enough to
matter, are visited.

Conventions used below: a block is keyed by its member ``m`` with the
resonant spin in ``|0>``; ``p = m | (1 << k)``.  Block eigenvectors are
``q = (a, b)`` and ``Q = (-b, a)`` over ``(m, p)``.  Energies of a block are
stored relative to its own diagonal element at ``m``; offsets between blocks
are the local flip shifts, so the 10^8-sized absolute energies of a long
chain never enter a phase.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Sequence

import numpy as np

from ..errors import CapacityError, DegeneracyError, InvalidInputError
from ..model import (AmplitudeMap, BasisState, Pulse, SpinSystem, as_state,
                     effective_energy, effective_flip_shift, effective_flip_shifts,
                     sigma)
from ..twolevel import block_vectors

DEFAULT_FLOOR = 1e-14
DEFAULT_MAX_SUPPORT = 2_000_000
DEGENERACY_FLOOR = 1e-6


def resonant_spin(system: SpinSystem, nu: float) -> int:
    """Spin whose Larmor frequency is closest to the carrier."""
    k = int(round((nu - system.omega0) / system.delta_omega))
    return min(max(k, 0), system.L - 1)


class PulseContext:
    """Per-pulse data shared by every block: resonant spin, coupling, sums."""

    def __init__(self, system: SpinSystem, pulse: Pulse, spin: Optional[int] = None,
                 degeneracy_floor: float = DEGENERACY_FLOOR):
        self.system = system
        self.pulse = pulse
        self.k = resonant_spin(system, pulse.nu) if spin is None else int(spin)
        if not 0 <= self.k < system.L:
            raise InvalidInputError(f"resonant spin {spin} outside the chain")
        self.V = pulse.coupling
        self.omega = pulse.omega_rabi
        self.nu = pulse.nu
        self.min_denominator = degeneracy_floor * system.delta_omega
        k, L = self.k, system.L
        self.near = tuple(j for j in (k - 1, k + 1) if 0 <= j < L)
        self.excluded = {k - 1, k, k + 1}
        g = effective_flip_shifts(system, 0, self.nu)
        self.ground_shifts = g
        far = np.ones(L, dtype=bool)
        far[max(k - 1, 0):k + 2] = False
        self.far_mask = far
        others = np.arange(L) != k
        # a zero here is a degenerate neighbour; it is reported when the edge is built
        with np.errstate(divide="ignore"):
            self.far_inv_total = float(np.sum(1.0 / g[far]))
            self.inv2_total = float(np.sum(1.0 / g[others] ** 2))
        # |D_k'| >= |k'-k| delta_omega - 4J - |residual detuning|; a safe lower bound
        self.gap_bound = max(system.delta_omega - 4 * system.J - abs(g[k]), 1e-300)
        self._base_detune = system.omega0 + k * system.delta_omega - self.nu
        # change of 1/D_j when the spins (j-1, j, j+1) depart from the ground
        # configuration, indexed by their 3-bit pattern
        bits = (np.arange(8)[:, None] >> np.arange(3)) & 1
        sig3 = 1 - 2 * bits
        jj = np.arange(L)[:, None]
        nb = sig3[None, :, 0] * (jj > 0) + sig3[None, :, 2] * (jj < L - 1)
        d = sig3[None, :, 1] * ((system.omega - self.nu)[:, None] + system.J * nb)
        with np.errstate(divide="ignore", invalid="ignore"):
            table = 1.0 / d - 1.0 / g[:, None]
        table[~far] = 0.0
        table[:, 0] = 0.0
        self._far_table = table.tolist()
        # prefix sums of the all-flipped pattern, for the interior of flipped runs
        self._run_cum = np.concatenate([[0.0], np.cumsum(table[:, 7])]).tolist()

    # -- single-block quantities -------------------------------------------------
    def key(self, state: BasisState) -> BasisState:
        return state & ~(1 << self.k)

    def delta(self, m: BasisState) -> float:
        return effective_flip_shift(self.system, m, self.k, self.nu)

    def far_sum(self, m: BasisState) -> float:
        """Sum of 1/D_j(m) over spins not adjacent to the resonant one.

        Only spins in or next to a run of flipped spins differ from the ground
        state; the interior of each run is a prefix-sum lookup, so the cost
        grows with the number of runs rather than the number of flipped spins.
        """
        total = self.far_inv_total
        if not m:
            return total
        table, cum, L = self._far_table, self._run_cum, self.system.L
        starts = m & ~(m << 1)
        ends = m & ~(m >> 1)
        edges = set()
        while starts:
            lo_s = starts & -starts
            lo_e = ends & -ends
            a = lo_s.bit_length() - 1
            b = lo_e.bit_length() - 1
            if b - a >= 2:
                total += cum[b] - cum[a + 1]
            edges.update((a - 1, a, b, b + 1))
            starts ^= lo_s
            ends ^= lo_e
        for j in edges:
            if 0 <= j < L:
                total += table[j][(m >> (j - 1)) & 7 if j else (m << 1) & 7]
        return total

    def energies0(self, delta):
        lam = np.hypot(self.omega, delta)
        return np.stack([0.5 * (delta - lam), 0.5 * (delta + lam)], axis=-1)

    def local_spins(self, keys) -> np.ndarray:
        """sigma at spins k-2..k+2 for each key; 0 marks positions off the chain."""
        k = self.k
        if k >= 2:
            w = [(m >> (k - 2)) & 31 for m in keys]
        else:
            w = [(m << (2 - k)) & 31 for m in keys]
        bits = (np.asarray(w, dtype=np.int64)[:, None] >> np.arange(5)) & 1
        valid = np.array([0 <= k + o < self.system.L for o in range(-2, 3)])
        return (1 - 2 * bits) * valid

    def block_deltas(self, keys) -> np.ndarray:
        sig = self.local_spins(keys)
        return self._base_detune + self.system.J * (sig[:, 1] + sig[:, 3])

    def energy_shifts(self, keys, delta=None) -> np.ndarray:
        """Second-order shifts of (e_q, e_Q) for every block in ``keys``."""
        keys = list(keys)
        sig = self.local_spins(keys)
        J, V, k = self.system.J, self.V, self.k
        base = self._base_detune
        if delta is None:
            delta = base + J * (sig[:, 1] + sig[:, 3])
        far = -V * V * np.array([self.far_sum(m) for m in keys])
        out = np.repeat(far[:, None], 2, axis=1)
        e0 = self.energies0(delta)
        omega = self.system.omega
        for j in self.near:
            if j == k - 1:
                d = sig[:, 1] * (omega[j] - self.nu + J * (sig[:, 0] + 1))
                dj = base + J * (-sig[:, 1] + sig[:, 3])
            else:
                d = sig[:, 3] * (omega[j] - self.nu + J * (1 + sig[:, 4]))
                dj = base + J * (sig[:, 1] - sig[:, 3])
            c = _edge_coefficients(self, delta, e0, dj, self.energies0(dj), d)
            # |v|^2 / (e_q - e_q') summed over q' equals sum_q' c * v = c^2 * denom
            denom = e0[:, :, None] - (d[:, None, None] + self.energies0(dj)[:, None, :])
            out += np.sum(c * c * denom, axis=2)
        return out

    def energy_shift(self, m: BasisState, delta: float = None) -> np.ndarray:
        return self.energy_shifts([m], None if delta is None else np.array([delta]))[0]

    def _check_denominator(self, denom):
        small = np.min(np.abs(denom))
        if small < self.min_denominator:
            raise DegeneracyError(
                f"energy denominator {small:.3g} below the degeneracy floor "
                f"{self.min_denominator:.3g}", small)

    def neighbours(self, m: BasisState):
        """Flip shifts D_j(m) of every non-resonant spin, as (spins, shifts)."""
        d = effective_flip_shifts(self.system, m, self.nu)
        spins = np.flatnonzero(np.arange(self.system.L) != self.k)
        return spins, d[spins]


# -- expanded eigenstates ---------------------------------------------------------

@dataclass(frozen=True)
class ExpandedEigenstate:
    anchor: BasisState
    spin: int
    which: str
    coefficients: Dict[BasisState, float]
    energy2: float
    energy0: float

    def vector(self, L: int) -> np.ndarray:
        out = np.zeros(1 << L)
        for s, c in self.coefficients.items():
            out[s] = c
        return out


def _edge_coefficients(ctx: PulseContext, delta_i, e0_i, delta_j, e0_j, offset):
    """First-order mixing c[q, q'] of block j's eigenvectors into block i's.

    Broadcasts over a leading edge axis; ``offset`` is D = E_{m_j} - E_{m_i}.
    """
    a_i, b_i = block_vectors(ctx.omega, delta_i)
    a_j, b_j = block_vectors(ctx.omega, delta_j)
    # v[q, q'] = V * (psi_i[:, q] . psi_j[:, q'])
    v = np.empty(np.shape(offset) + (2, 2))
    v[..., 0, 0] = a_i * a_j + b_i * b_j
    v[..., 0, 1] = -a_i * b_j + b_i * a_j
    v[..., 1, 0] = -b_i * a_j + a_i * b_j
    v[..., 1, 1] = b_i * b_j + a_i * a_j
    v *= ctx.V
    denom = np.asarray(e0_i)[..., :, None] - (np.asarray(offset)[..., None, None]
                                              + np.asarray(e0_j)[..., None, :])
    ctx._check_denominator(denom)
    return v / denom


def expanded_eigenstate(system: SpinSystem, pulse: Pulse, state, which: str = "q",
                        spin: Optional[int] = None,
                        degeneracy_floor: float = DEGENERACY_FLOOR) -> ExpandedEigenstate:
    """Approximate eigenstate anchored on the block that contains ``state``.

    ``which`` selects the lower (``'q'``) or upper (``'Q'``) level of the
    block.  Coefficients span the block and the L-1 neighbouring blocks and
    are normalised; ``energy2`` is the absolute second-order eigenvalue.
    """
    if which not in ("q", "Q"):
        raise InvalidInputError(f"which must be 'q' or 'Q', got {which!r}")
    ctx = PulseContext(system, pulse, spin, degeneracy_floor)
    state = as_state(system, state)
    col = 0 if which == "q" else 1
    m = ctx.key(state)
    p = m | (1 << ctx.k)
    delta = ctx.delta(m)
    a, b = block_vectors(ctx.omega, delta)
    e0 = ctx.energies0(delta)
    shift = ctx.energy_shift(m, delta)
    own = np.array([a, b]) if col == 0 else np.array([-b, a])
    coeffs = {m: own[0], p: own[1]}

    spins, offsets = ctx.neighbours(m)
    keys = [m ^ (1 << int(j)) for j in spins]
    deltas = ctx.block_deltas(keys)
    c = _edge_coefficients(ctx, delta, e0, deltas, ctx.energies0(deltas), offsets)
    a_j, b_j = block_vectors(ctx.omega, deltas)
    row = c[:, col, :]
    comp_m = row[:, 0] * a_j - row[:, 1] * b_j
    comp_p = row[:, 0] * b_j + row[:, 1] * a_j
    bit = 1 << ctx.k
    for mj, cm, cp in zip(keys, comp_m, comp_p):
        coeffs[mj] = float(cm)
        coeffs[mj | bit] = float(cp)
    norm = np.sqrt(sum(v * v for v in coeffs.values()))
    coeffs = {s: float(v / norm) for s, v in coeffs.items()}
    base = effective_energy(system, m, pulse.nu)
    return ExpandedEigenstate(m, ctx.k, which, coeffs, float(base + e0[col] + shift[col]),
                              float(base + e0[col]))


# -- propagation ------------------------------------------------------------------

def improved_propagate(state: AmplitudeMap, system: SpinSystem, pulse: Pulse, t0: float = 0.0,
                       truncation_floor: float = DEFAULT_FLOOR, spin: Optional[int] = None,
                       order: str = "improved", screen: Optional[float] = None,
                       max_support: int = DEFAULT_MAX_SUPPORT,
                       degeneracy_floor: float = DEGENERACY_FLOOR) -> AmplitudeMap:
    """Propagate laboratory-frame amplitudes through one pulse.

    ``order='improved'`` uses the expanded eigenstates with second-order
    energies; ``order='twolevel'`` keeps only the isolated 2x2 blocks.
    Admixtures whose amplitude would stay below ``screen`` (default
    ``0.1 * sqrt(truncation_floor)``) are not generated; their estimated
    probability is added to ``screened_mass``.  Entries below
    ``truncation_floor`` in probability are dropped afterwards and counted in
    ``pruned_mass``.
    """
    if state.L != system.L:
        raise InvalidInputError(f"state has {state.L} spins, system has {system.L}")
    if order not in ("improved", "twolevel"):
        raise InvalidInputError(f"unknown order {order!r}")
    if screen is None:
        screen = 0.1 * np.sqrt(truncation_floor)
    out = AmplitudeMap(system.L, {}, "lab", state.pruned_mass, state.screened_mass)
    if pulse.tau == 0:
        out.amplitudes = dict(state.amplitudes)
        return out

    ctx = PulseContext(system, pulse, spin, degeneracy_floor)
    k, bit = ctx.k, 1 << ctx.k
    improved = order == "improved"

    # group the support into blocks
    index: Dict[BasisState, int] = {}
    keys = []
    cm_in, cp_in = [], []
    for s, amp in state.amplitudes.items():
        m = s & ~bit
        i = index.get(m)
        if i is None:
            i = index[m] = len(keys)
            keys.append(m)
            cm_in.append(0j)
            cp_in.append(0j)
        if s & bit:
            cp_in[i] += amp
        else:
            cm_in[i] += amp
    n_support = len(keys)

    # edges between blocks: generated from blocks heavy enough to matter
    edge_i, edge_j, edge_d, edge_sgn = [], [], [], []
    screened = 0.0
    if improved:
        V2 = ctx.V * ctx.V
        seen = set()
        weights = np.abs(np.array(cm_in)) ** 2 + np.abs(np.array(cp_in)) ** 2
        amps = np.sqrt(weights)
        for i in range(n_support):
            amp = amps[i]
            if amp * abs(ctx.V) / ctx.gap_bound < screen:
                screened += 2 * V2 * weights[i] * ctx.inv2_total
                continue
            m = keys[i]
            spins, d = ctx.neighbours(m)
            with np.errstate(divide="ignore"):
                admix = amp * abs(ctx.V) / np.abs(d)
            keep = admix >= screen
            if not np.all(keep):
                screened += 2 * V2 * weights[i] * float(np.sum(1.0 / d[~keep] ** 2))
            for j, dj in zip(spins[keep].tolist(), d[keep].tolist()):
                mj = m ^ (1 << j)
                pair = (m, mj) if m < mj else (mj, m)
                if pair in seen:
                    continue
                seen.add(pair)
                jj = index.get(mj)
                if jj is None:
                    jj = index[mj] = len(keys)
                    keys.append(mj)
                    cm_in.append(0j)
                    cp_in.append(0j)
                edge_i.append(i)
                edge_j.append(jj)
                edge_d.append(dj)
                edge_sgn.append(sigma(m, j))
    out.screened_mass += screened

    n = len(keys)
    cm_in = np.array(cm_in, dtype=complex)
    cp_in = np.array(cp_in, dtype=complex)
    delta = ctx.block_deltas(keys)
    a, b = block_vectors(ctx.omega, delta)
    e0 = ctx.energies0(delta)
    e = e0 + ctx.energy_shifts(keys, delta) if improved else e0

    tau, phi = pulse.tau, pulse.phi
    t1 = t0 + tau
    # own-reference rotating amplitudes projected on (q, Q)
    u_m = cm_in
    u_p = cp_in * np.exp(-1j * (delta * t0 - phi))
    w = np.stack([a * u_m + b * u_p, -b * u_m + a * u_p], axis=1)

    norm2 = np.ones((n, 2))
    s = w.copy()
    if edge_i:
        ei = np.array(edge_i)
        ej = np.array(edge_j)
        ed = np.array(edge_d)
        esg = np.array(edge_sgn, dtype=float)
        c = _edge_coefficients(ctx, delta[ei], e0[ei], delta[ej], e0[ej], ed)
        np.add.at(norm2, ei, np.sum(c * c, axis=2))
        np.add.at(norm2, ej, np.sum(c * c, axis=1))
        off0 = np.exp(-1j * (ed * t0 - phi * esg))
        # s_i += c_i w_j e^{-i off}, s_j += (-c_i^T) w_i e^{+i off}
        np.add.at(s, ei, np.einsum("eab,eb->ea", c, w[ej]) * off0[:, None])
        np.add.at(s, ej, -np.einsum("eba,eb->ea", c, w[ei]) * np.conj(off0)[:, None])
    inv_norm = 1.0 / np.sqrt(norm2)
    s = s * inv_norm * np.exp(-1j * e * tau) * inv_norm

    y = s.copy()
    if edge_i:
        off1 = np.exp(1j * (ed * t1 - phi * esg))
        np.add.at(y, ej, np.einsum("eab,ea->eb", c, s[ei]) * off1[:, None])
        np.add.at(y, ei, -np.einsum("eba,ea->eb", c, s[ej]) * np.conj(off1)[:, None])

    cm_out = a * y[:, 0] - b * y[:, 1]
    cp_out = (b * y[:, 0] + a * y[:, 1]) * np.exp(1j * (delta * t1 - phi))

    floor = truncation_floor
    amps = out.amplitudes
    pruned = 0.0
    pm = np.abs(cm_out) ** 2
    pp = np.abs(cp_out) ** 2
    for i, m in enumerate(keys):
        if pm[i] >= floor:
            amps[m] = complex(cm_out[i])
        else:
            pruned += pm[i]
        if pp[i] >= floor:
            amps[m | bit] = complex(cp_out[i])
        else:
            pruned += pp[i]
    out.pruned_mass += pruned
    if len(amps) > max_support:
        raise CapacityError(f"support grew to {len(amps)} states (cap {max_support})")
    return out


def run_protocol_improved(system: SpinSystem, pulses: Sequence[Pulse], initial: AmplitudeMap = None,
                          truncation_floor: float = DEFAULT_FLOOR, spins: Optional[Iterable[int]] = None,
                          order: str = "improved", **kwargs) -> AmplitudeMap:
    """Apply ``pulses`` back to back from t = 0 with :func:`improved_propagate`."""
    state = AmplitudeMap.basis(system.L, 0) if initial is None else initial.copy()
    spins = [None] * len(pulses) if spins is None else list(spins)
    t = 0.0
    for pulse, k in zip(pulses, spins):
        state = improved_propagate(state, system, pulse, t, truncation_floor, spin=k,
                                   order=order, **kwargs)
        t += pulse.tau
    return state
