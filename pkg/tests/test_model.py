import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from isingqc.errors import InvalidInputError
from isingqc.exact import build_effective_hamiltonian
from isingqc.model import (AmplitudeMap, Pulse, SpinSystem, as_state, bit_string, energy,
                           effective_energy, effective_flip_shift, effective_flip_shifts,
                           flip, flipped_spins, resonance_frequency, rotating_shift, sigmas)


def brute_energy(system, bits):
    """H0 diagonal from an explicit sigma list, k = 0 first."""
    s = bits
    e = -0.5 * sum(w * x for w, x in zip(system.omega, s))
    e -= 0.5 * system.J * sum(s[k] * s[k + 1] for k in range(system.L - 1))
    return e


def test_spin_system_validation():
    with pytest.raises(InvalidInputError):
        SpinSystem(0, 10.0)
    with pytest.raises(InvalidInputError):
        SpinSystem(3, 0.0)
    sys = SpinSystem(4, 10.0, omega0=50.0)
    assert np.allclose(sys.omega, [50, 60, 70, 80])
    assert np.all(np.diff(sys.omega) > 0)


def test_state_conversions():
    sys = SpinSystem(5, 10.0)
    assert as_state(sys, "00010") == 2
    assert as_state(sys, [1, -1, 1, 1, 1]) == 2
    assert bit_string(5, 2) == "00010"
    assert list(flipped_spins(0b10101)) == [0, 2, 4]
    assert list(sigmas(5, 0b00011)) == [-1, -1, 1, 1, 1]
    with pytest.raises(InvalidInputError):
        as_state(sys, "0001")
    with pytest.raises(InvalidInputError):
        as_state(sys, 32)
    with pytest.raises(InvalidInputError):
        as_state(sys, [1, 2, 1, 1, 1])


def test_large_chain_state_is_a_flip_set():
    sys = SpinSystem(1000, 1000.0)
    s = flip(flip(0, 999), 3)
    assert list(flipped_spins(s)) == [3, 999]
    sg = sigmas(1000, s)
    assert sg[3] == -1 and sg[999] == -1 and sg.sum() == 996
    assert resonance_frequency(sys, s, 998) == pytest.approx(sys.larmor(998))


def test_energy_two_spins_ground():
    w0, dw = 100.0, 7.0
    sys = SpinSystem(2, dw, omega0=w0)
    assert energy(sys, "00") == pytest.approx(-w0 - dw / 2 - 0.5)


def test_energy_single_spin_excited():
    sys = SpinSystem(1, 5.0, omega0=100.0)
    assert energy(sys, "1") == pytest.approx(50.0)


def test_middle_flip_costs_omega1_plus_2J():
    sys = SpinSystem(3, 10.0)
    assert energy(sys, "010") - energy(sys, "000") == pytest.approx(sys.larmor(1) + 2.0)


def test_energy_length_mismatch():
    with pytest.raises(InvalidInputError):
        energy(SpinSystem(3, 10.0), "0000")


def test_rotating_shift_examples():
    sys = SpinSystem(4, 10.0)
    assert rotating_shift(sys, 0, 7.5) == pytest.approx(-7.5 * 4 / 2)
    assert rotating_shift(sys, 0b1111, 7.5) == pytest.approx(7.5 * 4 / 2)
    assert rotating_shift(SpinSystem(2, 1.0), "01", 10.0) == 0.0


def test_resonance_frequency_examples():
    sys = SpinSystem(6, 20.0)
    L = sys.L
    assert resonance_frequency(sys, 0, L - 1) == pytest.approx(sys.larmor(L - 1) + 1.0)
    assert resonance_frequency(sys, 0, 0) == pytest.approx(sys.larmor(0) + 1.0)
    for k in range(1, L - 1):
        assert resonance_frequency(sys, 0, k) == pytest.approx(sys.larmor(k) + 2.0)
    s = 1 << (L - 1)
    assert resonance_frequency(sys, s, L - 2) == pytest.approx(sys.larmor(L - 2))
    with pytest.raises(InvalidInputError):
        resonance_frequency(sys, 0, L)


L_SMALL = st.integers(min_value=1, max_value=8)


@settings(max_examples=60, deadline=None)
@given(L=L_SMALL, data=st.data())
def test_energy_matches_brute_force(L, data):
    sys = SpinSystem(L, data.draw(st.floats(0.5, 200)), omega0=data.draw(st.floats(-50, 500)))
    state = data.draw(st.integers(0, (1 << L) - 1))
    bits = [-1 if (state >> k) & 1 else 1 for k in range(L)]
    assert energy(sys, state) == pytest.approx(brute_energy(sys, bits), rel=1e-12, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(L=st.integers(4, 10), data=st.data())
def test_flip_additivity_for_separated_spins(L, data):
    sys = SpinSystem(L, 13.0)
    state = data.draw(st.integers(0, (1 << L) - 1))
    k1 = data.draw(st.integers(0, L - 3))
    k2 = data.draw(st.integers(k1 + 2, L - 1))
    both = energy(sys, flip(flip(state, k1), k2)) - energy(sys, state)
    single = (energy(sys, flip(state, k1)) - energy(sys, state)
              + energy(sys, flip(state, k2)) - energy(sys, state))
    assert both == pytest.approx(single, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(L=st.integers(1, 10), data=st.data())
def test_resonance_antisymmetry(L, data):
    sys = SpinSystem(L, 11.0)
    state = data.draw(st.integers(0, (1 << L) - 1))
    k = data.draw(st.integers(0, L - 1))
    assert resonance_frequency(sys, state, k) == pytest.approx(
        -resonance_frequency(sys, flip(state, k), k))
    assert resonance_frequency(sys, state, k) == pytest.approx(
        energy(sys, flip(state, k)) - energy(sys, state), abs=1e-9)


@pytest.mark.parametrize("L", [1, 2, 3, 5])
def test_effective_energy_matches_matrix_diagonal(L):
    sys = SpinSystem(L, 17.0)
    pulse = Pulse(nu=sys.larmor(L - 1) + 1.0, omega_rabi=0.3, tau=1.0)
    h = build_effective_hamiltonian(sys, pulse)
    for s in range(1 << L):
        assert h[s, s] == pytest.approx(effective_energy(sys, s, pulse.nu), abs=1e-9)


def test_effective_flip_shifts_vectorised():
    sys = SpinSystem(7, 30.0)
    nu = 140.0
    for state in (0, 0b1010011, 0b1111111):
        vec = effective_flip_shifts(sys, state, nu)
        for k in range(7):
            expected = effective_energy(sys, flip(state, k), nu) - effective_energy(sys, state, nu)
            assert vec[k] == pytest.approx(expected, abs=1e-9)
            assert effective_flip_shift(sys, state, k, nu) == pytest.approx(expected, abs=1e-9)


def test_pulse_validation():
    with pytest.raises(InvalidInputError):
        Pulse(10.0, 0.0, 1.0)
    with pytest.raises(InvalidInputError):
        Pulse(10.0, 1.0, -1.0)
    assert Pulse(10.0, 0.4, 1.0).coupling == -0.2


def test_amplitude_map_roundtrip():
    vec = np.zeros(8, dtype=complex)
    vec[3] = 0.6
    vec[5] = 0.8j
    amap = AmplitudeMap.from_dense(vec, floor=1e-30)
    assert len(amap) == 2 and amap.norm2() == pytest.approx(1.0)
    assert np.allclose(amap.to_dense(), vec)
    rows = list(amap.rows())
    assert rows[0][:2] == (3, "011") and rows[1][3] == pytest.approx(0.8)
