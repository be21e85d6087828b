import json

import numpy as np
import pytest

from isingqc.errors import InvalidInputError
from isingqc.model import AmplitudeMap, SpinSystem, bit_string, energy, flip
from isingqc.protocol import (ProtocolPlan, evaluate_outcome, flip_sequence, generate_protocol,
                              phase_deviation, wrap_phase)
from isingqc.twolevel import rabi_2pik


def path(plan):
    return [bit_string(plan.system.L, s.target) for s in plan.steps]


def test_three_spin_plan_by_hand():
    sys = SpinSystem(3, 50.0)
    plan = generate_protocol(sys, 0.3)
    assert len(plan) == 4
    assert path(plan) == ["100", "110", "111", "101"]
    assert [s.spin for s in plan.steps] == [2, 1, 0, 1]
    # nu of each pulse: |E(target) - E(source)|
    for s in plan.steps:
        assert s.pulse.nu == pytest.approx(abs(energy(sys, s.target) - energy(sys, s.source)))
    w = sys.omega
    assert [s.pulse.nu for s in plan.steps] == pytest.approx([w[2] + 1, w[1], w[0] - 1, w[1] - 2])
    assert [abs(s.ground_detuning) for s in plan.steps] == pytest.approx([0, 2, 2, 4])


def test_five_spin_scheme_matches_arrows():
    plan = generate_protocol(SpinSystem(5, 100.0), 0.2)
    assert path(plan) == ["10000", "11000", "11100", "10100", "10110",
                          "10010", "10011", "10001"]
    assert bit_string(5, plan.target_state) == "10001"


@pytest.mark.parametrize("L", [3, 4, 5, 8, 13, 40])
def test_pulse_count_and_walk(L):
    plan = generate_protocol(SpinSystem(L, 100.0), 0.1)
    assert len(plan) == 2 * L - 2
    assert len(flip_sequence(L)) == 2 * L - 2
    states = [s.target for s in plan.steps]
    assert len(set(states)) == len(states)
    assert states[0] == 1 << (L - 1)
    assert plan.target_state == (1 << (L - 1)) | 1
    for prev, nxt in zip(plan.steps, plan.steps[1:]):
        assert nxt.source == prev.target


@pytest.mark.parametrize("L", [4, 5, 7, 12])
def test_ground_branch_detunings(L):
    sys = SpinSystem(L, 100.0)
    plan = generate_protocol(sys, 0.2)
    for n, s in enumerate(plan.steps, 1):
        direct = energy(sys, flip(0, s.spin)) - energy(sys, 0) - s.pulse.nu
        assert s.ground_detuning == pytest.approx(direct, abs=1e-9)
        if n == 1:
            assert direct == pytest.approx(0, abs=1e-9)
        else:
            assert abs(direct) == pytest.approx(4.0 if n == 4 else 2.0)


def test_rabi_and_durations():
    om = 0.25
    plan = generate_protocol(SpinSystem(6, 100.0), om)
    p = plan.pulses
    assert p[0].tau == pytest.approx(np.pi / (2 * om))
    for n, pulse in enumerate(p[1:], 2):
        assert pulse.omega_rabi == pytest.approx(2 * om if n == 4 else om)
        assert pulse.tau * pulse.omega_rabi == pytest.approx(np.pi)


def test_2pik_override():
    plan = generate_protocol(SpinSystem(5, 100.0), omega_rabi=9.0, k_2pik=3)
    assert plan.omega_rabi == pytest.approx(rabi_2pik(2.0, 3))


def test_invalid_length():
    with pytest.raises(InvalidInputError):
        generate_protocol(SpinSystem(2, 100.0), 0.1)
    with pytest.raises(InvalidInputError):
        generate_protocol(SpinSystem(4, 100.0))


def test_json_roundtrip_and_table():
    plan = generate_protocol(SpinSystem(4, 100.0), k_2pik=2)
    back = ProtocolPlan.from_dict(json.loads(plan.to_json()))
    assert back.pulses == plan.pulses
    assert back.spins == plan.spins
    assert back.target_state == plan.target_state
    table = plan.table()
    assert table.count("\n") == len(plan)
    assert "|1001>" in table


def test_evaluate_outcome_ideal_states():
    plan = generate_protocol(SpinSystem(5, 100.0), 0.2)
    half = AmplitudeMap(5, {0: 1 / np.sqrt(2), 1 << 4: 1j / np.sqrt(2)})
    out = evaluate_outcome(half, plan, target=plan.steps[0].target)
    assert out.P == pytest.approx(0, abs=1e-15)
    assert out.phi2 == pytest.approx(np.pi / 2)
    final = AmplitudeMap(5, {0: np.exp(0.3j) / np.sqrt(2), plan.target_state: np.exp(1.1j) / np.sqrt(2)})
    out = evaluate_outcome(final, plan)
    assert out.P == pytest.approx(0, abs=1e-15)
    assert out.phi1 == pytest.approx(0.3)
    assert out.phi2 == pytest.approx(0.8)


def test_phase_helpers():
    assert wrap_phase(3 * np.pi) == pytest.approx(np.pi)
    assert wrap_phase(-0.5) == pytest.approx(-0.5)
    assert phase_deviation(np.pi - 0.01, -np.pi + 0.01) == pytest.approx(0.02 / (np.pi - 0.01))


def test_error_probability_is_relative_to_retained_norm():
    plan = generate_protocol(SpinSystem(3, 100.0), 0.2)
    # a slightly sub-normalised state with 1e-4 of its weight in an error state
    amps = {0: 0.7, plan.target_state: 0.7j, 0b010: 0.01 * 0.7 * np.sqrt(2)}
    state = AmplitudeMap(3, amps, pruned_mass=0.0)
    out = evaluate_outcome(state, plan)
    assert out.P == pytest.approx(1e-4 / (1 + 1e-4), rel=1e-12)
    state.pruned_mass = 2e-4 * 0.98
    assert evaluate_outcome(state, plan).P == pytest.approx(3e-4 / (1 + 3e-4), rel=1e-12)
