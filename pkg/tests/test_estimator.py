import warnings
from math import comb

import numpy as np
import pytest

from isingqc.errors import InvalidInputError
from isingqc.model import SpinSystem
from isingqc.perturb.estimator import (budget_for_plan, estimate_error, mu_for_pulse, mu_unit,
                                       nonresonant_probability, total_error)
from isingqc.protocol import generate_protocol


def test_mu_unit_and_pair_probability():
    assert mu_unit(0.1, 1.0) == pytest.approx(0.0025)
    assert nonresonant_probability(5, 4, 0.1, 1.0) == pytest.approx(0.0025)
    assert nonresonant_probability(5, 2, 0.1, 1.0) == pytest.approx(0.0025 / 9)
    with pytest.raises(InvalidInputError):
        nonresonant_probability(3, 3, 0.1, 1.0)


def test_warns_outside_perturbative_regime():
    with pytest.warns(RuntimeWarning):
        nonresonant_probability(1, 0, 2.0, 1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        nonresonant_probability(1, 0, 0.5, 1.0)


def test_mu_for_pulse_sums_inverse_squares():
    sys = SpinSystem(4, 1.0)
    expected = 0.0025 * (1 + 1 + 1 / 4)
    assert mu_for_pulse(sys, 1, 0.1) == pytest.approx(expected)
    # end spin of a long chain approaches the zeta(2) limit
    long = SpinSystem(20000, 1.0)
    assert mu_for_pulse(long, 0, 0.1) == pytest.approx(0.0025 * np.pi**2 / 6, rel=1e-4)
    mid = mu_for_pulse(long, 10000, 0.1)
    assert mid == pytest.approx(0.0025 * np.pi**2 / 3, rel=1e-3)


def test_total_error_simple_cases():
    assert total_error([(0.0, 0.0)] * 5) == 0.0
    assert total_error([(0.0, 0.01)]) == pytest.approx(0.01)
    assert total_error([(0.02, 0.0)]) == pytest.approx(0.01)
    with pytest.raises(InvalidInputError):
        total_error([(0.7, 0.5)])
    with pytest.raises(InvalidInputError):
        total_error([(-0.1, 0.0)])


def test_total_error_binomial_bound():
    # for identical mu and eps = 0, P = 1 - (1 - mu)^M, bounded by the first binomial term
    mu, M = 1e-4, 50
    p = total_error([(0.0, mu)] * M)
    assert p == pytest.approx(1 - (1 - mu) ** M)
    assert p <= M * mu
    assert p >= M * mu - comb(M, 2) * mu**2


def test_total_error_monotone():
    base = [(1e-5, 1e-4)] * 10
    p0 = total_error(base)
    assert total_error(base + [(0.0, 1e-6)]) > p0
    assert total_error([(2e-5, 1e-4)] * 10) > p0
    assert total_error([(1e-5, 2e-4)] * 10) > p0


def test_budget_epsilons_vanish_at_2pik():
    sys = SpinSystem(8, 1000.0)
    plan = generate_protocol(sys, k_2pik=3)
    b = budget_for_plan(plan)
    assert len(b.per_pulse) == 2 * 8 - 2
    assert b.epsilons[0] == 0.0
    assert np.all(b.epsilons <= 1e-12)
    assert b.total_P == pytest.approx(1 - 0.5 * np.prod(1 - b.mus) - 0.5 * np.prod(1 - b.mus - b.epsilons))
    assert b.to_dict()["pulses"][3]["n"] == 4


def test_budget_detuned_rabi_has_epsilon():
    plan = generate_protocol(SpinSystem(5, 1000.0), 0.5)
    b = budget_for_plan(plan)
    assert np.all(b.epsilons[1:] > 1e-4)


@pytest.mark.parametrize("L", [10, 50])
def test_estimate_decreases_with_delta_omega(L):
    ps = [estimate_error(SpinSystem(L, dw), k_2pik=5) for dw in (100.0, 300.0, 1000.0, 3000.0)]
    assert all(a > b for a, b in zip(ps, ps[1:]))
    # mu ~ 1 / delta_omega^2 at small P
    assert ps[2] / ps[3] == pytest.approx(9.0, rel=0.01)


def test_estimate_grows_with_length():
    ps = [estimate_error(SpinSystem(L, 500.0), k_2pik=2) for L in (5, 20, 80)]
    assert ps[0] < ps[1] < ps[2]


def test_distant_pair_probability():
    # (1/2)^2 / (10 * 100)^2
    assert nonresonant_probability(12, 2, 1.0, 100.0) == pytest.approx(2.5e-7)
    assert nonresonant_probability(12, 2, 1.0, 1e12) < 1e-24


def test_near_resonant_only_limit():
    for L in (3, 10, 40):
        n = 2 * L - 3
        for eps in (1e-4, 3e-5, 1e-7):
            p = total_error([(0.0, 0.0)] + [(eps, 0.0)] * n)
            assert p == pytest.approx(0.5 * (1 - (1 - eps) ** n), rel=1e-10)
            assert abs(p - n * eps / 2) <= n**2 * eps**2


def test_estimate_tracks_exact_engine():
    from isingqc.exact import run_protocol_exact
    from isingqc.protocol import evaluate_outcome

    sys = SpinSystem(10, 100.0)
    plan = generate_protocol(sys, k_2pik=5)
    mus = [mu_for_pulse(sys, s, p.omega_rabi) for s, p in zip(plan.spins, plan.pulses)]
    estimate = total_error([(0.0, mus[0])] + [(1e-6, mu) for mu in mus[1:]])
    final, _ = run_protocol_exact(sys, plan.pulses)
    exact = evaluate_outcome(final, plan).P
    assert 0.5 <= exact / estimate <= 2.0
