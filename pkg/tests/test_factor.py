import math

import numpy as np
import pytest

from heatfactor.errors import AttemptsExhausted, ContractViolation
from heatfactor.factor import (
    FactorConfig,
    algorithm1,
    doubling_multiset,
    extract_sq,
    lift_order,
    monte_carlo_success,
    oddify,
    pre_check,
    run_trial,
    sqrt_attack,
    success_probability,
    trial_rng,
    uniform_base,
)
from heatfactor.ntheory import Modulus, is_probable_prime, order_oracle, perfect_power

F5 = 2**32 + 1


@pytest.mark.parametrize(
    "N, kind",
    [(1, "TooSmall"), (2, "TooSmall"), (3, "Prime"), (100, "Even"), (1013, "Prime"),
     (121, "PrimePower(11,2)"), (3**7, "PrimePower(3,7)"), (15, "Composite"), (F5, "Composite")],
)
def test_pre_check(N, kind):
    assert str(pre_check(N)) == kind


def test_doubling_multiset_examples():
    S, rep = doubling_multiset(1, 299)
    assert rep == (1, 0, -1)
    assert doubling_multiset(4, 21)[1] == (2, 0, -1)
    assert doubling_multiset(2, 21)[1] == (3, 1, -1)
    S, rep = doubling_multiset(3, 299)
    assert len(S) == 2 * (Modulus(299).M + 1)
    # 3^32 = 3^-1 since 33 | 32 + 1
    assert rep == (5, 0, 1)
    assert extract_sq(3, 299, rep) == (0, 33)
    assert doubling_multiset(576, 1022117)[1] is None


def test_doubling_multiset_elements():
    S, _ = doubling_multiset(2, 21)
    M = Modulus(21).M
    expected = [pow(2, 1 << t, 21) for t in range(M + 1)] + [pow(2, -(1 << t), 21) for t in range(M + 1)]
    assert sorted(S) == sorted(expected)


def test_extract_sq_examples():
    assert extract_sq(4, 21, (2, 0, -1)) == (0, 3)
    assert extract_sq(2, 21, (3, 1, -1)) == (1, 3)
    with pytest.raises(ContractViolation):
        extract_sq(2, 21, (1, 1, 1))


def test_repetition_implies_annihilation():
    rng = np.random.default_rng(11)
    N = 1022117
    for _ in range(500):
        a = int(rng.integers(2, N))
        if math.gcd(a, N) != 1:
            continue
        _, rep = doubling_multiset(a, N)
        if rep is None:
            continue
        s, q = extract_sq(a, N, rep)
        assert q % 2 == 1
        assert pow(a, q << s, N) == 1
        assert s == 0 or pow(a, q << (s - 1), N) != 1


def test_oddify_and_lift():
    N = 1022117
    rng = np.random.default_rng(12)
    M = Modulus(N).M
    for _ in range(100):
        a = int(rng.integers(2, N))
        if math.gcd(a, N) != 1:
            continue
        b = oddify(a, N)
        assert b == pow(a, 2**M, N)
        r_a = order_oracle(a, N)
        r_b = order_oracle(b, N)
        assert r_b % 2 == 1
        assert r_a == r_b << ((r_a & -r_a).bit_length() - 1)
        assert lift_order(a, r_b, N) == r_a
    with pytest.raises(ContractViolation):
        lift_order(3, 11, 299)


def test_sqrt_attack_examples():
    assert sqrt_attack(4, 1, 15) == 3
    assert sqrt_attack(14, 1, 15) is None
    assert sqrt_attack(3945765912, 3350208, F5) in (641, 6700417)
    d = sqrt_attack(7081686, 341125, 8219999)
    assert d in (251, 32749)
    with pytest.raises(ContractViolation):
        sqrt_attack(2, 1, 15)


def test_success_probability_values():
    assert success_probability(2) == 0.25
    assert success_probability(3) == 0.5
    assert success_probability(4) == 1 - 5 / 16
    with pytest.raises(ValueError):
        success_probability(1)


def test_monte_carlo_success_small():
    # units mod 15 failing: a = 1 (odd order) and a = 14 (root -1)
    freq = monte_carlo_success(15, 40000, np.random.default_rng(0))
    assert abs(freq - 6 / 8) < 0.02


def test_uniform_base_range_and_spread():
    rng = trial_rng(3, 1)
    draws = [uniform_base(rng, 15) for _ in range(7000)]
    assert min(draws) == 1 and max(draws) == 14
    counts = np.bincount(draws, minlength=15)[1:]
    assert counts.min() > 400


def test_trial_rng_is_per_attempt():
    a = trial_rng(5, 1).integers(0, 2**62)
    b = trial_rng(5, 2).integers(0, 2**62)
    assert a != b
    assert trial_rng(5, 1).integers(0, 2**62) == a


@pytest.mark.parametrize("source", ["oracle", "diffusion", "collision"])
def test_every_base_mod_15(source):
    cfg = FactorConfig(order_source=source, seed=0)
    failing = set()
    for a in range(1, 15):
        out = run_trial(15, 1, cfg, a)
        if out.kind == "factor":
            assert out.d in (3, 5)
        else:
            failing.add(a)
    assert failing == {1, 14}


def test_run_trial_gcd_shortcut():
    out = run_trial(299, 1, FactorConfig(order_source="oracle"), 26)
    assert out.kind == "factor" and out.reason == "gcd" and out.d == 13


def test_run_trial_odd_order_restarts():
    out = run_trial(299, 1, FactorConfig(order_source="oracle"), 3)
    assert out.kind == "restart" and out.reason == "odd-order"
    assert out.details["r_a"] == 33


def test_forced_base_f5_collision():
    out = run_trial(F5, 1, FactorConfig(seed=0), 3945765912)
    assert out.kind == "factor" and out.details["r_a"] == 6700416
    assert out.log[-1] == "SUCCESS: N = 6700417 * 641"


def test_algorithm1_examples():
    rep = algorithm1(8219999, FactorConfig(seed=0))
    assert rep.factors == (251, 32749)
    rep = algorithm1(1022117, FactorConfig(order_source="diffusion", seed=0))
    assert rep.factors == (1009, 1013)


def test_algorithm1_rejects_bad_input():
    for N in (1013, 121, 100):
        with pytest.raises(ContractViolation):
            algorithm1(N, FactorConfig(order_source="oracle"))


def test_attempts_exhausted():
    # a single attempt with too few samples cannot stabilize
    cfg = FactorConfig(seed=0, max_attempts=2, max_samples=50)
    with pytest.raises(AttemptsExhausted) as exc:
        algorithm1(F5, cfg)
    assert exc.value.attempts == 2
    assert all(o.kind == "restart" for o in exc.value.report.outcomes)


def test_workers_do_not_change_result():
    one = algorithm1(8219999, FactorConfig(seed=3, workers=1))
    two = algorithm1(8219999, FactorConfig(seed=3, workers=2))
    assert one.factors == two.factors
    assert [(o.attempt, o.a, o.kind) for o in one.outcomes] == [(o.attempt, o.a, o.kind) for o in two.outcomes]


def test_average_attempts_close_to_success_rate():
    # N = 299 has two prime factors: per-trial success about 1/4 at worst
    attempts = [algorithm1(299, FactorConfig(order_source="oracle", seed=s)).attempts for s in range(300)]
    assert np.mean(attempts) < 1 / success_probability(2)


def _odd_composites(limit):
    for N in range(9, limit + 1, 2):
        if not is_probable_prime(N) and perfect_power(N) is None:
            yield N


def test_exhaustive_small_moduli():
    for N in _odd_composites(10**4):
        rep = algorithm1(N, FactorConfig(order_source="oracle", seed=N, max_attempts=200))
        p, q = rep.factors
        assert 1 < p <= q < N and p * q == N
