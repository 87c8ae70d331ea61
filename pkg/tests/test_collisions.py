import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heatfactor.collisions import (
    CycleCertificate,
    DyadicWord,
    RelationAccumulator,
    accumulate,
    birthday_experiment,
    collision_attempt,
    collision_line,
    collision_order,
    collision_param,
    colliding_pairs,
    expected_collision_count,
    halve_reduce,
    multiple_to_order,
    observe,
    order_to_factor,
    restart_endpoints,
    sample_word,
    stabilized,
    word_endpoint,
    zeta_gcd_experiment,
)
from heatfactor.diffusion import HeatState, build_walk, half_lazy_step, iterate_walk
from heatfactor.errors import ContractViolation, NoStabilization
from heatfactor.ntheory import Modulus, mod_pow, order_oracle

F5 = 2**32 + 1
A3 = 3945765912
A4, N4 = 7081686, 8219999

# D_min columns of the two logged runs
LOG3 = [314919552, 32543920512, 52336949376, 22975726464, 40839035520,
        25012652928, 4187760000, 3986747520, 18097823616, 9749105280]
GCD3 = [314919552] + [6700416] * 9
LOG4 = [12962750, 111206750, 119393750, 42981750, 3411250,
        3411250, 130309750, 68907250, 104384250, 55262250]
GCD4 = [12962750] + [682250] * 9


# -- words ------------------------------------------------------------------


def test_sample_word_single_letter():
    rng = np.random.default_rng(0)
    for _ in range(50):
        w = sample_word(rng, 1, 6)
        assert w.L == 1
        (sign, t), = w.letters
        assert sign in (1, -1) and 0 <= t <= 6
        assert w.exponent() in {s * 2**u for s in (1, -1) for u in range(7)}


def test_sample_word_seeded_fixture():
    w = sample_word(np.random.default_rng(42), 5, 3)
    assert w.letters == ((-1, 3), (1, 0), (1, 2), (-1, 0), (-1, 0))
    assert w.exponent() == -8 + 1 + 4 - 1 - 1
    assert sample_word(np.random.default_rng(42), 5, 3) == w


def test_long_word_exponent_bound():
    w = sample_word(np.random.default_rng(1), 2000, 33)
    assert abs(w.exponent()) <= 2000 * 2**33


def test_word_endpoint_small_cases():
    assert word_endpoint(3, 299, DyadicWord(())) == (1, 0)
    x, E = word_endpoint(3, 299, DyadicWord(((1, 3), (-1, 1))))
    assert E == 6 and x == pow(3, 6, 299)


def test_word_endpoint_matches_direct_power():
    rng = np.random.default_rng(5)
    for N, a in [(299, 3), (F5, A3), (N4, A4), (1099551473989, 750796458253)]:
        walk = build_walk(N, a)
        for _ in range(20):
            w = sample_word(rng, int(rng.integers(1, 300)), Modulus(N).M)
            x, E = word_endpoint(a, N, w, walk)
            assert E == w.exponent()
            assert x == mod_pow(a, E, N)


def test_congruent_exponents_share_endpoints():
    r = order_oracle(3, 299)
    rng = np.random.default_rng(9)
    seen = {}
    for _ in range(400):
        x, E = word_endpoint(3, 299, sample_word(rng, 12, 9))
        if E % r in seen:
            assert seen[E % r] == x
        seen[E % r] = x


# -- certificates -----------------------------------------------------------


def test_observe_fresh_and_trivial():
    table = {}
    assert observe(table, 5, 243, 3, 299) is None
    assert len(table) == 1
    assert observe(table, 5, 243, 3, 299) is None
    assert len(table) == 1


def test_observe_nontrivial():
    table = {}
    observe(table, 5, pow(3, 5, 299), 3, 299)
    cert = observe(table, 5 + 66, pow(3, 71, 299), 3, 299)
    assert cert.D == 66 and cert.E_prev == 5 and cert.E_new == 71
    assert cert.D_min == 33


def test_certificate_rejects_bad_relations():
    with pytest.raises(ContractViolation):
        CycleCertificate(3, 299, 0, 0, 0, 33)
    with pytest.raises(ContractViolation):
        CycleCertificate(3, 299, 0, 32, 32, 32)


def test_halve_reduce_cases():
    assert halve_reduce(33, 3, 299) == 33
    # 2 has order 4 mod 15: 8 -> 4, then 2^2 = 4 != 1 stops
    assert halve_reduce(8, 2, 15) == 4
    assert halve_reduce(-8, 2, 15) == 4
    with pytest.raises(ContractViolation):
        halve_reduce(7, 2, 15)


@pytest.mark.parametrize("a, N, column", [(A3, F5, LOG3), (A4, N4, LOG4)])
def test_logged_dmin_values_are_reduced(a, N, column):
    for D in column:
        assert pow(a, D, N) == 1
        assert D % 2 == 1 or pow(a, D // 2, N) != 1
        assert halve_reduce(D, a, N) == D
        assert halve_reduce(D * 8, a, N) == D


def test_accumulate_examples():
    assert math.gcd(314919552, 32543920512) == 6700416
    acc = accumulate(accumulate(RelationAccumulator(), 314919552), 32543920512)
    assert acc.g == 6700416 and acc.collisions == 2 and acc.unchanged_streak == 0
    acc = accumulate(accumulate(RelationAccumulator(), 12962750), 111206750)
    assert acc.g == 682250
    again = accumulate(acc, acc.g)
    assert again.g == acc.g and again.unchanged_streak == acc.unchanged_streak + 1


@pytest.mark.parametrize("column, gcds", [(LOG3, GCD3), (LOG4, GCD4)])
def test_logged_runs_replay(column, gcds):
    acc = RelationAccumulator(stable_hits=8)
    for k, (D, g) in enumerate(zip(column, gcds), start=1):
        acc = accumulate(acc, D)
        assert acc.g == g
        # stabilization happens exactly at the last logged collision
        assert stabilized(acc) == (k == 10)


def test_stabilized_threshold():
    assert not stabilized(RelationAccumulator())
    assert stabilized(RelationAccumulator(g=5, unchanged_streak=8, stable_hits=8))
    assert not stabilized(RelationAccumulator(g=5, unchanged_streak=7, stable_hits=8))


def test_multiple_to_order_examples():
    assert multiple_to_order(6700416, A3, F5) == 6700416
    assert multiple_to_order(682250, A4, N4) == 682250
    assert multiple_to_order(314919552, A3, F5) == 6700416
    assert multiple_to_order(123456, 1, 299) == 1
    with pytest.raises(ContractViolation):
        multiple_to_order(32, 3, 299)


def test_order_to_factor_examples():
    assert order_to_factor(A3, 6700416, F5) == (6700417, 641)
    assert set(order_to_factor(A4, 682250, N4)) == {251, 32749}
    assert order_to_factor(3, 33, 299) is None
    # 14 = -1 mod 15 gives only a trivial root
    assert order_to_factor(14, 2, 15) is None


def test_aggressive_pair_from_logged_collision():
    # single logged collision of the successful aggressive attempt
    assert order_to_factor(750796458253, 3966231680600, 1099551473989) == (1048589, 1048601)
    # the earlier single collision only reached the trivial root -1
    assert order_to_factor(45342608514, 33192646812150, 1099551473989) is None


# -- attempts ---------------------------------------------------------------


def test_collision_attempt_recovers_f5_order():
    lines = []
    res = collision_attempt(A3, F5, np.random.default_rng(0), log=lines.append)
    assert res.status == "order" and res.r == 6700416
    assert lines[0] == "  sampling words of length L = 2000, max_samples = 120000, stable_hits = 8"
    assert lines[-2:] == ["  stabilized gcd = 6700416", "  reduced order r = 6700416"]
    assert order_to_factor(A3, res.r, F5) == (6700417, 641)


def test_collision_certificates_are_sound():
    res = collision_attempt(A4, N4, np.random.default_rng(1))
    r = 682250
    assert res.r == r
    for cert in res.certificates:
        assert pow(A4, cert.D_min, N4) == 1 and cert.D_min % r == 0
        assert abs(cert.D) <= 2 * 2000 * 2 ** Modulus(N4).M
    gs = res.gcds
    assert all(g % r == 0 for g in gs)
    assert all(prev % cur == 0 for prev, cur in zip(gs, gs[1:]))


def test_exact_word_mode_agrees():
    res = collision_attempt(576, 1022117, np.random.default_rng(2), L=60, exact_words=True)
    assert res.r == 5313


def test_collision_attempt_is_deterministic():
    def run():
        lines = []
        collision_attempt(A4, N4, np.random.default_rng(99), log=lines.append)
        return lines

    assert run() == run()


def test_no_stabilization_path():
    lines = []
    res = collision_attempt(A3, F5, np.random.default_rng(0), max_samples=500, log=lines.append)
    assert res.status == "no_stabilization" and res.r is None and res.samples == 500
    assert lines[-1] == "  no stabilized gcd from loops in this attempt (try another a)."
    with pytest.raises(NoStabilization):
        collision_order(A3, F5, np.random.default_rng(0), max_samples=500)


def test_collision_line_format():
    assert collision_line(1, 314919552, "running_gcd = 314919552") == (
        "[collision #  1]  D_min = 314919552   running_gcd = 314919552"
    )
    assert collision_line(10, 9749105280, "running_gcd = 6700416").startswith("[collision # 10]")


# -- statistics -------------------------------------------------------------


def test_expected_collision_count():
    assert expected_collision_count(1, 0.3) == 0
    assert expected_collision_count(100, 0.001) == pytest.approx(4.95)
    assert expected_collision_count(40, 1 / 33) == pytest.approx(40 * 39 / 66)


def test_collision_param():
    walk = build_walk(299, 3)
    assert collision_param(HeatState.delta(walk)) == 1.0
    uniform = HeatState(np.arange(33), np.full(33, 1 / 33))
    assert collision_param(uniform) == pytest.approx(1 / 33)
    values = [collision_param(s) for s in iterate_walk(walk, 50)]
    assert 1 / 33 < values[50] <= 1
    assert all(b <= a + 1e-15 for a, b in zip(values, values[1:]))


def test_colliding_pairs():
    assert colliding_pairs([1, 2, 3]) == 0
    assert colliding_pairs([1, 1, 1, 2, 2]) == 3 + 1


def test_restart_endpoints_follow_heat_distribution():
    walk = build_walk(21, 2)
    ends = restart_endpoints(walk, 6, 200000, np.random.default_rng(3))
    state = HeatState.delta(walk)
    for _ in range(6):
        state = half_lazy_step(state, walk)
    values, counts = np.unique(ends, return_counts=True)
    freq = dict(zip(values.tolist(), counts / len(ends)))
    for x, p in state.as_dict().items():
        assert abs(freq.get(x, 0.0) - p) <= 5 * math.sqrt(p * (1 - p) / len(ends)) + 1e-12


def test_birthday_small():
    res = birthday_experiment(299, 3, 100, 20, 300, 33, np.random.default_rng(4))
    assert res.expected_uniform == pytest.approx(20 * 19 / 66)
    assert abs(res.mean_pairs / res.expected_exact - 1) < 0.15


def test_zeta_experiment_small():
    freq = zeta_gcd_experiment(2, 10**6, 20000, np.random.default_rng(0))
    p = 6 / math.pi**2
    assert abs(freq - p) <= 4 * math.sqrt(p * (1 - p) / 20000)
    with pytest.raises(ValueError):
        zeta_gcd_experiment(1, 10, 10, np.random.default_rng(0))


@settings(max_examples=60, deadline=None)
@given(st.integers(15, 10**7), st.integers(2, 10**7), st.integers(0, 2**32))
def test_certificate_divisibility_property(N, a, seed):
    N |= 1
    a %= N
    if math.gcd(a, N) != 1 or a <= 1:
        return
    r = order_oracle(a, N)
    rng = np.random.default_rng(seed)
    M = Modulus(N).M
    table = {}
    for _ in range(200):
        x, E = word_endpoint(a, N, sample_word(rng, 4, M))
        cert = observe(table, E, x, a, N)
        if cert is not None:
            assert pow(a, cert.D_min, N) == 1
            assert cert.D_min % r == 0
