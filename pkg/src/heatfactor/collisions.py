"""Relation finding from dyadic-word collisions.

Random words in the generators a^(+-2^t) are evaluated to endpoints. Two
words with the same endpoint but different exponents give a loop
difference D with a^D = 1, so every collision hands us a multiple of the
order. Reduced multiples are folded into a running gcd until it stops
moving, and the stable gcd is stripped down to the true order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .diffusion import CayleyWalk, HeatState, build_walk, half_lazy_step
from .errors import ContractViolation, NoStabilization
from .ntheory import Modulus, factorize, mod_inv, order_from_multiple

DEFAULT_L = 2000
DEFAULT_MAX_SAMPLES = 120000
DEFAULT_STABLE_HITS = 8

Log = Callable[[str], None]


def _quiet(_: str) -> None:
    pass


@dataclass(frozen=True)
class DyadicWord:
    """Letters (sign, t) standing for a^(sign * 2^t)."""

    letters: tuple

    @property
    def L(self) -> int:
        return len(self.letters)

    def exponent(self) -> int:
        return sum(sign * (1 << t) for sign, t in self.letters)


@dataclass(frozen=True)
class CycleCertificate:
    """A nontrivial endpoint collision and its reduced loop difference."""

    a: int
    N: int
    E_prev: int
    E_new: int
    D: int
    D_min: int

    def __post_init__(self):
        if self.D == 0 or self.D != self.E_new - self.E_prev:
            raise ContractViolation("certificate needs D = E_new - E_prev != 0")
        if pow(self.a, abs(self.D), self.N) != 1 or pow(self.a, self.D_min, self.N) != 1:
            raise ContractViolation(f"certificate exponent does not annihilate {self.a}")


@dataclass(frozen=True)
class RelationAccumulator:
    g: int = 0
    collisions: int = 0
    unchanged_streak: int = 0
    stable_hits: int = DEFAULT_STABLE_HITS


@dataclass(frozen=True)
class CollisionStats:
    T: int
    s2: float
    expected_pairs: float


def sample_word(rng: np.random.Generator, L: int, M: int) -> DyadicWord:
    if L < 1:
        raise ValueError("word length must be >= 1")
    signs = rng.integers(0, 2, size=L)
    ts = rng.integers(0, M + 1, size=L)
    return DyadicWord(tuple((1 if s else -1, int(t)) for s, t in zip(signs, ts)))


def word_endpoint(a: int, N: "int | Modulus", w: DyadicWord, walk: Optional[CayleyWalk] = None) -> tuple[int, int]:
    """Endpoint a^E(w) by L multiplications with precomputed generators."""
    mod = Modulus.of(N)
    walk = walk or build_walk(mod, a)
    M, n = mod.M, mod.N
    x, E = 1, 0
    for sign, t in w.letters:
        if sign > 0:
            x = x * walk.gens[t] % n
            E += 1 << t
        else:
            x = x * walk.gens[M + 1 + t] % n
            E -= 1 << t
    return x, E


def halve_reduce(D: int, a: int, N: "int | Modulus") -> int:
    """Halve D while it stays even and a^(D/2) = 1."""
    n = int(N)
    D = abs(D)
    if D == 0 or pow(a, D, n) != 1:
        raise ContractViolation(f"{a}^{D} is not 1 mod {n}")
    while D % 2 == 0 and pow(a, D // 2, n) == 1:
        D //= 2
    return D


def observe(table: dict, E: int, endpoint: int, a: int, N: "int | Modulus") -> Optional[CycleCertificate]:
    """Record an endpoint; return a certificate on a nontrivial collision."""
    prev = table.get(endpoint)
    if prev is None:
        table[endpoint] = E
        return None
    if prev == E:
        return None
    D = E - prev
    n = int(N)
    return CycleCertificate(a % n, n, prev, E, D, halve_reduce(D, a, n))


def accumulate(acc: RelationAccumulator, D_min: int) -> RelationAccumulator:
    if D_min < 1:
        raise ValueError("D_min must be positive")
    g = D_min if acc.g == 0 else math.gcd(acc.g, D_min)
    streak = acc.unchanged_streak + 1 if g == acc.g else 0
    return replace(acc, g=g, collisions=acc.collisions + 1, unchanged_streak=streak)


def stabilized(acc: RelationAccumulator) -> bool:
    return acc.g > 0 and acc.unchanged_streak >= acc.stable_hits


def multiple_to_order(g: int, a: int, N: "int | Modulus", budget: int = 10**7) -> int:
    """True order of a from a multiple g (trial division to 1e6, then rho)."""
    n = int(N)
    if g < 1 or pow(a, g, n) != 1:
        raise ContractViolation(f"{a}^{g} is not 1 mod {n}")
    return order_from_multiple(a, g, n, factorize(g, budget=budget))


def order_to_factor(a: int, r: int, N: "int | Modulus") -> Optional[tuple[int, int]]:
    """(gcd(x-1, N), gcd(x+1, N)) for x = a^(r/2) when x is a nontrivial root of 1."""
    n = int(N)
    if pow(a, r, n) != 1:
        raise ContractViolation(f"{a}^{r} is not 1 mod {n}")
    if r % 2:
        return None
    x = pow(a, r // 2, n)
    if x in (1, n - 1):
        return None
    d1, d2 = math.gcd(x - 1, n), math.gcd(x + 1, n)
    assert 1 < d1 < n and 1 < d2 < n and n % d1 == 0 and n % d2 == 0
    return d1, d2


# -- the collision search ---------------------------------------------------


@dataclass
class AttemptResult:
    a: int
    N: int
    status: str = "running"  # "order", "factor" or "no_stabilization"
    certificates: list = field(default_factory=list)
    gcds: list = field(default_factory=list)
    acc: RelationAccumulator = field(default_factory=RelationAccumulator)
    samples: int = 0
    r: Optional[int] = None
    factors: Optional[tuple[int, int]] = None


def collision_line(k: int, D_min: int, tail: str) -> str:
    return f"[collision #{k:3d}]  D_min = {D_min}   {tail}"


def _exponent_chunks(rng: np.random.Generator, L: int, M: int, chunk: int):
    """Exponents of random length-L words.

    Only the letter counts matter for E, so each word is drawn as one
    multinomial over the 2(M+1) letters, which has exactly the law of L
    independent uniform letters.
    """
    d = 2 * (M + 1)
    probs = np.full(d, 1.0 / d)
    fits = L * 2**M < 2**62
    powers = np.array([1 << t for t in range(M + 1)], dtype=np.int64 if fits else object)
    while True:
        counts = rng.multinomial(L, probs, size=chunk)
        net = counts[:, : M + 1] - counts[:, M + 1 :]
        if fits:
            yield [int(e) for e in net @ powers]
        else:
            yield [sum(int(c) << t for t, c in enumerate(row) if c) for row in net]


def collision_attempt(
    a: int,
    N: "int | Modulus",
    rng: np.random.Generator,
    L: int = DEFAULT_L,
    max_samples: int = DEFAULT_MAX_SAMPLES,
    stable_hits: int = DEFAULT_STABLE_HITS,
    aggressive: bool = False,
    log: Log = _quiet,
    exact_words: bool = False,
    chunk: int = 2048,
) -> AttemptResult:
    """Sample words until the running gcd is stable or the budget runs out.

    With ``exact_words`` each word is materialized letter by letter and
    walked with ``word_endpoint``; otherwise exponents are drawn in bulk
    and endpoints taken as a^E directly (same law, far cheaper).
    """
    mod = Modulus.of(N)
    n, M = mod.N, mod.M
    a %= n
    a_inv = mod_inv(a, n)
    walk = build_walk(mod, a) if exact_words else None
    res = AttemptResult(a, n, acc=RelationAccumulator(stable_hits=stable_hits))
    table: dict = {}
    log(f"  sampling words of length L = {L}, max_samples = {max_samples}, stable_hits = {stable_hits}")

    def draws():
        if exact_words:
            while True:
                yield word_endpoint(a, mod, sample_word(rng, L, M), walk)[::-1]
        for block in _exponent_chunks(rng, L, M, chunk):
            for E in block:
                yield E, pow(a, E, n) if E >= 0 else pow(a_inv, -E, n)

    for E, endpoint in draws():
        if res.samples >= max_samples:
            break
        res.samples += 1
        cert = observe(table, E, endpoint, a, n)
        if cert is None:
            continue
        assert abs(cert.D) <= 2 * L * 2**M
        res.certificates.append(cert)
        res.acc = accumulate(res.acc, cert.D_min)
        res.gcds.append(res.acc.g)
        k = res.acc.collisions
        if aggressive:
            pair = order_to_factor(a, cert.D_min, n)
            if pair is not None:
                lo = min(pair)
                log(collision_line(k, cert.D_min, f"AGGRESSIVE ONE-COLLISION FACTOR: {lo} * {n // lo}"))
                res.status, res.factors = "factor", pair
                return res
        log(collision_line(k, cert.D_min, f"running_gcd = {res.acc.g}"))
        if stabilized(res.acc):
            log(f"  stabilized gcd = {res.acc.g}")
            res.r = multiple_to_order(res.acc.g, a, n)
            log(f"  reduced order r = {res.r}")
            res.status = "order"
            return res
    log("  no stabilized gcd from loops in this attempt (try another a).")
    res.status = "no_stabilization"
    return res


def collision_order(a: int, N: "int | Modulus", rng: np.random.Generator, **kwargs) -> int:
    """ord_N(a) from one collision attempt; raises NoStabilization on failure."""
    res = collision_attempt(a, N, rng, **kwargs)
    if res.r is None:
        raise NoStabilization(f"no stable gcd for a = {a} after {res.samples} samples")
    return res.r


# -- statistics -------------------------------------------------------------


def expected_collision_count(T: int, s2: float) -> float:
    return T * (T - 1) / 2 * s2


def collision_param(state: HeatState) -> float:
    """s2 = sum of squared masses."""
    return math.fsum(state.mass**2)


def restart_endpoints(walk: CayleyWalk, t: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """Endpoints of ``size`` independent t-step half-lazy walks from the identity."""
    n = walk.modulus.N
    gens = np.array(walk.gens, dtype=walk.dtype)
    x = np.ones(size, dtype=walk.dtype)
    for _ in range(t):
        move = rng.random(size) < 0.5
        idx = rng.integers(0, walk.degree, size=size)
        x = np.where(move, x * gens[idx] % n, x)
    return x


def colliding_pairs(sample) -> int:
    """Number of index pairs i < j with equal entries."""
    _, counts = np.unique(np.asarray(sample), return_counts=True)
    return int(np.sum(counts * (counts - 1) // 2))


@dataclass(frozen=True)
class BirthdayResult:
    T: int
    reps: int
    t: int
    mean_pairs: float
    expected_exact: float
    expected_uniform: float

    @property
    def ratio(self) -> float:
        return self.mean_pairs / self.expected_uniform


def birthday_experiment(
    N: "int | Modulus", b: int, t: int, T: int, reps: int, r: int, rng: np.random.Generator
) -> BirthdayResult:
    """Mean colliding-pair count of T restarts at time t, over ``reps`` runs."""
    walk = build_walk(N, b)
    ends = restart_endpoints(walk, t, T * reps, rng).reshape(reps, T)
    pairs = [colliding_pairs(row) for row in ends]
    state = HeatState.delta(walk)
    for _ in range(t):
        state = half_lazy_step(state, walk)
    return BirthdayResult(
        T,
        reps,
        t,
        float(np.mean(pairs)),
        expected_collision_count(T, collision_param(state)),
        expected_collision_count(T, 1.0 / r),
    )


def zeta_gcd_experiment(s: int, Q: int, trials: int, rng: np.random.Generator) -> float:
    """Fraction of uniform s-tuples on [1, Q] with gcd 1."""
    if s < 2 or Q < 2 or trials < 1:
        raise ValueError("need s >= 2, Q >= 2, trials >= 1")
    draws = rng.integers(1, Q + 1, size=(trials, s), dtype=np.int64)
    return float(np.mean(np.gcd.reduce(draws, axis=1) == 1))
