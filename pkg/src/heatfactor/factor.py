"""Factoring by order finding, with a pluggable order source.

``algorithm1`` runs the trial loop: random base and gcd test, the doubling
multiset with its early-repetition shortcut, oddification, order recovery,
lifting, and the square-root attack. The order of the oddified base comes
from the diffusion simulator, from a brute-force oracle, or (as in the
logged collision runs) the collision search is run on the base itself.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from . import collisions
from .diffusion import recover_order
from .errors import AttemptsExhausted, ContractViolation
from .ntheory import Modulus, is_probable_prime, mod_inv, order_oracle, perfect_power

ORDER_SOURCES = ("diffusion", "collision", "oracle")

Log = Callable[[str], None]


def _quiet(_: str) -> None:
    pass


# -- pre-check --------------------------------------------------------------


@dataclass(frozen=True)
class PreCheck:
    kind: str  # "Composite", "Prime", "PrimePower", "Even", "TooSmall"
    base: Optional[int] = None
    k: Optional[int] = None

    def __str__(self) -> str:
        if self.kind == "PrimePower":
            return f"PrimePower({self.base},{self.k})"
        return self.kind


def pre_check(N: int) -> PreCheck:
    if N < 3:
        return PreCheck("TooSmall")
    if N % 2 == 0:
        return PreCheck("Even")
    if is_probable_prime(N):
        return PreCheck("Prime")
    pp = perfect_power(N)
    if pp is not None and is_probable_prime(pp[0]):
        return PreCheck("PrimePower", *pp)
    return PreCheck("Composite")


# -- number-theoretic steps -------------------------------------------------


def doubling_multiset(a: int, N: "int | Modulus") -> tuple[list[int], Optional[tuple[int, int, int]]]:
    """S(a) = [a^(2^t) for t = 0..M] + [a^(-2^t) for t = 0..M] and its first repetition.

    Entries are scanned in list order (all positive powers by increasing t,
    then the negative ones). The repetition is reported as (t, t2, sign)
    with t >= t2, meaning a^(2^t + sign * 2^t2) = 1.
    """
    mod = Modulus.of(N)
    n = mod.N
    pos, neg = [a % n], [mod_inv(a, n)]
    for _ in range(mod.M):
        pos.append(pos[-1] * pos[-1] % n)
        neg.append(neg[-1] * neg[-1] % n)
    S = pos + neg
    seen: dict[int, int] = {}
    for j, x in enumerate(S):
        if x in seen:
            i = seen[x]
            (si, ti), (sj, tj) = divmod(i, mod.M + 1), divmod(j, mod.M + 1)
            sign = -1 if si == sj else 1
            return S, (max(ti, tj), min(ti, tj), sign)
        seen[x] = j
    return S, None


def extract_sq(a: int, N: "int | Modulus", repetition: tuple[int, int, int]) -> tuple[int, int]:
    """Odd q and the least s >= 0 with a^(2^s q) = 1, from a repetition in S(a)."""
    n = int(N)
    t, t2, sign = repetition
    if t > t2:
        q, s = (1 << (t - t2)) + sign, t2
    elif sign == 1:
        # a^(2^t) = a^(-2^t): the exponent is 2^(t+1)
        q, s = 1, t + 1
    else:
        raise ContractViolation("a repetition needs t > t2 or opposite signs")
    if pow(a, q << s, n) != 1:
        raise ContractViolation(f"{a}^(2^{s} * {q}) is not 1 mod {n}")
    while s > 0 and pow(a, q << (s - 1), n) == 1:
        s -= 1
    return s, q


def oddify(a: int, N: "int | Modulus") -> int:
    mod = Modulus.of(N)
    return pow(a, 1 << mod.M, mod.N)


def lift_order(a: int, r_b: int, N: "int | Modulus") -> int:
    """Least 2^k r_b (k <= M) annihilating a."""
    mod = Modulus.of(N)
    for k in range(mod.M + 1):
        if pow(a, r_b << k, mod.N) == 1:
            return r_b << k
    raise ContractViolation(f"no k <= {mod.M} gives {a}^(2^k * {r_b}) = 1")


def sqrt_attack(a: int, exponent_half: int, N: "int | Modulus") -> Optional[int]:
    """A factor from x = a^exponent_half when x is a square root of 1 other than +-1."""
    n = int(N)
    x = pow(a, exponent_half, n)
    if x * x % n != 1:
        raise ContractViolation(f"{a}^(2*{exponent_half}) is not 1 mod {n}")
    if x in (1, n - 1):
        return None
    for d in (math.gcd(x - 1, n), math.gcd(x + 1, n)):
        if 1 < d < n:
            assert n % d == 0
            return d
    raise AssertionError(f"nontrivial root {x} gave no factor of {n}")


# -- success probability ----------------------------------------------------


def success_probability(m: int) -> float:
    """1 - (m+1)/2^m for m distinct prime factors."""
    if m < 2:
        raise ValueError("need m >= 2")
    return 1.0 - (m + 1) / 2**m


def monte_carlo_success(N: int, trials: int, rng: np.random.Generator) -> float:
    """Fraction of uniform units a with even order and a^(r/2) != -1."""
    hits = 0
    cache: dict[int, bool] = {}
    done = 0
    while done < trials:
        a = int(rng.integers(1, N))
        if math.gcd(a, N) != 1:
            continue
        done += 1
        if a not in cache:
            r = order_oracle(a, N)
            cache[a] = r % 2 == 0 and pow(a, r // 2, N) != N - 1
        hits += cache[a]
    return hits / trials


# -- Algorithm 1 ------------------------------------------------------------


@dataclass
class FactorConfig:
    order_source: str = "collision"
    max_attempts: int = 80
    seed: Optional[int] = None
    L: int = collisions.DEFAULT_L
    max_samples: int = collisions.DEFAULT_MAX_SAMPLES
    stable_hits: int = collisions.DEFAULT_STABLE_HITS
    aggressive: bool = False
    max_support: Optional[int] = 2_000_000
    workers: int = 1

    def __post_init__(self):
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        if self.order_source not in ORDER_SOURCES:
            raise ValueError(f"order_source must be one of {ORDER_SOURCES}")


@dataclass
class TrialOutcome:
    attempt: int
    a: int
    kind: str  # "factor" or "restart"
    d: Optional[int] = None
    reason: str = ""
    details: dict = field(default_factory=dict)
    collisions: list = field(default_factory=list)
    log: list = field(default_factory=list)


@dataclass
class FactorReport:
    N: int
    order_source: str
    outcomes: list
    factors: Optional[tuple[int, int]] = None
    elapsed_s: float = 0.0

    @property
    def attempts(self) -> int:
        return len(self.outcomes)

    @property
    def winner(self) -> Optional[TrialOutcome]:
        last = self.outcomes[-1] if self.outcomes else None
        return last if last is not None and last.kind == "factor" else None

    def to_json(self) -> dict:
        win = self.winner or (self.outcomes[-1] if self.outcomes else None)
        return {
            "N": self.N,
            "order_source": self.order_source,
            "attempt": win.attempt if win else None,
            "a": win.a if win else None,
            "collisions": win.collisions if win else [],
            "r": win.details.get("r_a") if win else None,
            "factors": list(self.factors) if self.factors else None,
            "elapsed_s": self.elapsed_s,
            "trials": [
                {k: v for k, v in asdict(o).items() if k != "log"} for o in self.outcomes
            ],
        }


def trial_rng(seed: Optional[int], attempt: int) -> np.random.Generator:
    """Independent stream per trial, so outcomes do not depend on worker count."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(attempt,)))


def uniform_base(rng: np.random.Generator, N: int) -> int:
    """Uniform a in [1, N-1] by rejection from the bit-length range."""
    bits = (N - 1).bit_length()
    nbytes = (bits + 7) // 8
    while True:
        a = int.from_bytes(rng.bytes(nbytes), "little") & ((1 << bits) - 1)
        if 1 <= a <= N - 1:
            return a


def run_trial(N: int, attempt: int, cfg: FactorConfig, a: Optional[int] = None) -> TrialOutcome:
    """One pass of the loop body for base ``a`` (drawn from the trial stream if None)."""
    rng = trial_rng(cfg.seed, attempt)
    if a is None:
        a = uniform_base(rng, N)
    out = TrialOutcome(attempt, a, "restart")
    log = out.log.append
    mod = Modulus(N)

    def found(d: int, how: str) -> TrialOutcome:
        assert 1 < d < N and N % d == 0
        out.kind, out.d, out.reason = "factor", d, how
        return out

    log(f"[attempt {attempt}] trying a = {a}")
    # (1) gcd shortcut
    d = math.gcd(a, N)
    if 1 < d < N:
        log(f"  gcd(a, N) = {d}")
        return found(d, "gcd")

    # (2)-(3) doubling multiset and early repetition
    _, rep = doubling_multiset(a, mod)
    if rep is not None:
        s, q = extract_sq(a, mod, rep)
        out.details.update(s=s, q=q)
        if s > 0:
            d = sqrt_attack(a, q << (s - 1), N)
            if d is not None:
                log(f"  early repetition in S(a): a^(2^{s} * {q}) = 1")
                return found(d, "early-repetition")

    # (4) oddify
    b = oddify(a, mod)

    # (5) order
    if cfg.order_source == "collision":
        res = collisions.collision_attempt(
            a, mod, rng, L=cfg.L, max_samples=cfg.max_samples, stable_hits=cfg.stable_hits,
            aggressive=cfg.aggressive, log=log,
        )
        out.collisions = [{"D": c.D, "D_min": c.D_min, "g": g} for c, g in zip(res.certificates, res.gcds)]
        if res.status == "factor":
            return found(min(res.factors), "aggressive")
        if res.r is None:
            out.reason = "no-stabilization"
            return out
        r_a = res.r
        r_b = r_a >> ((r_a & -r_a).bit_length() - 1)
        assert lift_order(a, r_b, mod) == r_a
    else:
        if cfg.order_source == "oracle":
            r_b = order_oracle(b, N)
        else:
            r_b = recover_order(mod, b, max_support=cfg.max_support)
        log(f"  oddified b = {b}, order r_b = {r_b} ({cfg.order_source})")
        # (6) lift
        r_a = lift_order(a, r_b, mod)
        log(f"  lifted order r_a = {r_a}")
    out.details.update(r_b=r_b, r_a=r_a)

    if r_a % 2 == 0:
        x = pow(a, r_a // 2, N)
        out.details["x"] = x
        d = sqrt_attack(a, r_a // 2, N)
        if d is not None:
            d1, d2 = math.gcd(x - 1, N), math.gcd(x + 1, N)
            log("")
            log(f"SUCCESS: N = {d1} * {d2}")
            return found(d, "order")
    out.reason = "odd-order" if r_a % 2 else "trivial-root"
    log(f"  order r = {r_a} gives no nontrivial square root (try another a).")
    return out


def _run_trial_star(args) -> TrialOutcome:
    return run_trial(*args)


def algorithm1(N: int, cfg: FactorConfig, log: Log = _quiet, base: Optional[int] = None) -> FactorReport:
    """Restart trials until one yields a factor or ``max_attempts`` run out.

    ``base`` forces the first trial's a. With ``workers > 1`` trials run
    in a process pool; the winner is still the lowest successful attempt
    number, so the report matches the sequential run exactly.
    """
    check = pre_check(N)
    if check.kind != "Composite":
        raise ContractViolation(f"algorithm1 needs an odd composite non-prime-power, got {check}")
    start = time.perf_counter()
    report = FactorReport(N, cfg.order_source, [])
    bases = {1: base} if base is not None else {}

    def finish(outcome: TrialOutcome) -> bool:
        report.outcomes.append(outcome)
        for line in outcome.log:
            log(line)
        if outcome.kind == "factor":
            d = outcome.d
            report.factors = (min(d, N // d), max(d, N // d))
            return True
        log("")
        return False

    if cfg.workers <= 1:
        for attempt in range(1, cfg.max_attempts + 1):
            if finish(run_trial(N, attempt, cfg, bases.get(attempt))):
                break
    else:
        with ProcessPoolExecutor(cfg.workers) as pool:
            attempt = 1
            while attempt <= cfg.max_attempts and report.factors is None:
                batch = range(attempt, min(attempt + cfg.workers, cfg.max_attempts + 1))
                results = pool.map(_run_trial_star, [(N, k, cfg, bases.get(k)) for k in batch])
                for outcome in results:
                    if finish(outcome):
                        break
                attempt = batch.stop
    report.elapsed_s = time.perf_counter() - start
    if report.factors is None:
        raise AttemptsExhausted(report.attempts, report)
    return report
