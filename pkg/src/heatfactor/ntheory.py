"""Modular arithmetic, primality and perfect-power tests, and order oracles.

Everything here is a pure function of its arguments. The factoring helpers
are only meant for data the pipeline produces (order multiples, phi(N) at
desk scale), never for the composite being attacked.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Optional

import numpy as np

from .errors import ContractViolation, FactorizationStall, NonInvertible, OutOfOracleRange

# Largest modulus the order oracle accepts.
ORACLE_MAX_N = 2**48

# Deterministic Miller-Rabin bases, correct for every n < 3.3 * 10**24.
_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)
_MR_RANDOM_WITNESSES = 64


@dataclass(frozen=True)
class Modulus:
    """An odd modulus N >= 3 together with its dyadic bound M."""

    N: int

    def __post_init__(self):
        if not isinstance(self.N, int) or self.N < 3:
            raise ValueError(f"modulus must be an integer >= 3, got {self.N!r}")

    @property
    def bit_len(self) -> int:
        return self.N.bit_length()

    @property
    def M(self) -> int:
        # floor(log2 N) + 1 is exactly the bit length
        return self.N.bit_length()

    @classmethod
    def of(cls, value: "int | Modulus") -> "Modulus":
        return value if isinstance(value, Modulus) else cls(int(value))

    def __int__(self) -> int:
        return self.N


def _as_int(N: "int | Modulus") -> int:
    return N.N if isinstance(N, Modulus) else int(N)


def dyadic_bound(N: "int | Modulus") -> int:
    """Return M = floor(log2 N) + 1."""
    return _as_int(N).bit_length()


@dataclass(frozen=True)
class OracleFactorization:
    """Complete factorization of ``source_N`` as sorted (prime, exponent) pairs."""

    factors: tuple
    source_N: int

    def __post_init__(self):
        prod = 1
        last = 1
        for p, e in self.factors:
            if p <= last or e < 1 or not is_probable_prime(p):
                raise ContractViolation(f"bad factor entry ({p}, {e})")
            last = p
            prod *= p**e
        if prod != self.source_N:
            raise ContractViolation(f"factors multiply to {prod}, not {self.source_N}")

    @classmethod
    def of(cls, n: int, budget: int = 10**7) -> "OracleFactorization":
        return cls(tuple(sorted(factorize(n, budget=budget).items())), n)

    @property
    def primes(self) -> list[int]:
        return [p for p, _ in self.factors]

    @property
    def m(self) -> int:
        """Number of distinct prime factors."""
        return len(self.factors)

    def phi(self) -> int:
        out = 1
        for p, e in self.factors:
            out *= (p - 1) * p ** (e - 1)
        return out

    def carmichael(self) -> int:
        """Exponent of the unit group (Carmichael lambda)."""
        out = 1
        for p, e in self.factors:
            if p == 2:
                lam = 1 if e == 1 else 2 if e == 2 else 2 ** (e - 2)
            else:
                lam = (p - 1) * p ** (e - 1)
            out = out * lam // math.gcd(out, lam)
        return out


def mod_inv(a: int, N: "int | Modulus") -> int:
    """Inverse of ``a`` modulo ``N``; raises NonInvertible carrying the gcd."""
    n = _as_int(N)
    a %= n
    g = math.gcd(a, n)
    if g != 1:
        raise NonInvertible(a, n, g)
    return pow(a, -1, n)


def mod_pow(base: int, exp: int, N: "int | Modulus") -> int:
    """base**exp mod N for any signed exponent.

    A negative exponent inverts the base once and raises the inverse to |exp|.
    """
    n = _as_int(N)
    if exp < 0:
        return pow(mod_inv(base, n), -exp, n)
    return pow(base % n, exp, n)


def _miller_rabin(n: int, d: int, s: int, a: int) -> bool:
    x = pow(a, d, n)
    if x == 1 or x == n - 1:
        return True
    for _ in range(s - 1):
        x = x * x % n
        if x == n - 1:
            return True
    return False


def is_probable_prime(n: int) -> bool:
    """Miller-Rabin with a fixed base set; 64 extra witnesses above 2**64.

    Deterministic (and exact) below 2**64. The extra witnesses are drawn
    from an RNG seeded by ``n`` so the answer is reproducible.
    """
    if n < 2:
        return False
    for p in _MR_BASES:
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    if not all(_miller_rabin(n, d, s, a) for a in _MR_BASES):
        return False
    if n < 2**64:
        return True
    rng = random.Random(n)
    return all(_miller_rabin(n, d, s, rng.randrange(2, n - 1)) for _ in range(_MR_RANDOM_WITNESSES))


def iroot(n: int, k: int) -> int:
    """Integer floor of the k-th root of n >= 0."""
    if n < 0 or k < 1:
        raise ValueError("iroot needs n >= 0 and k >= 1")
    if n < 2 or k == 1:
        return n
    if k == 2:
        return math.isqrt(n)
    x = 1 << -(-n.bit_length() // k)  # >= true root
    while True:
        y = ((k - 1) * x + n // x ** (k - 1)) // k
        if y >= x:
            return x
        x = y


def perfect_power(n: int) -> Optional[tuple[int, int]]:
    """Return (base, k) with base**k == n, k >= 2 maximal, or None."""
    if n < 2:
        raise ValueError("perfect_power needs n >= 2")
    for k in range(n.bit_length(), 1, -1):
        root = iroot(n, k)
        if root > 1 and root**k == n:
            return root, k
    return None


@lru_cache(maxsize=None)
def small_primes(limit: int) -> tuple[int, ...]:
    """Primes below ``limit`` by a numpy sieve."""
    if limit < 3:
        return ()
    sieve = np.ones(limit, dtype=bool)
    sieve[:2] = False
    sieve[4::2] = False
    for p in range(3, math.isqrt(limit - 1) + 1, 2):
        if sieve[p]:
            sieve[p * p :: 2 * p] = False
    return tuple(int(p) for p in np.flatnonzero(sieve))


def _brent(n: int, seed: int, budget: int) -> tuple[int, int]:
    """One Pollard-Brent run. Returns (divisor or n on failure, iterations used)."""
    rng = random.Random(seed)
    y, c, m = rng.randrange(1, n), rng.randrange(1, n), 128
    g = r = q = 1
    used = 0
    x = ys = y
    while g == 1:
        x = y
        for _ in range(r):
            y = (y * y + c) % n
        k = 0
        while k < r and g == 1:
            ys = y
            for _ in range(min(m, r - k)):
                y = (y * y + c) % n
                q = q * abs(x - y) % n
            g = math.gcd(q, n)
            k += m
        used += r
        r *= 2
        if used > budget:
            return n, used
    if g == n:
        while True:
            ys = (ys * ys + c) % n
            g = math.gcd(abs(x - ys), n)
            if g > 1:
                break
    return g, used


def _split(n: int, budget: int) -> int:
    seed = 0
    spent = 0
    while spent <= budget:
        d, used = _brent(n, seed, budget - spent)
        spent += used
        if 1 < d < n:
            return d
        seed += 1
    raise FactorizationStall(f"Pollard rho exceeded {budget} iterations on {n}")


def factorize(n: int, trial_limit: int = 10**6, budget: int = 10**7) -> dict[int, int]:
    """Factor ``n`` by trial division below ``trial_limit`` then Pollard-Brent rho.

    ``budget`` caps the total number of rho iterations; FactorizationStall
    is raised past it.
    """
    if n < 1:
        raise ValueError("factorize needs n >= 1")
    out: dict[int, int] = {}
    for p in small_primes(trial_limit):
        if p * p > n:
            break
        while n % p == 0:
            out[p] = out.get(p, 0) + 1
            n //= p
    stack = [n] if n > 1 else []
    while stack:
        m = stack.pop()
        if is_probable_prime(m):
            out[m] = out.get(m, 0) + 1
            continue
        pp = perfect_power(m)
        if pp is not None:
            stack.extend([pp[0]] * pp[1])
            continue
        d = _split(m, budget)
        stack.extend((d, m // d))
    return dict(sorted(out.items()))


def order_from_multiple(a: int, multiple: int, N: "int | Modulus", primes: Optional[Iterable[int]] = None) -> int:
    """Strip prime factors from a known multiple of ord_N(a)."""
    n = _as_int(N)
    if multiple < 1 or pow(a, multiple, n) != 1 % n:
        raise ContractViolation(f"{a}^{multiple} is not 1 mod {n}")
    if primes is None:
        primes = factorize(multiple)
    r = multiple
    for p in primes:
        while r % p == 0 and pow(a, r // p, n) == 1 % n:
            r //= p
    return r


@lru_cache(maxsize=4096)
def _phi_primes(n: int) -> tuple[int, tuple[int, ...]]:
    fac = OracleFactorization.of(n)
    lam = fac.carmichael()
    return lam, tuple(factorize(lam))


def order_oracle(a: int, N: "int | Modulus") -> int:
    """ord_N(a) by factoring the group exponent and stripping primes.

    Independent of every walk-based path; refuses N above ORACLE_MAX_N.
    """
    n = _as_int(N)
    if n > ORACLE_MAX_N:
        raise OutOfOracleRange(f"N = {n} exceeds the oracle range 2**48")
    a %= n
    g = math.gcd(a, n)
    if g != 1:
        raise NonInvertible(a, n, g)
    lam, primes = _phi_primes(n)
    return order_from_multiple(a, lam, n, primes)
