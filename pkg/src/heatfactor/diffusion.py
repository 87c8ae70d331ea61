"""Half-lazy heat diffusion on the dyadic Cayley graph of <b> in (Z/NZ)*.

Two backends compute the identity readout p_n(e):

* the group-coordinate walk (``half_lazy_step``), which keeps mass on
  residues mod N and only ever touches the part of the graph the walk has
  reached; this is the one the factoring pipeline uses, since r is unknown;
* the closed-form spectral sum over the characters of Z/rZ
  (``spectral_heat_identity``), usable once r is known. Tests use it to
  cross-check the walk.

The module also carries the RC-network discretization of a continuous-time
heat flow on a small dense graph Laplacian.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import IO, Iterator, Optional

import numpy as np

from .errors import (
    ContractViolation,
    ResourceGuard,
    RoundingUnresolved,
    VerificationFailed,
    WitnessNotFound,
)
from .ntheory import Modulus, mod_inv

ROUND_GUARD = 1e-6
MASS_TOLERANCE = 1e-12

# Residues multiply in int64 only while N**2 fits.
_INT64_SAFE_N = math.isqrt(2**63 - 1)

SERIES_COLUMNS = ("n", "p_e", "inv_p_e", "rounded")


@dataclass(frozen=True, eq=False)
class CayleyWalk:
    """Generators b^(2^t), t = 0..M, followed by b^(-2^t), t = 0..M.

    Duplicates are kept: the edge weight between x and y counts how many
    generator slots map x to y.
    """

    modulus: Modulus
    b: int
    gens: tuple
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def degree(self) -> int:
        return len(self.gens)

    @property
    def M(self) -> int:
        return self.modulus.M

    @property
    def dtype(self):
        return np.int64 if self.modulus.N <= _INT64_SAFE_N else object

    def _times(self, residues: np.ndarray, g: int) -> np.ndarray:
        return residues * g % self.modulus.N

    def neighbourhood(self, support: np.ndarray):
        """Grow ``support`` by one generator step.

        Returns ``(new_support, self_idx, gen_idx)`` where ``gen_idx[j]``
        holds, for each x in ``new_support``, the position of x * gens[j] in
        the old support (``len(support)`` when absent). Once the support is
        closed under the generators the index tables are cached and the same
        array object is handed back.
        """
        cached = self._cache.get("closed")
        if cached is not None and cached[0] is support:
            return cached
        grown = np.unique(np.concatenate([support] + [self._times(support, g) for g in self.gens]))
        closed = len(grown) == len(support)
        if closed:
            grown = support
        sentinel = len(support)

        def locate(values):
            pos = np.searchsorted(support, values)
            pos_c = np.minimum(pos, sentinel - 1)
            hit = (pos < sentinel) & (support[pos_c] == values)
            return np.where(hit, pos, sentinel).astype(np.intp)

        self_idx = locate(grown)
        gen_idx = np.stack([locate(self._times(grown, g)) for g in self.gens])
        out = (grown, self_idx, gen_idx)
        if closed:
            self._cache["closed"] = out
        return out


def build_walk(N: "int | Modulus", b: int) -> CayleyWalk:
    """Dyadic generator multiset from one inversion and 2M squarings."""
    mod = Modulus.of(N)
    n = mod.N
    b %= n
    b_inv = mod_inv(b, n)
    pos, neg = [b], [b_inv]
    for _ in range(mod.M):
        pos.append(pos[-1] * pos[-1] % n)
        neg.append(neg[-1] * neg[-1] % n)
    return CayleyWalk(mod, b, tuple(pos + neg))


@dataclass(frozen=True)
class HeatState:
    """Mass distribution on residues, stored as a sorted support plus weights."""

    support: np.ndarray
    mass: np.ndarray
    n: int = 0

    @classmethod
    def delta(cls, walk: CayleyWalk) -> "HeatState":
        return cls(np.array([1], dtype=walk.dtype), np.array([1.0]), 0)

    def __getitem__(self, x: int) -> float:
        i = int(np.searchsorted(self.support, x))
        if i < len(self.support) and self.support[i] == x:
            return float(self.mass[i])
        return 0.0

    def __len__(self) -> int:
        return len(self.support)

    @property
    def p_e(self) -> float:
        return self[1]

    def total(self) -> float:
        return math.fsum(self.mass)

    def as_dict(self) -> dict[int, float]:
        return {int(x): float(m) for x, m in zip(self.support, self.mass)}

    def check(self, walk: CayleyWalk, members: Optional[set] = None) -> None:
        """Assert the state invariants; ``members`` optionally lists <b>."""
        if abs(self.total() - 1.0) > MASS_TOLERANCE:
            raise ContractViolation(f"mass drifted to {self.total()!r}")
        if np.any(self.mass < 0):
            raise ContractViolation("negative mass")
        n = walk.modulus.N
        if walk.dtype is object:
            units = all(math.gcd(int(x), n) == 1 for x in self.support)
        else:
            units = bool(np.all(np.gcd(self.support, n) == 1))
        if not units:
            raise ContractViolation(f"support holds a non-unit mod {n}")
        if members is not None and not members.issuperset(self.support.tolist()):
            raise ContractViolation(f"support leaves <{walk.b}>")


def half_lazy_step(state: HeatState, walk: CayleyWalk, max_support: Optional[int] = None) -> HeatState:
    """One application of W = (I + P)/2.

    new(x) = mass(x)/2 + (1/(2d)) * sum over generator slots g of mass(x*g).
    Contributions are added in generator order over a sorted support, so
    the result does not depend on scheduling.
    """
    support, self_idx, gen_idx = walk.neighbourhood(state.support)
    if max_support is not None and len(support) > max_support:
        raise ResourceGuard(f"walk support reached {len(support)} > {max_support} residues")
    padded = np.append(state.mass, 0.0)
    pulled = np.zeros(len(support))
    for row in gen_idx:
        pulled += padded[row]
    new = 0.5 * padded[self_idx] + (0.5 / walk.degree) * pulled
    return HeatState(support, new, state.n + 1)


def iterate_walk(walk: CayleyWalk, steps: int, max_support: Optional[int] = None) -> Iterator[HeatState]:
    """Yield the states p_0 .. p_steps starting from the identity delta."""
    state = HeatState.delta(walk)
    yield state
    for _ in range(steps):
        state = half_lazy_step(state, walk, max_support)
        yield state


def heat_series(walk: CayleyWalk, steps: int, max_support: Optional[int] = None) -> np.ndarray:
    """p_n(e) for n = 0..steps from the group-coordinate walk."""
    return np.array([s.p_e for s in iterate_walk(walk, steps, max_support)])


def required_steps(N: "int | Modulus") -> int:
    """Smallest integer n with n >= 4(M+1)(log2 N + 2).

    The float estimate is corrected with the exact integer test
    2**(n - 8(M+1)) >= N**(4(M+1)).
    """
    mod = Modulus.of(N)
    n_val, c = mod.N, 4 * (mod.M + 1)

    def enough(n: int) -> bool:
        e = n - 2 * c
        return e >= 0 and (1 << e) >= n_val**c

    n = math.ceil(c * (math.log2(n_val) + 2))
    if mod.bit_len > 4096:
        return n + 1
    while not enough(n):
        n += 1
    while n > 1 and enough(n - 1):
        n -= 1
    return n


@dataclass(frozen=True)
class OrderReadout:
    r: int
    n: int
    p_e: float
    inverse: float


def read_order(p_e: float, n: int = -1, guard: float = ROUND_GUARD) -> int:
    """round(1/p_e), refusing near-ties."""
    inverse = 1.0 / p_e
    nearest = math.floor(inverse + 0.5)
    if abs(inverse - nearest) >= 0.5 - guard:
        raise RoundingUnresolved(inverse, n)
    return nearest


def recover_order_readout(
    N: "int | Modulus", b: int, n: Optional[int] = None, max_support: Optional[int] = None
) -> OrderReadout:
    mod = Modulus.of(N)
    walk = build_walk(mod, b)
    steps = required_steps(mod) if n is None else n
    state = HeatState.delta(walk)
    for _ in range(steps):
        state = half_lazy_step(state, walk, max_support)
    p_e = state.p_e
    r = read_order(p_e, steps)
    if pow(walk.b, r, mod.N) != 1:
        raise VerificationFailed(f"{walk.b}^{r} != 1 mod {mod.N}")
    return OrderReadout(r, steps, p_e, 1.0 / p_e)


def recover_order(N: "int | Modulus", b: int, n: Optional[int] = None, max_support: Optional[int] = None) -> int:
    """ord_N(b) as round(1/p_n(e)) after n half-lazy steps (default: required_steps)."""
    return recover_order_readout(N, b, n, max_support).r


def stable_from(rounded: np.ndarray, r: int) -> Optional[int]:
    """First index from which every entry of ``rounded`` equals ``r``."""
    bad = np.flatnonzero(np.asarray(rounded) != r)
    if len(bad) == 0:
        return 0
    first = int(bad[-1]) + 1
    return first if first < len(rounded) else None


# -- exponent coordinates ---------------------------------------------------


@dataclass(frozen=True, eq=False)
class SpectralModel:
    """Eigenvalues of W on the circulant Cayley graph of Z/rZ."""

    r: int
    M: int
    mu: np.ndarray
    lam: np.ndarray

    @classmethod
    def build(cls, r: int, M: int) -> "SpectralModel":
        if r < 1 or M < 0:
            raise ValueError("need r >= 1 and M >= 0")
        k = np.arange(r, dtype=np.int64)
        acc = np.zeros(r)
        step = 1 % r
        for _ in range(M + 1):
            # exact residue k*2^t mod r before taking the cosine
            acc += np.cos(2 * np.pi * ((k * step) % r) / r)
            step = step * 2 % r
        mu = acc / (M + 1)
        lam = (1 + mu) / 2
        lam[0] = 1.0
        return cls(r, M, mu, np.clip(lam, 0.0, 1.0))

    def heat_identity(self, n: int) -> float:
        """(1/r) * sum_k lam_k**n, summed with math.fsum."""
        if n == 0:
            return 1.0
        return math.fsum(np.power(self.lam, n)) / self.r

    def gap_max(self) -> float:
        return float(np.max(self.lam[1:])) if self.r > 1 else 0.0


@lru_cache(maxsize=256)
def spectral_model(r: int, M: int) -> SpectralModel:
    return SpectralModel.build(r, M)


def spectral_heat_identity(r: int, M: int, n: int) -> float:
    return spectral_model(r, M).heat_identity(n)


def exponent_walk(r: int, M: int, steps: int) -> Iterator[np.ndarray]:
    """Dense half-lazy walk on Z/rZ with steps +-2^t; yields p_0 .. p_steps."""
    p = np.zeros(r)
    p[0] = 1.0
    shifts = [pow(2, t, r) for t in range(M + 1)]
    d = 2 * (M + 1)
    yield p
    for _ in range(steps):
        pulled = np.zeros(r)
        for s in shifts:
            pulled += np.roll(p, -s)
            pulled += np.roll(p, s)
        p = 0.5 * p + (0.5 / d) * pulled
        yield p


def doubling_witness(k: int, r: int, M: int) -> int:
    """Least t <= M with k*2^t mod r in [r/4, 3r/4]."""
    if not 1 <= k <= r - 1 or 2**M <= r:
        raise ContractViolation(f"doubling_witness needs 1 <= k < r < 2^M, got k={k}, r={r}, M={M}")
    a = k % r
    for t in range(M + 1):
        if r <= 4 * a <= 3 * r:
            return t
        a = 2 * a % r
    raise WitnessNotFound(f"no witness for k={k}, r={r}, M={M}")


def doubling_witness_table(r: int, M: int) -> np.ndarray:
    """Vectorized doubling_witness for every k in 1..r-1 (-1 marks a miss)."""
    a = np.arange(1, r, dtype=np.int64)
    out = np.full(r - 1, -1, dtype=np.int64)
    for t in range(M + 1):
        hit = (out < 0) & (4 * a >= r) & (4 * a <= 3 * r)
        out[hit] = t
        a = 2 * a % r
    return out


def mixing_gap(r: int, M: int) -> float:
    """Largest nontrivial eigenvalue of W on Z/rZ."""
    if r < 2 or 2**M <= r:
        raise ContractViolation(f"mixing_gap needs 2 <= r < 2^M, got r={r}, M={M}")
    return spectral_model(r, M).gap_max()


# -- RC network -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RCNetwork:
    """Capacitors C to ground at every node, conductances between nodes."""

    laplacian: np.ndarray
    capacitance: float

    def __post_init__(self):
        L = np.asarray(self.laplacian, dtype=float)
        if L.ndim != 2 or L.shape[0] != L.shape[1]:
            raise ValueError("laplacian must be square")
        scale = max(1.0, float(np.max(np.abs(L))))
        if not np.allclose(L, L.T, atol=1e-12 * scale):
            raise ValueError("laplacian must be symmetric")
        if np.any(np.abs(L.sum(axis=1)) > 1e-12 * scale):
            raise ValueError("laplacian rows must sum to zero")
        if np.any(L - np.diag(np.diag(L)) > 0):
            raise ValueError("laplacian off-diagonals must be <= 0")
        if self.capacitance <= 0:
            raise ValueError("capacitance must be positive")
        object.__setattr__(self, "laplacian", L)

    @classmethod
    def from_resistors(cls, size: int, resistors: dict, capacitance: float) -> "RCNetwork":
        """Build from {(i, j): ohms}."""
        L = np.zeros((size, size))
        for (i, j), ohms in resistors.items():
            g = 1.0 / ohms
            L[i, j] -= g
            L[j, i] -= g
            L[i, i] += g
            L[j, j] += g
        return cls(L, capacitance)


def triangle_network(ohms: float = 1e3, farads: float = 1e-6) -> RCNetwork:
    return RCNetwork.from_resistors(3, {(0, 1): ohms, (1, 2): ohms, (0, 2): ohms}, farads)


def rc_discretize(net: RCNetwork, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """exp(-(dt/C) L) by eigendecomposition, and its first-order truncation."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    gamma = dt / net.capacitance
    w, V = np.linalg.eigh(net.laplacian)
    exact = (V * np.exp(-gamma * w)) @ V.T
    first = np.eye(len(w)) - gamma * net.laplacian
    return exact, first


def discretization_error(net: RCNetwork, dt: float) -> float:
    exact, first = rc_discretize(net, dt)
    return float(np.linalg.norm(exact - first, 2))


def loglog_slope(x, y) -> float:
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


# -- CSV series -------------------------------------------------------------


def series_rows(p_e: np.ndarray) -> Iterator[tuple]:
    for n, p in enumerate(p_e):
        inv = 1.0 / float(p)
        yield n, float(p), inv, math.floor(inv + 0.5)


def write_series_csv(fh: IO[str], p_e: np.ndarray) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(SERIES_COLUMNS)
    for n, p, inv, rounded in series_rows(p_e):
        writer.writerow((n, repr(p), repr(inv), rounded))


def read_series_csv(fh: IO[str]) -> list[tuple[int, float, float, int]]:
    reader = csv.DictReader(fh)
    if tuple(reader.fieldnames or ()) != SERIES_COLUMNS:
        raise ValueError(f"unexpected columns {reader.fieldnames}")
    return [(int(row["n"]), float(row["p_e"]), float(row["inv_p_e"]), int(row["rounded"])) for row in reader]
