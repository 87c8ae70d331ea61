"""Exception hierarchy shared by all heatfactor modules."""

from __future__ import annotations


class HeatFactorError(Exception):
    """Base class for every error raised by this package."""


class NonInvertible(HeatFactorError, ArithmeticError):
    """A residue shares a factor with the modulus.

    The common divisor is kept on the exception because a gcd > 1 is
    itself a factoring success.
    """

    def __init__(self, value: int, modulus: int, gcd: int):
        self.value = value
        self.modulus = modulus
        self.gcd = gcd
        super().__init__(f"{value} is not invertible mod {modulus} (gcd = {gcd})")


class OutOfOracleRange(HeatFactorError):
    """The brute-force order oracle refuses moduli above its range."""


class ContractViolation(HeatFactorError):
    """A precondition stated on an operation did not hold."""


class RoundingUnresolved(HeatFactorError):
    """1/p_n(e) sits too close to a half-integer to be rounded safely."""

    def __init__(self, inverse: float, n: int):
        self.inverse = inverse
        self.n = n
        super().__init__(f"1/p_n(e) = {inverse!r} at n = {n} is within the rounding guard")


class VerificationFailed(HeatFactorError):
    """A recovered order does not annihilate its base."""


class WitnessNotFound(HeatFactorError):
    """No doubling witness exists; this can only indicate a bug."""


class ResourceGuard(HeatFactorError):
    """A configured size guard (support size, table size) was exceeded."""


class FactorizationStall(HeatFactorError):
    """Factoring an order multiple ran past its effort budget."""


class NoStabilization(HeatFactorError):
    """A collision attempt exhausted its sample budget without a stable gcd."""


class AttemptsExhausted(HeatFactorError):
    """Every allowed factoring trial ended in a restart."""

    def __init__(self, attempts: int, report=None):
        self.attempts = attempts
        self.report = report
        super().__init__(f"no factor found after {attempts} attempts")
