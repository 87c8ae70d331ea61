"""Diffusion-assisted factoring: heat-kernel order finding, collision relations, and the factoring loop."""

from .collisions import collision_attempt, multiple_to_order, order_to_factor
from .diffusion import build_walk, recover_order, required_steps, spectral_heat_identity
from .factor import FactorConfig, algorithm1, pre_check
from .ntheory import Modulus, is_probable_prime, mod_inv, mod_pow, order_oracle, perfect_power

__version__ = "0.1.0"

__all__ = [
    "FactorConfig",
    "Modulus",
    "algorithm1",
    "build_walk",
    "collision_attempt",
    "is_probable_prime",
    "mod_inv",
    "mod_pow",
    "multiple_to_order",
    "order_oracle",
    "order_to_factor",
    "perfect_power",
    "pre_check",
    "recover_order",
    "required_steps",
    "spectral_heat_identity",
]
