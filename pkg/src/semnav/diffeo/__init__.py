"""Smooth deformations between the mapped space and the disk-world model space."""

from semnav.diffeo.bumps import zeta, zeta_prime, eta, eta_prime
from semnav.diffeo.specs import BumpParams, PurgingSpec, RootSpec, DiffeoChain, MappedWorld
from semnav.diffeo.maps import (
    switch,
    switch_and_gradient,
    deforming_factor,
    deforming_factor_and_gradient,
    purging_map,
    purging_jacobian,
    root_map,
    root_jacobian,
    full_map,
    full_jacobian,
    full_map_and_jacobian,
)
from semnav.diffeo.construct import build_chain, check_chain

__all__ = [
    "zeta",
    "zeta_prime",
    "eta",
    "eta_prime",
    "BumpParams",
    "PurgingSpec",
    "RootSpec",
    "DiffeoChain",
    "MappedWorld",
    "switch",
    "switch_and_gradient",
    "deforming_factor",
    "deforming_factor_and_gradient",
    "purging_map",
    "purging_jacobian",
    "root_map",
    "root_jacobian",
    "full_map",
    "full_jacobian",
    "full_map_and_jacobian",
    "build_chain",
    "check_chain",
]
