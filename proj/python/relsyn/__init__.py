"""Certified reach-avoid synthesis against a simulator-backed surrogate."""

from relsyn._relsyn import (
    certify,
    clopper_pearson,
    combine_situations,
    compose_chain,
    coupling_deficiency,
    deficiency_from_distance,
    delta2_field,
    dfa_info,
    max_coupling_mass,
    run_scenario,
)

__all__ = [
    "certify",
    "clopper_pearson",
    "combine_situations",
    "compose_chain",
    "coupling_deficiency",
    "deficiency_from_distance",
    "delta2_field",
    "dfa_info",
    "max_coupling_mass",
    "run_scenario",
]
