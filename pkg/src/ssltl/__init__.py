"""Synthesis and verification of deterministic finite-memory policies for
labeled MDPs under combined omega-regular (Rabin automaton) and steady-state
interval objectives.

The pipeline: build the product of a labeled MDP with a deterministic Rabin
automaton, decompose its accepting maximal end components, assemble a mixed
integer linear program over occupation measures and reachability flows, drive
an external MILP solver through LP files, and independently verify the induced
chain's asymptotic behavior.
"""

from ssltl.errors import (
    SsltlError,
    ModelError,
    HoaError,
    LumpabilityError,
    PolicyError,
    SolverError,
    NoAcceptingStructureError,
    EnumerationLimitError,
)

__version__ = "0.1.0"

__all__ = [
    "SsltlError",
    "ModelError",
    "HoaError",
    "LumpabilityError",
    "PolicyError",
    "SolverError",
    "NoAcceptingStructureError",
    "EnumerationLimitError",
    "__version__",
]
