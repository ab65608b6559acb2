"""Space-efficient coercion calculi: two interpreters, a coercion-passing
translation between them, and a verification harness.

The calculus modules keep parallel APIs (``typecheck_program``,
``evaluate_program``, ``step``, ``metric_f``); import them qualified:

    from coercion_forge import lam_s, lam_sx
"""

from . import coercions, lam_s, lam_sx, surface, translate, types
from .coercions import compose
from .harness import (
    GenConfig,
    GenerationExhausted,
    SpaceReport,
    Verdict,
    differentialRun,
    genWellTyped,
    invariantSuite,
    simulationCheck,
    spaceBench,
)
from .surface import (
    ParseError,
    alpha_eq,
    alpha_eq_program,
    dialect_of_path,
    parse_coercion,
    parse_program,
    parse_term,
    parse_type,
    print_coercion,
    print_program,
    print_term,
    print_type,
)
from .translate import psi_crc, psi_type, trans_program, trans_state, trans_term
from .types import BOOL, DYN, INT

__version__ = "0.1.0"

__all__ = [
    "BOOL",
    "DYN",
    "GenConfig",
    "GenerationExhausted",
    "INT",
    "ParseError",
    "SpaceReport",
    "Verdict",
    "alpha_eq",
    "alpha_eq_program",
    "coercions",
    "compose",
    "dialect_of_path",
    "differentialRun",
    "genWellTyped",
    "invariantSuite",
    "lam_s",
    "lam_sx",
    "parse_coercion",
    "parse_program",
    "parse_term",
    "parse_type",
    "print_coercion",
    "print_program",
    "print_term",
    "print_type",
    "psi_crc",
    "psi_type",
    "simulationCheck",
    "spaceBench",
    "surface",
    "trans_program",
    "trans_state",
    "trans_term",
    "translate",
    "types",
]
