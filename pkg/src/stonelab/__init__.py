"""Finite-model workbench for Stone pairings, locality and residuality."""

from .errors import BudgetExceeded, EvaluationError, InvariantViolation
from .evaluation import (
    PairingResult, qm_satisfies, satisfies, stone_pairing, stone_pairing_exact, stone_pairing_sampled,
)
from .logic import FormulaError, canned_formulas, parse_formula, to_text
from .structures import Signature, Structure, StructureError, load_structure, make_structure

__version__ = "0.1.0"

__all__ = [
    "BudgetExceeded",
    "EvaluationError",
    "FormulaError",
    "InvariantViolation",
    "PairingResult",
    "Signature",
    "Structure",
    "StructureError",
    "canned_formulas",
    "load_structure",
    "make_structure",
    "parse_formula",
    "qm_satisfies",
    "satisfies",
    "stone_pairing",
    "stone_pairing_exact",
    "stone_pairing_sampled",
    "to_text",
]
