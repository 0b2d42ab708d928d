"""Simulation and analysis of entanglement by path identity in multi-source SPDC."""

from .elements import (
    PerturbativeOverflow,
    PhaseSpec,
    RotatorSpec,
    SourceSpec,
    apply_phase,
    apply_rotator,
    apply_squeezer,
    run_pipeline,
)
from .expdsl import ExperimentSpec, ParseError, ValidationError, load, parse, unparse, validate
from .fockcore import FockBasisState, KetExpansion, ModeLabel, Pol, create, annihilate, inner_product, truncate
from .postselect import DetectionPattern, EmptyPostSelection, TwoQubitDensityMatrix, postselect_state, term_report

__version__ = "0.1.0"

__all__ = [
    "ExperimentSpec",
    "DetectionPattern",
    "EmptyPostSelection",
    "FockBasisState",
    "KetExpansion",
    "ModeLabel",
    "ParseError",
    "PerturbativeOverflow",
    "PhaseSpec",
    "Pol",
    "RotatorSpec",
    "SourceSpec",
    "TwoQubitDensityMatrix",
    "ValidationError",
    "annihilate",
    "apply_phase",
    "apply_rotator",
    "apply_squeezer",
    "create",
    "inner_product",
    "load",
    "parse",
    "postselect_state",
    "run_pipeline",
    "term_report",
    "truncate",
    "unparse",
    "validate",
]
