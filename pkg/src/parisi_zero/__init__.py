"""Zero-temperature Parisi measures of spherical mixed p-spin glasses."""

from .mixture import MixtureModel, ModelClass, ModelSpecError, classify_g_constant, g_constant, is_convex
from .measure import DiscreteMeasure, chen_sen_verify, crisanti_sommers
from .solver import Ansatz, SolveResult, SolverError, resolve_ansatz, solve_1rsb, solve_2rsb, solve_rs
from .certifier import CertificationReport, certify_rectangle
from .dual import DualPoint, dual_gap, optimal_B, parisi_dual
from .system2rsb import TwoRsbCoordinates, lambda_threshold

__version__ = "0.1.0"

__all__ = [
    "Ansatz", "CertificationReport", "DiscreteMeasure", "DualPoint", "MixtureModel", "ModelClass",
    "ModelSpecError", "SolveResult", "SolverError", "TwoRsbCoordinates", "certify_rectangle",
    "chen_sen_verify", "classify_g_constant", "crisanti_sommers", "dual_gap", "g_constant", "is_convex",
    "lambda_threshold", "optimal_B", "parisi_dual", "resolve_ansatz", "solve_1rsb", "solve_2rsb", "solve_rs",
]
