"""Perturbed operators, the shifted-symbol calculus and decay classification."""
from __future__ import annotations

from .decay import DecayReport, decay_report, fundamental_paths, path_end, path_telescope
from .identity import (
    edge_decomposition_residual,
    gb_decomposition_residual,
    random_compact_profile,
    random_edge_cochain,
)
from .operators import (
    apply_perturbed_edge_H,
    apply_perturbed_H,
    truncated_difference,
    truncated_edge_difference,
)
from .profiles import (
    PerturbedMeasure,
    PotentialSplit,
    RadialLaw,
    ScalarField,
    TableEntry,
    load_profile,
    profile_from_dict,
)
from .symbols import (
    FourierSequence,
    Symbol,
    SymbolFamily,
    apply_family,
    build_edge_symbols,
    build_gb_symbols,
    op_apply,
    op_matrix,
    symbol_dagger,
)

__all__ = [
    "DecayReport", "decay_report", "fundamental_paths", "path_telescope", "path_end",
    "edge_decomposition_residual", "gb_decomposition_residual", "random_compact_profile",
    "random_edge_cochain",
    "apply_perturbed_H", "apply_perturbed_edge_H", "truncated_difference",
    "truncated_edge_difference", "PerturbedMeasure", "PotentialSplit", "RadialLaw",
    "ScalarField", "TableEntry", "load_profile", "profile_from_dict", "FourierSequence",
    "Symbol", "SymbolFamily", "apply_family", "build_edge_symbols", "build_gb_symbols",
    "op_apply", "op_matrix", "symbol_dagger",
]
