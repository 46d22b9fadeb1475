"""Residuals of the symbol decompositions against direct computation.

The left side is ``(H - H0) f`` computed on a finite truncation with the
generic graph operators; the right side is the symbol family applied to the
Fourier coefficients of ``f``.  Both are compared as coefficient sequences.
"""
from __future__ import annotations

import numpy as np

from ..crystal import LatticeCochain
from ..floquet import TrigPolynomial, to_trig_polynomial
from .operators import truncated_difference, truncated_edge_difference
from .profiles import PerturbedMeasure, PotentialSplit, ScalarField, TableEntry
from .symbols import apply_family, build_edge_symbols, build_gb_symbols

__all__ = [
    "random_compact_profile",
    "gb_decomposition_residual",
    "edge_decomposition_residual",
    "random_edge_cochain",
]


def _gap(a, b):
    r = max(a.radius, b.radius)
    return float(np.abs(a.regrid(r).coeffs - b.regrid(r).coeffs).max(initial=0.0))


def random_compact_profile(crystal, rng, support_radius=2, entries=4, with_potential=True):
    """Random finitely supported measure multipliers and potential tables.

    Multipliers are drawn from ``[0.3, 3]``; both potential parts get Gaussian
    table values, so the long-range split is exercised too.
    """
    names = crystal.vertex_names

    def base():
        if rng.random() < 0.5:
            return f"vertex:{names[rng.integers(crystal.n)]}"
        return f"edge:{rng.integers(crystal.l)}"

    def cell():
        return tuple(int(c) for c in rng.integers(-support_radius, support_radius + 1, crystal.dim))

    mults = [TableEntry(base(), cell(), float(rng.uniform(0.3, 3.0))) for _ in range(entries)]
    measure = PerturbedMeasure(crystal, mults)
    if not with_potential:
        return measure, PotentialSplit.periodic(crystal)
    short = ScalarField(crystal, tuple(TableEntry(base(), cell(), float(rng.normal())) for _ in range(entries)))
    long_ = ScalarField(crystal, tuple(TableEntry(base(), cell(), float(rng.normal())) for _ in range(entries)))
    return measure, PotentialSplit(crystal, short, long_)


def gb_decomposition_residual(crystal, measure, potential, f, anchor=0):
    """Max coefficient gap between ``I U (H - H0) f`` and the symbol sum."""
    direct = to_trig_polynomial(crystal, truncated_difference(crystal, measure, potential, f))
    family = build_gb_symbols(crystal, measure, potential, anchor=anchor)
    return _gap(direct, apply_family(family, to_trig_polynomial(crystal, f)))


def edge_decomposition_residual(crystal, measure, f):
    """Same comparison for ``Delta_1(m_G) - J Delta_1(m) J*`` on an edge cochain."""
    if np.any(f.vertex != 0):
        raise ValueError("edge decomposition acts on cochains without vertex part")
    root = np.sqrt(crystal.m_edge)
    out = truncated_edge_difference(crystal, measure, f)
    direct = TrigPolynomial(out.radius, out.dim, out.edge * root)
    family, _ = build_edge_symbols(crystal, measure)
    coeffs = TrigPolynomial(f.radius, f.dim, f.edge * root)
    return _gap(direct, apply_family(family, coeffs))


def random_edge_cochain(crystal, radius, rng):
    """Edge-only random cochain on the box of ``radius``."""
    return LatticeCochain.random(crystal, radius, rng, parts=("edge",))
