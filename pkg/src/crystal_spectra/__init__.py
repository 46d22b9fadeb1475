"""Gauss-Bonnet and Hodge operators on periodic weighted graphs.

Submodules: :mod:`graph_core`, :mod:`crystal`, :mod:`magnetic`,
:mod:`floquet`, :mod:`perturbation`, :mod:`spectra`, :mod:`verification`,
:mod:`cli`.
"""
from __future__ import annotations

__version__ = "0.1.0"
