"""Shared builders for the test suite."""
import numpy as np

from crystal_spectra import crystal as cr


def weighted(name, seed):
    """Catalog lattice with random measure and potential."""
    rng = np.random.default_rng(seed)
    d = cr.standard_lattice(name).to_dict()
    for item in d["vertices"] + d["edges"]:
        item["measure"] = float(rng.uniform(0.3, 3.0))
        item["potential"] = float(rng.normal())
    return cr.build_crystal(cr.CrystalDescriptor.from_dict(d))


def lattice(name):
    return cr.build_crystal(cr.standard_lattice(name))
