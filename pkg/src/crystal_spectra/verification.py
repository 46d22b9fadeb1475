"""Seeded invariant checks shared by ``crystal-spectra verify`` and the tests.

Each suite returns a :class:`SuiteResult` holding the worst residual seen and
the tolerance it was held to.  Results carry no timings, so identical seeds
give identical reports.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import crystal as cr
from . import floquet as fl
from . import graph_core as gc
from . import magnetic as mg
from .perturbation import (
    RadialLaw,
    build_edge_symbols,
    decay_report,
    edge_decomposition_residual,
    gb_decomposition_residual,
    random_compact_profile,
    random_edge_cochain,
    symbol_dagger,
)

__all__ = ["SuiteResult", "SUITES", "run_suite", "run_suites", "default_crystals", "reweighted"]

DEFAULT_CRYSTALS = tuple(cr.CATALOG)


@dataclass
class SuiteResult:
    suite: str
    passed: bool
    max_residual: float
    tolerance: float
    cases: int
    detail: str = ""

    def to_dict(self):
        return asdict(self)


def reweighted(crystal, rng):
    """Copy of ``crystal`` with random positive measures and Gaussian potentials."""
    d = crystal.descriptor.to_dict()
    for item in d["vertices"] + d["edges"]:
        item["measure"] = float(rng.uniform(0.3, 3.0))
        item["potential"] = float(rng.normal())
    return cr.build_crystal(cr.CrystalDescriptor.from_dict(d))


def default_crystals():
    return [cr.build_crystal(cr.standard_lattice(name)) for name in DEFAULT_CRYSTALS]


def _random_cochain(rng, graph):
    def z(k):
        return rng.standard_normal(k) + 1j * rng.standard_normal(k)
    return gc.Cochain(z(graph.num_vertices), z(graph.num_edges))


def _graphs(seed, count):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        g, m = gc.random_weighted_graph(rng)
        yield rng, g, m


def adjointness(crystals, seed, count=1000):
    """``|<df, g> - <f, d*g>| / (|f| |g|)`` on random weighted graphs."""
    worst = 0.0
    for rng, g, m in _graphs(seed, count):
        f, h = _random_cochain(rng, g), _random_cochain(rng, g)
        lhs = gc.inner_product(gc.Cochain(0 * f.vertex, gc.apply_d(g, f.vertex)), h, m)
        rhs = gc.inner_product(f, gc.Cochain(gc.apply_d_star(g, h.edge, m), 0 * h.edge), m)
        worst = max(worst, abs(lhs - rhs) / (gc.norm(f, m) * gc.norm(h, m)))
    return SuiteResult("adjointness", worst <= 1e-12, worst, 1e-12, count)


def d_squared(crystals, seed, count=1000):
    """``|D^2 f - ((-Delta_0) + (-Delta_1)) f| / |f|`` on random weighted graphs."""
    worst = 0.0
    for rng, g, m in _graphs(seed + 1, count):
        f = _random_cochain(rng, g)
        DDf = gc.apply_gauss_bonnet(g, gc.apply_gauss_bonnet(g, f, m), m)
        hodge = gc.Cochain(-gc.apply_laplacian0(g, f.vertex, m), -gc.apply_laplacian1(g, f.edge, m))
        worst = max(worst, gc.norm(DDf - hodge, m) / gc.norm(f, m))
    return SuiteResult("d_squared", worst <= 1e-12, worst, 1e-12, count)


def hermiticity(crystals, seed, count=10000):
    """Fibre against the magnetic operator at the Bloch flux, and its hermiticity."""
    rng = np.random.default_rng(seed + 2)
    worst = 0.0
    for c in crystals:
        c = reweighted(c, rng)
        xi = rng.random((count, c.dim))
        h = fl.assemble_h0(c, xi)
        M = mg.magnetic_gauss_bonnet_matrix(c, mg.bloch_flux(c, xi))
        worst = max(worst, float(np.abs(h - M).max()),
                    float(np.abs(h - np.conj(np.swapaxes(h, -1, -2))).max()))
    return SuiteResult("hermiticity", worst <= 1e-13, worst, 1e-13, count * len(crystals))


def parseval(crystals, seed, count=500, N=16):
    """Quadrature norm of the transform against the weighted norm, and round trip."""
    rng = np.random.default_rng(seed + 3)
    worst = 0.0
    per = max(1, count // len(crystals))
    for c in crystals:
        c = reweighted(c, rng)
        trunc = cr.truncate(c, 6)
        grid = fl.torus_grid(N, c.dim)
        for _ in range(per):
            s = int(rng.integers(0, 6))
            f = cr.LatticeCochain.random(c, 5, rng, support_radius=s)
            norm2 = gc.norm(trunc.to_cochain(f.regrid(6)), trunc.measure) ** 2
            quad = float(np.mean(np.sum(np.abs(fl.bloch_transform(c, f, grid)) ** 2, axis=1)))
            worst = max(worst, abs(quad - norm2) / max(1.0, norm2))
        for _ in range(5):
            f = cr.LatticeCochain.random(c, 3, rng)
            back = fl.inverse_bloch(c, fl.bloch_grid(c, f, N))
            worst = max(worst, (back - f).max_abs())
    return SuiteResult("parseval", worst <= 1e-10, worst, 1e-10, per * len(crystals))


def claim(crystals, seed, count=100):
    """Gauss-Bonnet symbol decomposition of ``H - H0`` against direct computation."""
    rng = np.random.default_rng(seed + 4)
    worst = 0.0
    for c in crystals:
        base = reweighted(c, rng)
        for _ in range(count):
            measure, pot = random_compact_profile(base, rng)
            f = cr.LatticeCochain.random(base, 2, rng)
            worst = max(worst, gb_decomposition_residual(base, measure, pot, f))
    return SuiteResult("claim", worst <= 1e-10, worst, 1e-10, count * len(crystals))


def edge_claim(crystals, seed, count=100):
    """Edge-Laplacian symbol decomposition against direct computation."""
    rng = np.random.default_rng(seed + 5)
    worst = 0.0
    for c in crystals:
        base = reweighted(c, rng)
        for _ in range(count):
            measure, _ = random_compact_profile(base, rng, with_potential=False)
            worst = max(worst, edge_decomposition_residual(base, measure, random_edge_cochain(base, 2, rng)))
    return SuiteResult("edge_claim", worst <= 1e-10, worst, 1e-10, count * len(crystals))


_PARTNER = {"a": "a", "b": "c", "c": "b", "d": "d"}


def dagger(crystals, seed, count=20):
    """Each edge symbol's dagger equals its partner symbol, entrywise."""
    rng = np.random.default_rng(seed + 6)
    worst = 0.0
    checked = 0
    for c in crystals:
        base = reweighted(c, rng)
        cells = cr.box_cells(4, base.dim)
        for _ in range(count):
            measure, _ = random_compact_profile(base, rng, with_potential=False)
            _, kinds = build_edge_symbols(base, measure)
            for kind, table in kinds.items():
                for (j, l), s in table.items():
                    other = kinds[_PARTNER[kind]][(l, j)]
                    d = symbol_dagger(s)
                    if d.shift != other.shift:
                        return SuiteResult("dagger", False, float("inf"), 1e-13, checked,
                                           f"shift mismatch for {s.label}")
                    worst = max(worst, float(np.abs(d(cells) - other(cells)).max()))
                    checked += 1
    return SuiteResult("dagger", worst <= 1e-13, worst, 1e-13, checked)


def decay(crystals, seed, lambda_max=2**14):
    """Classifier verdicts on radial laws whose behaviour is known."""
    cases = [
        (RadialLaw(1.5, 1.0), "short", "converging"),
        (RadialLaw(0.5, 1.0), "short", "diverging"),
        (RadialLaw(0.5, 1.0), "long", "converging"),
        (RadialLaw(0.0, 1.0), "long", "converging"),
    ]
    wrong = [f"{law.exponent}/{cond}" for law, cond, want in cases
             if decay_report(law, cond, lambda_max).classification != want]
    return SuiteResult("decay", not wrong, float(len(wrong)), 0.0, len(cases),
                       "misclassified: " + ", ".join(wrong) if wrong else "")


SUITES = {
    "adjointness": adjointness,
    "d_squared": d_squared,
    "hermiticity": hermiticity,
    "parseval": parseval,
    "claim": claim,
    "edge_claim": edge_claim,
    "dagger": dagger,
    "decay": decay,
}


def run_suite(name, crystals=None, seed=0):
    if name not in SUITES:
        raise KeyError(name)
    return SUITES[name](crystals or default_crystals(), seed)


def run_suites(names=None, crystals=None, seed=0):
    return [run_suite(n, crystals, seed) for n in (names or list(SUITES))]
