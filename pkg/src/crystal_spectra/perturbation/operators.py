"""The perturbed operators on finitely supported lattice cochains.

``H = J D(X, m) J* + R`` and its edge counterpart ``-J Delta_1(X, m) J* + R``,
where ``J f = (m / m_Gamma)^{1/2} f`` identifies the two weighted spaces.
Two independent evaluations are provided:

* :func:`apply_perturbed_H` uses the closed-form kernels of
  ``J D(X, m) J* - D(X, m_Gamma)`` cell by cell;
* :func:`truncated_difference` builds a finite truncation with the perturbed
  measure and composes the generic graph operators.
"""
from __future__ import annotations

import numpy as np

from .. import graph_core as gc
from ..crystal import LatticeCochain, box_cells, cell_lookup, truncate
from ..errors import WindowError

__all__ = [
    "apply_perturbed_H",
    "apply_perturbed_edge_H",
    "apply_periodic_H",
    "truncated_difference",
    "truncated_edge_difference",
]


def _window(f, hops, crystal, radius):
    s = f.support_radius()
    need = max(s, 0) + hops * crystal.max_hop
    if radius is not None:
        if radius < need:
            raise WindowError(f"evaluation window {radius} does not cover support {s} plus {hops} hop(s)")
        need = radius
    return need


def _gb_kernel(crystal, measure, f, R):
    """``J D(m) J* f`` on the box of ``f`` (which must leave room for one hop)."""
    cells = box_cells(f.radius, crystal.dim)
    mg_v, mg_e = crystal.m_vertex, crystal.m_edge
    m_v = measure.vertex_values(cells)          # (C, n)
    m_e = measure.edge_values(cells)            # (C, l)
    out_v = np.zeros_like(f.vertex)
    out_e = np.zeros_like(f.edge)
    for k in range(crystal.l):
        o, t = crystal.origin[k], crystal.terminus[k]
        tc = cell_lookup(cells + crystal.eta[k], f.radius)        # terminus cell of mu . e_k
        ok = tc >= 0
        fe = f.edge[:, k]
        # vertex side: e in A_o(mu e), its reversal in A_t(mu e)
        w_o = np.sqrt(m_e[:, k] * mg_e[k]) / np.sqrt(m_v[:, o] * mg_v[o])
        out_v[:, o] -= w_o * fe
        m_vt = np.ones(cells.shape[0])
        m_vt[ok] = m_v[tc[ok], t]
        w_t = np.sqrt(m_e[:, k] * mg_e[k]) / np.sqrt(m_vt * mg_v[t])
        np.add.at(out_v[:, t], tc[ok], (w_t * fe)[ok])
        # edge side: (m(e)/mG(e))^{1/2} [ (mG(t)/m(t))^{1/2} f(t) - (mG(o)/m(o))^{1/2} f(o) ]
        ft = np.zeros(cells.shape[0], dtype=complex)
        ft[ok] = f.vertex[tc[ok], t]
        a_t = np.sqrt(m_e[:, k] * mg_v[t]) / np.sqrt(mg_e[k] * m_vt)
        a_o = np.sqrt(m_e[:, k] * mg_v[o]) / np.sqrt(mg_e[k] * m_v[:, o])
        out_e[:, k] = a_t * ft - a_o * f.vertex[:, o]
        if np.any(~ok & (fe != 0)):
            raise WindowError("edge leaves the evaluation window")
    if R is not None:
        out_v = out_v + R.vertex_values(cells) * f.vertex
        out_e = out_e + R.edge_values(cells) * f.edge
    return LatticeCochain(f.radius, f.dim, out_v, out_e)


def apply_perturbed_H(crystal, measure, potential, f, radius=None):
    """``H f`` for a finitely supported :class:`LatticeCochain`.

    ``measure`` and ``potential`` are lattice fields (``None`` means periodic).
    The result lives on the box of radius ``supp(f) + max|eta|`` unless a
    larger ``radius`` is given; a smaller one raises :class:`WindowError`.
    """
    measure = crystal.periodic_measure() if measure is None else measure
    potential = crystal.periodic_potential() if potential is None else potential
    r = _window(f, 1, crystal, radius)
    return _gb_kernel(crystal, measure, f.regrid(r), potential)


def apply_periodic_H(crystal, f, radius=None):
    return apply_perturbed_H(crystal, None, None, f, radius)


def apply_perturbed_edge_H(crystal, measure, potential, f, radius=None):
    """``-J Delta_1(X, m) J* f + R f`` for a cochain with only edge values.

    Uses ``-Delta_1 = d d*`` split through the unitary ``J``: the vertex part
    of ``J D J*`` applied to ``f`` feeds the edge part of ``J D J*``.
    """
    measure = crystal.periodic_measure() if measure is None else measure
    potential = crystal.periodic_potential() if potential is None else potential
    if np.any(f.vertex != 0):
        raise ValueError("edge operator acts on cochains without vertex part")
    r = _window(f, 2, crystal, radius)
    g = _gb_kernel(crystal, measure, f.regrid(r), None)
    g = LatticeCochain(r, f.dim, g.vertex, np.zeros_like(g.edge))
    h = _gb_kernel(crystal, measure, g, None)
    cells = box_cells(r, crystal.dim)
    edge = h.edge + potential.edge_values(cells) * f.regrid(r).edge
    return LatticeCochain(r, f.dim, np.zeros_like(h.vertex), edge)


# ---------------------------------------------------------------------------
# truncation route
# ---------------------------------------------------------------------------

def _truncations(crystal, measure, potential, radius):
    pert = truncate(crystal, radius, measure=measure, potential=potential)
    base = truncate(crystal, radius)
    return pert, base


def truncated_difference(crystal, measure, potential, f, radius=None):
    """``(H - H0) f`` via generic graph operators on a finite truncation.

    The truncation is one hop wider than needed so that every edge touching
    the support is present.
    """
    r = _window(f, 1, crystal, radius) + crystal.max_hop
    pert, base = _truncations(crystal, measure, potential, r)
    g = pert.to_cochain(f.regrid(r))
    ratio_v = np.sqrt(pert.measure.vertex / base.measure.vertex)
    ratio_e = np.sqrt(pert.measure.edge / base.measure.edge)
    # J* f = (m_G / m)^{1/2} f ; J g = (m / m_G)^{1/2} g
    jstar = gc.Cochain(g.vertex / ratio_v, g.edge / ratio_e)
    Dg = gc.apply_gauss_bonnet(pert.graph, jstar, pert.measure)
    Hf = gc.Cochain(ratio_v * Dg.vertex + pert.potential.vertex * g.vertex,
                    ratio_e * Dg.edge + pert.potential.edge * g.edge)
    D0 = gc.apply_gauss_bonnet(base.graph, g, base.measure)
    H0f = gc.Cochain(D0.vertex + base.potential.vertex * g.vertex,
                     D0.edge + base.potential.edge * g.edge)
    return pert.from_cochain(Hf - H0f)


def truncated_edge_difference(crystal, measure, f, radius=None):
    """``(Delta_1(m_Gamma) - J Delta_1(m) J*) f`` via the generic edge Laplacian."""
    r = _window(f, 2, crystal, radius) + crystal.max_hop
    pert, base = _truncations(crystal, measure, None, r)
    g = pert.to_cochain(f.regrid(r))
    ratio_e = np.sqrt(pert.measure.edge / base.measure.edge)
    pert_part = ratio_e * gc.apply_laplacian1(pert.graph, g.edge / ratio_e, pert.measure)
    base_part = gc.apply_laplacian1(base.graph, g.edge, base.measure)
    out = gc.Cochain(np.zeros(pert.num_vertices), base_part - pert_part)
    return pert.from_cochain(out)
