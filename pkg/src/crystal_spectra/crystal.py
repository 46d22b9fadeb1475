"""Topological crystals over a finite base graph with a Z^d action.

A crystal is described by its base graph: vertices ``x_1..x_n`` (the
fundamental domain), positively oriented edges ``e_1..e_l`` each carrying an
index ``eta(e) in Z^d``, and periodic measure/potential values.  The lifted
edge ``mu . e_l`` runs from vertex ``o(e_l)`` in cell ``mu`` to vertex
``t(e_l)`` in cell ``mu + eta(e_l)``.

Lattice translations use additive notation throughout.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import graph_core as gc
from .errors import CatalogError, ShapeError, ValidationError, WindowError

__all__ = [
    "VertexSpec",
    "EdgeSpec",
    "CrystalDescriptor",
    "Crystal",
    "CrystalVertex",
    "CrystalEdge",
    "PeriodicField",
    "LatticeCochain",
    "Truncation",
    "build_crystal",
    "edge_index",
    "lift",
    "entire_part",
    "origin",
    "terminus",
    "reverse",
    "outgoing_edges",
    "truncate",
    "standard_lattice",
    "CATALOG",
    "box_cells",
    "cell_lookup",
]


# ---------------------------------------------------------------------------
# descriptor
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VertexSpec:
    name: str
    measure: float = 1.0
    potential: float = 0.0


@dataclass(frozen=True)
class EdgeSpec:
    origin: int
    terminus: int
    eta: tuple
    measure: float = 1.0
    potential: float = 0.0


@dataclass(frozen=True)
class CrystalDescriptor:
    """Serialisable definition of a weighted topological crystal."""

    dimension: int
    vertices: tuple
    edges: tuple

    def to_dict(self):
        names = [v.name for v in self.vertices]
        return {
            "dimension": self.dimension,
            "vertices": [
                {"name": v.name, "measure": v.measure, "potential": v.potential}
                for v in self.vertices
            ],
            "edges": [
                {
                    "from": names[e.origin],
                    "to": names[e.terminus],
                    "eta": list(e.eta),
                    "measure": e.measure,
                    "potential": e.potential,
                }
                for e in self.edges
            ],
        }

    def to_json(self, indent=2):
        return json.dumps(self.to_dict(), indent=indent) + "\n"

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ValidationError("descriptor", "expected a JSON object")
        try:
            dim = data["dimension"]
            raw_vertices = data["vertices"]
            raw_edges = data["edges"]
        except KeyError as exc:
            raise ValidationError(exc.args[0], "missing field") from None
        if not isinstance(dim, int) or isinstance(dim, bool):
            raise ValidationError("dimension", "must be an integer")
        vertices = []
        for i, v in enumerate(raw_vertices):
            try:
                vertices.append(VertexSpec(
                    name=str(v.get("name", f"x{i + 1}")),
                    measure=_as_float(v.get("measure", 1.0), f"vertices[{i}].measure"),
                    potential=_as_float(v.get("potential", 0.0), f"vertices[{i}].potential"),
                ))
            except AttributeError:
                raise ValidationError(f"vertices[{i}]", "expected an object") from None
        names = {v.name: i for i, v in enumerate(vertices)}
        if len(names) != len(vertices):
            raise ValidationError("vertices", "duplicate vertex names")
        edges = []
        for k, e in enumerate(raw_edges):
            if not isinstance(e, dict):
                raise ValidationError(f"edges[{k}]", "expected an object")
            try:
                ends = [e["from"], e["to"]]
                eta = e["eta"]
            except KeyError as exc:
                raise ValidationError(f"edges[{k}].{exc.args[0]}", "missing field") from None
            resolved = []
            for key, ref in zip(("from", "to"), ends):
                if isinstance(ref, str):
                    if ref not in names:
                        raise ValidationError(f"edges[{k}].{key}", f"unknown vertex {ref!r}")
                    resolved.append(names[ref])
                elif isinstance(ref, int) and not isinstance(ref, bool):
                    resolved.append(ref)
                else:
                    raise ValidationError(f"edges[{k}].{key}", "expected a vertex name or index")
            if not isinstance(eta, (list, tuple)) or not all(
                    isinstance(c, int) and not isinstance(c, bool) for c in eta):
                raise ValidationError(f"edges[{k}].eta", "expected a list of integers")
            edges.append(EdgeSpec(
                origin=resolved[0],
                terminus=resolved[1],
                eta=tuple(eta),
                measure=_as_float(e.get("measure", 1.0), f"edges[{k}].measure"),
                potential=_as_float(e.get("potential", 0.0), f"edges[{k}].potential"),
            ))
        return cls(dim, tuple(vertices), tuple(edges))

    @classmethod
    def from_json(cls, text):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError("descriptor", f"invalid JSON: {exc}") from None
        return cls.from_dict(data)

    @classmethod
    def load(cls, path):
        return cls.from_json(Path(path).read_text(encoding="utf-8"))

    def save(self, path):
        Path(path).write_text(self.to_json(), encoding="utf-8")


def _as_float(value, name):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(name, "expected a number")
    return float(value)


# ---------------------------------------------------------------------------
# crystal and its elements
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Crystal:
    """A validated crystal; arrays are read-only.

    Attributes
    ----------
    dim, n, l : int
        Lattice dimension, number of base vertices and of base edges.
    origin, terminus : ndarray of int, shape (l,)
    eta : ndarray of int, shape (l, d)
    m_vertex, m_edge, r_vertex, r_edge : ndarray of float
        Periodic measure and potential on the fundamental domain.
    """

    descriptor: CrystalDescriptor
    dim: int = field(init=False)
    n: int = field(init=False)
    l: int = field(init=False)
    origin: np.ndarray = field(init=False)
    terminus: np.ndarray = field(init=False)
    eta: np.ndarray = field(init=False)
    m_vertex: np.ndarray = field(init=False)
    m_edge: np.ndarray = field(init=False)
    r_vertex: np.ndarray = field(init=False)
    r_edge: np.ndarray = field(init=False)

    def __post_init__(self):
        desc = self.descriptor
        put = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        put("dim", desc.dimension)
        put("n", len(desc.vertices))
        put("l", len(desc.edges))
        ro = lambda a, dt: gc._frozen(a, dt)  # noqa: E731
        put("origin", ro([e.origin for e in desc.edges], np.int64))
        put("terminus", ro([e.terminus for e in desc.edges], np.int64))
        put("eta", ro(np.array([e.eta for e in desc.edges], dtype=np.int64).reshape(self.l, self.dim), np.int64))
        put("m_vertex", ro([v.measure for v in desc.vertices], float))
        put("m_edge", ro([e.measure for e in desc.edges], float))
        put("r_vertex", ro([v.potential for v in desc.vertices], float))
        put("r_edge", ro([e.potential for e in desc.edges], float))

    @property
    def size(self):
        """Fiber dimension ``n + l``."""
        return self.n + self.l

    @property
    def vertex_names(self):
        return [v.name for v in self.descriptor.vertices]

    @property
    def max_hop(self):
        """Largest sup-norm of an edge index (at least 1)."""
        return max(1, int(np.abs(self.eta).max(initial=0)))

    def base_graph(self):
        return gc.OrientedGraph(self.n, self.origin, self.terminus)

    def periodic_measure(self):
        return PeriodicField(self.m_vertex, self.m_edge)

    def periodic_potential(self):
        return PeriodicField(self.r_vertex, self.r_edge)

    def with_potential(self, r_vertex, r_edge):
        """Copy of this crystal with a different periodic potential."""
        verts = tuple(VertexSpec(v.name, v.measure, float(r))
                      for v, r in zip(self.descriptor.vertices, np.broadcast_to(r_vertex, (self.n,))))
        edges = tuple(EdgeSpec(e.origin, e.terminus, e.eta, e.measure, float(r))
                      for e, r in zip(self.descriptor.edges, np.broadcast_to(r_edge, (self.l,))))
        return build_crystal(CrystalDescriptor(self.dim, verts, edges))


def build_crystal(descriptor):
    """Validate a descriptor and return the immutable :class:`Crystal`."""
    d = descriptor.dimension
    if not isinstance(d, int) or d < 1:
        raise ValidationError("dimension", "must be an integer >= 1")
    n, l = len(descriptor.vertices), len(descriptor.edges)
    if n < 1:
        raise ValidationError("vertices", "need at least one vertex")
    if l < 1:
        raise ValidationError("edges", "need at least one edge")
    for i, v in enumerate(descriptor.vertices):
        if not np.isfinite(v.measure) or v.measure <= 0:
            raise ValidationError(f"vertices[{i}].measure", "must be > 0")
        if not np.isfinite(v.potential):
            raise ValidationError(f"vertices[{i}].potential", "must be finite")
    for k, e in enumerate(descriptor.edges):
        for key, idx in (("from", e.origin), ("to", e.terminus)):
            if not 0 <= idx < n:
                raise ValidationError(f"edges[{k}].{key}", f"vertex index {idx} out of range")
        if len(e.eta) != d:
            raise ValidationError(f"edges[{k}].eta", f"expected {d} components")
        if not np.isfinite(e.measure) or e.measure <= 0:
            raise ValidationError(f"edges[{k}].measure", "must be > 0")
        if not np.isfinite(e.potential):
            raise ValidationError(f"edges[{k}].potential", "must be finite")
    return Crystal(descriptor)


@dataclass(frozen=True)
class CrystalVertex:
    """The vertex ``cell . x_index``."""

    index: int
    cell: tuple


@dataclass(frozen=True)
class CrystalEdge:
    """An oriented lifted edge.

    ``reversed=False`` is ``cell . e_index``; ``reversed=True`` is the lift of
    the reversed base edge whose *origin* lies in ``cell``, i.e. the reversal
    of ``(cell - eta) . e_index``.  In both cases ``cell`` is the entire part.
    """

    index: int
    cell: tuple
    reversed: bool = False


def _cell(mu, dim):
    mu = tuple(int(c) for c in np.atleast_1d(mu))
    if len(mu) != dim:
        raise ShapeError(f"lattice point must have {dim} components")
    return mu


def _add(a, b, sign=1):
    return tuple(int(x) + sign * int(y) for x, y in zip(a, b))


def edge_index(crystal, edge):
    """``eta`` of a lifted oriented edge; translation invariant, odd under reversal."""
    eta = tuple(int(c) for c in crystal.eta[edge.index])
    return tuple(-c for c in eta) if edge.reversed else eta


def origin(crystal, edge):
    base = crystal.terminus[edge.index] if edge.reversed else crystal.origin[edge.index]
    return CrystalVertex(int(base), edge.cell)


def terminus(crystal, edge):
    eta = edge_index(crystal, edge)
    base = crystal.origin[edge.index] if edge.reversed else crystal.terminus[edge.index]
    return CrystalVertex(int(base), _add(edge.cell, eta))


def reverse(crystal, edge):
    return CrystalEdge(edge.index, _add(edge.cell, edge_index(crystal, edge)), not edge.reversed)


def lift(crystal, mu, base):
    """Translate ``base`` by ``mu``; for fundamental-domain elements this is the lift."""
    mu = _cell(mu, crystal.dim)
    if isinstance(base, CrystalVertex):
        if not 0 <= base.index < crystal.n:
            raise KeyError(f"unknown base vertex {base.index}")
        return CrystalVertex(base.index, _add(base.cell, mu))
    if isinstance(base, CrystalEdge):
        if not 0 <= base.index < crystal.l:
            raise KeyError(f"unknown base edge {base.index}")
        return CrystalEdge(base.index, _add(base.cell, mu), base.reversed)
    raise TypeError("expected a CrystalVertex or CrystalEdge")


def entire_part(element):
    """``(mu, base)`` with ``base`` the fundamental-domain representative."""
    zero = tuple(0 for _ in element.cell)
    if isinstance(element, CrystalVertex):
        return element.cell, CrystalVertex(element.index, zero)
    return element.cell, CrystalEdge(element.index, zero, element.reversed)


def outgoing_edges(crystal, vertex):
    """Lifted star ``A_x`` of a crystal vertex (loops appear twice)."""
    out = []
    for k in range(crystal.l):
        if crystal.origin[k] == vertex.index:
            out.append(CrystalEdge(k, vertex.cell, False))
        if crystal.terminus[k] == vertex.index:
            out.append(CrystalEdge(k, vertex.cell, True))
    return out


# ---------------------------------------------------------------------------
# fields and cochains on boxes of cells
# ---------------------------------------------------------------------------

def box_cells(radius, dim):
    """All cells with sup-norm <= radius, lexicographic order, shape (C, d)."""
    if radius < 0:
        raise ValueError("radius must be non-negative")
    side = np.arange(-radius, radius + 1)
    grids = np.meshgrid(*([side] * dim), indexing="ij")
    return np.stack([g.reshape(-1) for g in grids], axis=1).astype(np.int64)


def cell_lookup(cells, radius):
    """Flat box index of each cell, -1 for cells outside the box."""
    cells = np.asarray(cells, dtype=np.int64)
    side = 2 * radius + 1
    shifted = cells + radius
    inside = np.all((shifted >= 0) & (shifted < side), axis=-1)
    idx = np.zeros(cells.shape[:-1], dtype=np.int64)
    for k in range(cells.shape[-1]):
        idx = idx * side + np.clip(shifted[..., k], 0, side - 1)
    return np.where(inside, idx, -1)


@dataclass(frozen=True, eq=False)
class PeriodicField:
    """A Z^d-periodic function on vertices and edges (measure or potential)."""

    vertex: np.ndarray
    edge: np.ndarray

    def vertex_values(self, cells):
        cells = np.asarray(cells)
        return np.broadcast_to(self.vertex, (cells.shape[0], self.vertex.size)).copy()

    def edge_values(self, cells):
        cells = np.asarray(cells)
        return np.broadcast_to(self.edge, (cells.shape[0], self.edge.size)).copy()


@dataclass(frozen=True, eq=False)
class LatticeCochain:
    """A finitely supported cochain on the crystal, stored on a box of cells.

    ``vertex[c, j] = f(mu_c . x_j)`` and ``edge[c, k] = f(mu_c . e_k)`` for the
    positively oriented lift; reversed edges carry minus that value.
    """

    radius: int
    dim: int
    vertex: np.ndarray
    edge: np.ndarray

    def __post_init__(self):
        C = (2 * self.radius + 1) ** self.dim
        v = np.asarray(self.vertex, dtype=complex)
        e = np.asarray(self.edge, dtype=complex)
        if v.ndim != 2 or v.shape[0] != C or e.ndim != 2 or e.shape[0] != C:
            raise ShapeError("values must have one row per cell of the box")
        object.__setattr__(self, "vertex", gc._frozen(v, complex))
        object.__setattr__(self, "edge", gc._frozen(e, complex))

    @classmethod
    def zeros(cls, crystal, radius):
        C = (2 * radius + 1) ** crystal.dim
        return cls(radius, crystal.dim, np.zeros((C, crystal.n)), np.zeros((C, crystal.l)))

    @classmethod
    def random(cls, crystal, radius, rng, support_radius=None, parts=("vertex", "edge")):
        """Complex Gaussian values on cells with sup-norm <= support_radius."""
        s = radius if support_radius is None else support_radius
        cells = box_cells(radius, crystal.dim)
        mask = (np.abs(cells).max(axis=1) <= s)[:, None]
        C = cells.shape[0]

        def draw(k):
            z = rng.standard_normal((C, k)) + 1j * rng.standard_normal((C, k))
            return z * mask

        v = draw(crystal.n) if "vertex" in parts else np.zeros((C, crystal.n))
        e = draw(crystal.l) if "edge" in parts else np.zeros((C, crystal.l))
        return cls(radius, crystal.dim, v, e)

    @property
    def cells(self):
        return box_cells(self.radius, self.dim)

    def support_radius(self):
        """Sup-norm radius of the support, -1 for the zero cochain."""
        nz = np.any(self.vertex != 0, axis=1) | np.any(self.edge != 0, axis=1)
        if not nz.any():
            return -1
        return int(np.abs(self.cells[nz]).max())

    def regrid(self, radius):
        """Same cochain on a box of another radius; raises if support is cut."""
        if radius < self.support_radius():
            raise WindowError(f"support radius {self.support_radius()} exceeds window {radius}")
        target = box_cells(radius, self.dim)
        src = cell_lookup(target, self.radius)
        ok = src >= 0
        v = np.zeros((target.shape[0], self.vertex.shape[1]), dtype=complex)
        e = np.zeros((target.shape[0], self.edge.shape[1]), dtype=complex)
        v[ok] = self.vertex[src[ok]]
        e[ok] = self.edge[src[ok]]
        return LatticeCochain(radius, self.dim, v, e)

    def __add__(self, other):
        r = max(self.radius, other.radius)
        a, b = self.regrid(r), other.regrid(r)
        return LatticeCochain(r, self.dim, a.vertex + b.vertex, a.edge + b.edge)

    def __sub__(self, other):
        return self + other * (-1)

    def __mul__(self, c):
        return LatticeCochain(self.radius, self.dim, c * self.vertex, c * self.edge)

    __rmul__ = __mul__

    def max_abs(self):
        return float(max(np.abs(self.vertex).max(initial=0), np.abs(self.edge).max(initial=0)))

    def value(self, element):
        """Value at a :class:`CrystalVertex` or oriented :class:`CrystalEdge`."""
        if isinstance(element, CrystalVertex):
            c = int(cell_lookup(np.array(element.cell), self.radius))
            return complex(self.vertex[c, element.index]) if c >= 0 else 0j
        if element.reversed:
            raise ValueError("pass the crystal to value_oriented for reversed edges")
        c = int(cell_lookup(np.array(element.cell), self.radius))
        return complex(self.edge[c, element.index]) if c >= 0 else 0j


# ---------------------------------------------------------------------------
# truncation
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Truncation:
    """Finite induced subgraph on the cells with ``|mu|_inf <= radius``.

    Vertex ``c * n + j`` is ``cells[c] . x_j``.  ``edge_cell[k]`` and
    ``edge_base[k]`` identify edge ``k`` as ``cells[edge_cell[k]] . e_{edge_base[k]}``.
    """

    crystal: Crystal
    radius: int
    cells: np.ndarray
    graph: gc.OrientedGraph
    edge_cell: np.ndarray
    edge_base: np.ndarray
    measure: gc.Measure
    potential: gc.Potential

    @property
    def num_vertices(self):
        return self.graph.num_vertices

    @property
    def num_edges(self):
        return self.graph.num_edges

    def vertex_id(self, vertex):
        c = int(cell_lookup(np.array(vertex.cell), self.radius))
        if c < 0:
            raise KeyError(f"{vertex} outside truncation")
        return c * self.crystal.n + vertex.index

    def to_cochain(self, f):
        """Restrict a :class:`LatticeCochain` to this truncation (values, not weights)."""
        g = f.regrid(max(f.radius, self.radius)) if f.radius < self.radius else f
        if g.radius > self.radius:
            g = g.regrid(self.radius)  # raises if the support is cut
        vertex = g.vertex.reshape(-1)
        edge_full = g.edge
        kept = np.zeros(edge_full.shape, dtype=bool)
        kept[self.edge_cell, self.edge_base] = True
        if np.any(edge_full[~kept] != 0):
            raise WindowError("cochain is nonzero on an edge leaving the truncation")
        return gc.Cochain(vertex, edge_full[self.edge_cell, self.edge_base])

    def from_cochain(self, f):
        C = self.cells.shape[0]
        vertex = np.asarray(f.vertex).reshape(C, self.crystal.n)
        edge = np.zeros((C, self.crystal.l), dtype=complex)
        edge[self.edge_cell, self.edge_base] = f.edge
        return LatticeCochain(self.radius, self.crystal.dim, vertex, edge)


def truncate(crystal, radius, measure=None, potential=None):
    """Induced finite weighted graph on the sup-norm ball of cells.

    Edges with an endpoint outside the ball are dropped.  ``measure`` and
    ``potential`` are lattice fields (anything with ``vertex_values`` and
    ``edge_values``); the periodic ones of the crystal are used by default.
    """
    if not isinstance(radius, (int, np.integer)) or radius < 0:
        raise ValueError("truncation radius must be a non-negative integer")
    radius = int(radius)
    measure = crystal.periodic_measure() if measure is None else measure
    potential = crystal.periodic_potential() if potential is None else potential
    cells = box_cells(radius, crystal.dim)
    C, n = cells.shape[0], crystal.n

    # edge k of cell c is kept iff its terminus cell is in the box
    term_cells = cells[:, None, :] + crystal.eta[None, :, :]          # (C, l, d)
    term_idx = cell_lookup(term_cells, radius)                           # (C, l)
    keep_c, keep_k = np.nonzero(term_idx >= 0)
    o = keep_c * n + crystal.origin[keep_k]
    t = term_idx[keep_c, keep_k] * n + crystal.terminus[keep_k]
    graph = gc.OrientedGraph(C * n, o, t)

    mv = np.asarray(measure.vertex_values(cells), dtype=float).reshape(-1)
    me = np.asarray(measure.edge_values(cells), dtype=float)[keep_c, keep_k]
    rv = np.asarray(potential.vertex_values(cells), dtype=float).reshape(-1)
    re = np.asarray(potential.edge_values(cells), dtype=float)[keep_c, keep_k]
    return Truncation(
        crystal=crystal,
        radius=radius,
        cells=cells,
        graph=graph,
        edge_cell=gc._frozen(keep_c, np.int64),
        edge_base=gc._frozen(keep_k, np.int64),
        measure=gc.Measure(mv, me),
        potential=gc.Potential(rv, re),
    )


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------

def _z1():
    return CrystalDescriptor(1, (VertexSpec("x1"),), (EdgeSpec(0, 0, (1,)),))


def _z2():
    return CrystalDescriptor(
        2, (VertexSpec("x1"),), (EdgeSpec(0, 0, (1, 0)), EdgeSpec(0, 0, (0, 1))))


def _hexagonal():
    return CrystalDescriptor(
        2,
        (VertexSpec("a"), VertexSpec("b")),
        (EdgeSpec(0, 1, (0, 0)), EdgeSpec(0, 1, (1, 0)), EdgeSpec(0, 1, (0, 1))),
    )


def _ladder():
    return CrystalDescriptor(
        1,
        (VertexSpec("a"), VertexSpec("b")),
        (EdgeSpec(0, 1, (0,)), EdgeSpec(0, 0, (1,)), EdgeSpec(1, 1, (1,))),
    )


CATALOG = {
    "z1": _z1,
    "z2": _z2,
    "hexagonal": _hexagonal,
    "ladder": _ladder,
}


def standard_lattice(name):
    """Descriptor of a catalog lattice: ``z1``, ``z2``, ``hexagonal`` or ``ladder``."""
    try:
        return CATALOG[name]()
    except KeyError:
        raise CatalogError(f"unknown lattice {name!r}; known: {', '.join(sorted(CATALOG))}") from None
