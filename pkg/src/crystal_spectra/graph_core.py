"""Finite weighted graphs, cochains and the operators d, d*, D, Delta_0, Delta_1.

Edges are stored once, in a canonical orientation.  Oriented edges are
numbered ``0..E-1`` for the canonical representatives and ``E..2E-1`` for
their reversals, so ``reverse(k) = (k + E) % (2E)``.  A 1-cochain keeps only
its values on canonical edges; the value on a reversal is minus that, which
makes antisymmetry hold by construction.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ShapeError, ValidationError

__all__ = [
    "OrientedGraph",
    "Measure",
    "Potential",
    "Cochain",
    "degree",
    "inner_product",
    "norm",
    "apply_d",
    "apply_d_star",
    "apply_gauss_bonnet",
    "apply_laplacian0",
    "apply_laplacian1",
    "gauss_bonnet_matrix",
    "random_weighted_graph",
]


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class OrientedGraph:
    """A finite multigraph with loops, given by its canonical edges.

    Parameters
    ----------
    num_vertices : int
    origin, terminus : array_like of int, shape (E,)
        Endpoints of the canonical orientation of each edge.
    """

    num_vertices: int
    origin: np.ndarray
    terminus: np.ndarray
    _star_ptr: np.ndarray = field(init=False, repr=False)
    _star_edges: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        origin = _frozen(self.origin, np.int64).reshape(-1)
        terminus = _frozen(self.terminus, np.int64).reshape(-1)
        if origin.shape != terminus.shape:
            raise ShapeError("origin and terminus must have the same length")
        n = int(self.num_vertices)
        if n < 0:
            raise ValidationError("num_vertices", "must be non-negative")
        if origin.size and (min(origin.min(), terminus.min()) < 0
                            or max(origin.max(), terminus.max()) >= n):
            raise ValidationError("edges", "endpoint out of range")
        object.__setattr__(self, "num_vertices", n)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "terminus", terminus)

        # CSR star index: A_x = oriented edges whose origin is x.
        o_all = np.concatenate([origin, terminus])
        order = np.argsort(o_all, kind="stable")
        ptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(ptr, o_all + 1, 1)
        object.__setattr__(self, "_star_ptr", _frozen(np.cumsum(ptr), np.int64))
        object.__setattr__(self, "_star_edges", _frozen(order, np.int64))

    @property
    def num_edges(self):
        return int(self.origin.size)

    def reverse(self, k):
        """Index of the reversed oriented edge."""
        E = self.num_edges
        return (np.asarray(k) + E) % (2 * E)

    def oriented_origin(self, k):
        k = np.asarray(k)
        E = self.num_edges
        return np.where(k < E, self.origin[k % E], self.terminus[k % E])

    def oriented_terminus(self, k):
        k = np.asarray(k)
        E = self.num_edges
        return np.where(k < E, self.terminus[k % E], self.origin[k % E])

    def star(self, x):
        """Oriented edges leaving ``x`` (a loop at ``x`` shows up twice)."""
        if not 0 <= x < self.num_vertices:
            raise KeyError(f"unknown vertex {x}")
        return self._star_edges[self._star_ptr[x]:self._star_ptr[x + 1]]

    def star_arrays(self):
        """``(ptr, oriented_ids)`` in CSR layout, for vectorised stencils."""
        return self._star_ptr, self._star_edges


@dataclass(frozen=True, eq=False)
class Measure:
    """Positive weights on vertices and on (unoriented) edges."""

    vertex: np.ndarray
    edge: np.ndarray

    def __post_init__(self):
        v = _frozen(self.vertex, float).reshape(-1)
        e = _frozen(self.edge, float).reshape(-1)
        if not (np.all(np.isfinite(v)) and np.all(v > 0)):
            raise ValidationError("measure.vertex", "must be strictly positive")
        if not (np.all(np.isfinite(e)) and np.all(e > 0)):
            raise ValidationError("measure.edge", "must be strictly positive")
        object.__setattr__(self, "vertex", v)
        object.__setattr__(self, "edge", e)

    @classmethod
    def uniform(cls, graph, value=1.0):
        return cls(np.full(graph.num_vertices, value), np.full(graph.num_edges, value))

    def check(self, graph):
        if self.vertex.shape != (graph.num_vertices,) or self.edge.shape != (graph.num_edges,):
            raise ShapeError("measure does not match graph")


@dataclass(frozen=True, eq=False)
class Potential:
    """Real multiplication operator on vertices and edges, R(e) = R(e-bar)."""

    vertex: np.ndarray
    edge: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vertex", _frozen(self.vertex, float).reshape(-1))
        object.__setattr__(self, "edge", _frozen(self.edge, float).reshape(-1))

    @classmethod
    def zero(cls, graph):
        return cls(np.zeros(graph.num_vertices), np.zeros(graph.num_edges))


@dataclass(frozen=True, eq=False)
class Cochain:
    """A 0-part on vertices plus a 1-part on canonical edges."""

    vertex: np.ndarray
    edge: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vertex", _frozen(self.vertex, complex).reshape(-1))
        object.__setattr__(self, "edge", _frozen(self.edge, complex).reshape(-1))

    @classmethod
    def zeros(cls, graph):
        return cls(np.zeros(graph.num_vertices), np.zeros(graph.num_edges))

    @classmethod
    def from_oriented(cls, graph, vertex, oriented, atol=0.0):
        """Build from values on all ``2E`` oriented edges, checking antisymmetry."""
        oriented = np.asarray(oriented, dtype=complex)
        E = graph.num_edges
        if oriented.shape != (2 * E,):
            raise ShapeError("need one value per oriented edge")
        if np.max(np.abs(oriented[:E] + oriented[E:]), initial=0.0) > atol:
            raise ValidationError("cochain.edge", "1-part is not antisymmetric")
        return cls(vertex, oriented[:E])

    def oriented(self):
        """Values on all oriented edges, ``f(e-bar) = -f(e)`` filled in."""
        return np.concatenate([self.edge, -self.edge])

    def __add__(self, other):
        return Cochain(self.vertex + other.vertex, self.edge + other.edge)

    def __sub__(self, other):
        return Cochain(self.vertex - other.vertex, self.edge - other.edge)

    def __mul__(self, c):
        return Cochain(c * self.vertex, c * self.edge)

    __rmul__ = __mul__

    def __neg__(self):
        return Cochain(-self.vertex, -self.edge)


def _check(graph, f, measure=None):
    if f.vertex.shape != (graph.num_vertices,) or f.edge.shape != (graph.num_edges,):
        raise ShapeError("cochain does not match graph")
    if measure is not None:
        measure.check(graph)


def degree(graph, measure, x):
    """Weighted degree ``sum_{e in A_x} m(e)/m(x)``."""
    star = graph.star(x)
    if star.size == 0:
        return 0.0
    return float(np.sum(measure.edge[star % graph.num_edges]) / measure.vertex[x])


def inner_product(f, g, measure):
    """The weighted inner product, summed literally over all oriented edges."""
    if f.vertex.shape != g.vertex.shape or f.edge.shape != g.edge.shape:
        raise ShapeError("cochains live on different graphs")
    if f.vertex.shape != measure.vertex.shape or f.edge.shape != measure.edge.shape:
        raise ShapeError("measure does not match cochains")
    m_or = np.concatenate([measure.edge, measure.edge])
    vpart = np.sum(measure.vertex * f.vertex * np.conj(g.vertex))
    epart = 0.5 * np.sum(m_or * f.oriented() * np.conj(g.oriented()))
    return complex(vpart + epart)


def norm(f, measure):
    return float(np.sqrt(max(inner_product(f, f, measure).real, 0.0)))


def apply_d(graph, f0):
    """Coboundary ``(df)(e) = f(t(e)) - f(o(e))`` on canonical edges."""
    f0 = np.asarray(f0, dtype=complex)
    if f0.shape != (graph.num_vertices,):
        raise ShapeError("0-part has wrong length")
    return f0[graph.terminus] - f0[graph.origin]


def apply_d_star(graph, f1, measure):
    """Boundary operator ``(d*f)(x) = -sum_{e in A_x} m(e)/m(x) f(e)``."""
    f1 = np.asarray(f1, dtype=complex)
    if f1.shape != (graph.num_edges,):
        raise ShapeError("1-part has wrong length")
    measure.check(graph)
    w = measure.edge * f1
    n = graph.num_vertices
    # e in A_x contributes -w(e); e-bar in A_{t(e)} contributes -(-w(e)).
    out = -np.bincount(graph.origin, weights=w.real, minlength=n).astype(complex)
    out -= 1j * np.bincount(graph.origin, weights=w.imag, minlength=n)
    out += np.bincount(graph.terminus, weights=w.real, minlength=n)
    out += 1j * np.bincount(graph.terminus, weights=w.imag, minlength=n)
    return out / measure.vertex


def apply_gauss_bonnet(graph, f, measure):
    """``D f = d f_0 + d* f_1`` returned as a full cochain."""
    _check(graph, f, measure)
    return Cochain(apply_d_star(graph, f.edge, measure), apply_d(graph, f.vertex))


def _star_sums(graph, measure, oriented_values):
    """``S(x) = sum_{e in A_x} m(e)/m(x) * v(e)`` from the adjacency index."""
    ptr, ids = graph.star_arrays()
    E = graph.num_edges
    if E == 0:
        return np.zeros(graph.num_vertices, dtype=complex)
    terms = measure.edge[ids % E] * oriented_values[ids]
    counts = np.diff(ptr)
    owner = np.repeat(np.arange(graph.num_vertices), counts)
    out = np.zeros(graph.num_vertices, dtype=complex)
    np.add.at(out, owner, terms)
    return out / measure.vertex


def apply_laplacian0(graph, f0, measure):
    """``(Delta_0 f)(x) = sum_{e in A_x} m(e)/m(x) (f(t(e)) - f(x))``."""
    f0 = np.asarray(f0, dtype=complex)
    if f0.shape != (graph.num_vertices,):
        raise ShapeError("0-part has wrong length")
    measure.check(graph)
    k = np.arange(2 * graph.num_edges)
    diffs = f0[graph.oriented_terminus(k)] - f0[graph.oriented_origin(k)]
    return _star_sums(graph, measure, diffs)


def apply_laplacian1(graph, f1, measure):
    """Edge Laplacian.

    ``(Delta_1 f)(e) = sum_{e' in A_t(e)} m(e')/m(t(e)) f(e')
    - sum_{e' in A_o(e)} m(e')/m(o(e)) f(e')``, which equals ``-d d* f``.
    """
    f1 = np.asarray(f1, dtype=complex)
    if f1.shape != (graph.num_edges,):
        raise ShapeError("1-part has wrong length")
    measure.check(graph)
    S = _star_sums(graph, measure, np.concatenate([f1, -f1]))
    return S[graph.terminus] - S[graph.origin]


def gauss_bonnet_matrix(graph, measure, potential=None):
    """Sparse Hermitian matrix of ``D + R`` in the ``m^{1/2}``-normalised basis.

    Basis order: vertices ``0..n-1`` then canonical edges ``0..E-1``.  The
    matrix is exactly Hermitian because only the ``d`` block is computed and
    its adjoint block is taken as the conjugate transpose.
    """
    measure.check(graph)
    n, E = graph.num_vertices, graph.num_edges
    rows = np.concatenate([np.arange(E), np.arange(E)])
    cols = np.concatenate([graph.terminus, graph.origin])
    sq_e = np.sqrt(measure.edge)
    sq_v = np.sqrt(measure.vertex)
    vals = np.concatenate([sq_e / sq_v[graph.terminus], -sq_e / sq_v[graph.origin]])
    N = n + E
    d = sp.coo_matrix((vals.astype(complex), (rows + n, cols)), shape=(N, N)).tocsr()
    M = d + d.conj().T
    M = M.astype(complex)
    if potential is not None:
        diag = np.concatenate([potential.vertex, potential.edge])
        M = M + sp.diags(diag.astype(complex), format="csr")
    return M.tocsr()


def random_weighted_graph(rng, max_vertices=50, edge_factor=2.0, loop_prob=0.1):
    """Random multigraph with loops, positive measure and its generating data.

    Used by tests and the verification suites; returns ``(graph, measure)``.
    """
    n = int(rng.integers(1, max_vertices + 1))
    E = int(rng.integers(1, max(2, int(edge_factor * n)) + 1))
    o = rng.integers(0, n, size=E)
    t = rng.integers(0, n, size=E)
    loops = rng.random(E) < loop_prob
    t = np.where(loops, o, t)
    g = OrientedGraph(n, o, t)
    m = Measure(rng.uniform(0.2, 3.0, size=n), rng.uniform(0.2, 3.0, size=E))
    return g, m
