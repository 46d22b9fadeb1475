"""Shifted matrix symbols on Z^d and the symbol families of the perturbation.

A :class:`Symbol` is a pair ``(nu, b)`` with ``b: Z^d -> M_k(C)``.  Acting on
Fourier coefficients it gives

    (Op(b_nu) u)(mu) = b(mu + nu) u(mu + nu),

and its dagger is ``(-nu, mu -> b(mu + nu)^*)``, so that
``Op(b_nu)^* = Op(b_nu^dagger)``.  Sequences are evaluated lazily: ``func``
maps an array of lattice points of shape ``(P, d)`` to matrices ``(P, k, k)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..crystal import box_cells, cell_lookup
from ..floquet import TrigPolynomial

__all__ = [
    "Symbol",
    "SymbolFamily",
    "FourierSequence",
    "symbol_dagger",
    "op_apply",
    "op_matrix",
    "apply_family",
    "build_gb_symbols",
    "build_edge_symbols",
    "constant_symbol",
]

FourierSequence = TrigPolynomial


@dataclass(frozen=True, eq=False)
class Symbol:
    shift: tuple
    func: object
    k: int
    label: str = ""

    def __call__(self, cells):
        cells = np.asarray(cells, dtype=np.int64).reshape(-1, len(self.shift))
        return self.func(cells)


def constant_symbol(matrix, shift, label="", support=None):
    """``b(mu) = matrix`` on ``support`` (a list of lattice points) or everywhere."""
    matrix = np.asarray(matrix, dtype=complex)
    shift = tuple(int(s) for s in shift)

    def func(cells):
        out = np.broadcast_to(matrix, (cells.shape[0],) + matrix.shape).copy()
        if support is not None:
            hit = np.zeros(cells.shape[0], dtype=bool)
            for mu in support:
                hit |= np.all(cells == np.asarray(mu), axis=1)
            out[~hit] = 0
        return out

    return Symbol(shift, func, matrix.shape[0], label)


def symbol_dagger(symbol):
    nu = np.asarray(symbol.shift, dtype=np.int64)
    base = symbol.func
    inner = getattr(base, "_dagger_of", None)
    if inner is not None and tuple(-nu) == inner.shift:
        return inner  # exact involution, no re-wrapping

    def func(cells):
        return np.conj(np.swapaxes(base(cells + nu), -1, -2))

    func._dagger_of = symbol
    label = symbol.label[:-1] if symbol.label.endswith("†") else symbol.label + "†"
    return Symbol(tuple(int(-s) for s in nu), func, symbol.k, label)


def op_apply(symbol, u):
    """Apply ``Op(b_nu)`` to a finite coefficient sequence.

    The output box grows by ``|nu|_inf`` so nothing is dropped.
    """
    nu = np.asarray(symbol.shift, dtype=np.int64)
    cells = u.cells
    B = symbol(cells)                                       # b at input points
    vals = np.einsum("pij,pj->pi", B, u.coeffs)
    r = u.radius + int(np.abs(nu).max(initial=0))
    out = np.zeros(((2 * r + 1) ** u.dim, symbol.k), dtype=complex)
    dest = cell_lookup(cells - nu, r)
    np.add.at(out, dest, vals)
    return TrigPolynomial(r, u.dim, out)


def op_matrix(symbol, radius, dim):
    """Dense matrix of ``Op`` on the coefficient window ``|mu|_inf <= radius``.

    Entries mapping into or out of the window are kept; others dropped.
    """
    C = (2 * radius + 1) ** dim
    k = symbol.k
    cells = box_cells(radius, dim)
    nu = np.asarray(symbol.shift, dtype=np.int64)
    B = symbol(cells)
    dest = cell_lookup(cells - nu, radius)
    M = np.zeros((C * k, C * k), dtype=complex)
    for src, dst in enumerate(dest):
        if dst >= 0:
            M[dst * k:(dst + 1) * k, src * k:(src + 1) * k] = B[src]
    return M


@dataclass(frozen=True, eq=False)
class SymbolFamily:
    """Named symbols whose operators, each added to its dagger, sum to ``H - H0``.

    ``paired`` symbols enter as ``Op(b) + Op(b^dagger)``; ``plain`` symbols
    (the scalar long-range part, or families already closed under dagger)
    enter once.
    """

    k: int
    paired: list = field(default_factory=list)
    plain: list = field(default_factory=list)

    def all_symbols(self):
        out = []
        for s in self.paired:
            out += [s, symbol_dagger(s)]
        return out + list(self.plain)

    def is_zero(self, radius, dim):
        cells = box_cells(radius, dim)
        return all(np.all(s(cells) == 0) for s in self.all_symbols())


def apply_family(family, u):
    """``sum Op(s) u`` over the family, on a common box."""
    parts = [op_apply(s, u) for s in family.all_symbols()]
    r = max(p.radius for p in parts) if parts else u.radius
    total = np.zeros(((2 * r + 1) ** u.dim, family.k), dtype=complex)
    for p in parts:
        total += p.regrid(r).coeffs
    return TrigPolynomial(r, u.dim, total)


# ---------------------------------------------------------------------------
# Gauss-Bonnet family
# ---------------------------------------------------------------------------

def _measure(measure, crystal):
    return crystal.periodic_measure() if measure is None else measure


def build_gb_symbols(crystal, measure=None, potential=None, anchor=0):
    """Symbols of ``H - H0`` for the Gauss-Bonnet operator, size ``n + l``.

    * ``b(f0)`` (shift 0): entry ``(j, n + l)`` for ``o(e_l) = x_j`` equals
      ``(m_G(e)/m_G(x_j))^{1/2} - (m(mu e)/m(mu x_j))^{1/2}``.
    * ``b(e)`` (shift ``-eta(e)``), one per base edge: entry
      ``(t(e), n + e)`` equals
      ``(m(mu e)/m((mu + eta) t(e)))^{1/2} - (m_G(e)/m_G(t(e)))^{1/2}``.
    * ``b(f_s)`` (shift 0): diagonal ``(R_S + R_L - R_L(mu . x_anchor)) / 2``.
    * ``c`` (shift 0, plain): ``R_L(mu . x_anchor)`` times the identity.
    """
    m = _measure(measure, crystal)
    n, l = crystal.n, crystal.l
    k = n + l
    # periodic ratios use the same expressions as the perturbed ones, so that
    # m = m_Gamma gives exact zeros
    mg_v, mg_e = crystal.m_vertex, crystal.m_edge
    fam = SymbolFamily(k)

    def f0(cells):
        out = np.zeros((cells.shape[0], k, k), dtype=complex)
        mv = m.vertex_values(cells)
        me = m.edge_values(cells)
        for e in range(l):
            j = crystal.origin[e]
            out[:, j, n + e] += np.sqrt(mg_e[e] / mg_v[j]) - np.sqrt(me[:, e] / mv[:, j])
        return out

    fam.paired.append(Symbol((0,) * crystal.dim, f0, k, "b(f0)"))

    for e in range(l):
        eta = crystal.eta[e]
        t = crystal.terminus[e]

        def fe(cells, e=e, eta=eta, t=t):
            out = np.zeros((cells.shape[0], k, k), dtype=complex)
            me = m.edge_values(cells)[:, e]
            mt = m.vertex_values(cells + eta)[:, t]
            out[:, t, n + e] = np.sqrt(me / mt) - np.sqrt(mg_e[e] / mg_v[t])
            return out

        fam.paired.append(Symbol(tuple(int(-x) for x in eta), fe, k, f"b(e{e})"))

    if potential is not None and not potential.is_periodic:
        short, long_ = potential.short, potential.long

        def anchor_value(cells):
            return long_.vertex_values(cells)[:, anchor]

        def fs(cells):
            a = anchor_value(cells)[:, None]
            diag = np.concatenate([short.vertex_values(cells) + long_.vertex_values(cells) - a,
                                   short.edge_values(cells) + long_.edge_values(cells) - a], axis=1)
            out = np.zeros((cells.shape[0], k, k), dtype=complex)
            idx = np.arange(k)
            out[:, idx, idx] = 0.5 * diag
            return out

        def c(cells):
            out = np.zeros((cells.shape[0], k, k), dtype=complex)
            idx = np.arange(k)
            out[:, idx, idx] = anchor_value(cells)[:, None]
            return out

        zero = (0,) * crystal.dim
        fam.paired.append(Symbol(zero, fs, k, "b(fs)"))
        fam.plain.append(Symbol(zero, c, k, "c"))
    return fam


# ---------------------------------------------------------------------------
# edge-Laplacian family
# ---------------------------------------------------------------------------

_EDGE_KINDS = {
    # kind: (gate on (input j, output l), shift(eta_j, eta_l), sign)
    "a": (lambda c, j, l: c.terminus[j] == c.terminus[l], lambda ej, el: el - ej, -1.0),
    "b": (lambda c, j, l: c.origin[j] == c.terminus[l], lambda ej, el: el, 1.0),
    "c": (lambda c, j, l: c.terminus[j] == c.origin[l], lambda ej, el: -ej, 1.0),
    "d": (lambda c, j, l: c.origin[j] == c.origin[l], lambda ej, el: 0 * ej, -1.0),
}


def _edge_entry(crystal, m, kind, j, l):
    """Sequence for the single-entry symbol ``kind(e_j, e_l)`` at matrix position (l, j).

    With ``mu`` the argument of the symbol (the cell of the input edge
    ``e_j``), the output edge sits in cell ``mu - shift`` and the shared
    vertex in the cell where both edges meet.
    """
    _, shift_of, sign = _EDGE_KINDS[kind]
    eta_j, eta_l = crystal.eta[j], crystal.eta[l]
    shift = shift_of(eta_j, eta_l)
    mg_e = crystal.m_edge
    if kind in ("a", "b"):
        x = crystal.terminus[l]
        vertex_cell_offset = eta_l - shift      # t(mu_l e_l) = mu_l + eta_l
    else:
        x = crystal.origin[l]
        vertex_cell_offset = -shift             # o(mu_l e_l) = mu_l
    periodic = np.sqrt(mg_e[l] * mg_e[j]) / crystal.m_vertex[x]
    L = crystal.l

    def func(cells):
        out_cells = cells - shift
        ml = m.edge_values(out_cells)[:, l]
        mj = m.edge_values(cells)[:, j]
        mx = m.vertex_values(cells + vertex_cell_offset)[:, x]
        val = sign * (periodic - np.sqrt(ml * mj) / mx)
        out = np.zeros((cells.shape[0], L, L), dtype=complex)
        out[:, l, j] = val
        return out

    return Symbol(tuple(int(s) for s in shift), func, L, f"{kind}(e{j},e{l})")


def build_edge_symbols(crystal, measure=None, potential=None, anchor=0):
    """Single-entry symbols whose operators sum to ``Delta_1(m_G) - J Delta_1(m) J*``.

    Returns ``(family, by_kind)`` where ``by_kind[kind][(j, l)]`` is the symbol
    of ``kind`` for the pair ``(e_j, e_l)``; pairs failing the endpoint gate
    are absent.  The family lists all of them as ``plain`` members since it is
    closed under dagger as a whole.  With a non-periodic ``potential`` the
    edge potential parts ``b(f_s)`` (paired) and ``c`` (plain) are appended so
    the family sums to ``H - H0``.
    """
    m = _measure(measure, crystal)
    L = crystal.l
    fam = SymbolFamily(L)
    by_kind = {kind: {} for kind in _EDGE_KINDS}
    for kind, (gate, _, _) in _EDGE_KINDS.items():
        for j in range(L):
            for l in range(L):
                if gate(crystal, j, l):
                    s = _edge_entry(crystal, m, kind, j, l)
                    by_kind[kind][(j, l)] = s
                    fam.plain.append(s)
    if potential is not None and not potential.is_periodic:
        short, long_ = potential.short, potential.long
        zero = (0,) * crystal.dim
        idx = np.arange(L)

        def fs(cells):
            a = long_.vertex_values(cells)[:, anchor][:, None]
            out = np.zeros((cells.shape[0], L, L), dtype=complex)
            out[:, idx, idx] = 0.5 * (short.edge_values(cells) + long_.edge_values(cells) - a)
            return out

        def c(cells):
            out = np.zeros((cells.shape[0], L, L), dtype=complex)
            out[:, idx, idx] = long_.vertex_values(cells)[:, anchor][:, None]
            return out

        fam.paired.append(Symbol(zero, fs, L, "b(fs)"))
        fam.plain.append(Symbol(zero, c, L, "c"))
    return fam, by_kind
