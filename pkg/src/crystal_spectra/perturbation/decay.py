"""Dyadic decay scans for perturbation profiles, and path telescoping.

The short-range test sums ``lambda * sup_{lambda < |mu| < 2 lambda} ||b(mu)||``
over ``lambda = 1, 2, 4, ..., lambda_max``; the long-range test does the same
with ``max_j |c(mu + delta_j) - c(mu)|`` after checking that ``c`` itself
tends to a limit.  ``|mu|`` is the sup-norm.  Whether such a series converges
cannot be decided from finitely many terms, so the verdict is a ratio test on
the tail with fixed cut-offs; see :func:`classify_terms`.
"""
from __future__ import annotations

from collections import deque
from dataclasses import asdict, dataclass

import numpy as np

from ..crystal import CrystalVertex, edge_index, outgoing_edges, terminus
from ..errors import ConfigurationError, InsufficientDataError
from .profiles import RadialLaw
from .symbols import Symbol

__all__ = [
    "DecayReport",
    "decay_report",
    "classify_terms",
    "shell_points",
    "fundamental_paths",
    "path_telescope",
    "path_end",
    "CONVERGING_RATIO",
    "DIVERGING_RATIO",
]

CONVERGING_RATIO = 0.9
DIVERGING_RATIO = 0.99
TAIL = 5


@dataclass
class DecayReport:
    condition: str
    classification: str
    lambdas: list
    terms: list
    partial_sums: list
    tail_ratio: float
    sampled: bool
    tends_to_zero: bool | None = None
    limit_estimate: float | None = None
    note: str = ""

    def to_dict(self):
        return asdict(self)


def shell_points(lam, dim, max_points=20000, rng=None):
    """Lattice points with ``lam < |mu|_inf < 2 lam``.

    Exact in dimension 1.  Otherwise, if the shell is too large, the points
    on the axes and diagonals plus a seeded random sample are returned and
    the second value is ``True``.
    """
    lo, hi = lam + 1, 2 * lam - 1
    if hi < lo:
        return np.zeros((0, dim), dtype=np.int64), False
    if dim == 1:
        r = np.arange(lo, hi + 1)
        return np.concatenate([r, -r])[:, None], False
    count = (2 * hi + 1) ** dim - (2 * lo - 1) ** dim
    if count <= max_points:
        side = np.arange(-hi, hi + 1)
        grid = np.stack(np.meshgrid(*([side] * dim), indexing="ij"), -1).reshape(-1, dim)
        keep = np.abs(grid).max(axis=1) >= lo
        return grid[keep], False
    rng = np.random.default_rng(lam) if rng is None else rng
    radii = np.unique(np.linspace(lo, hi, 16).astype(np.int64))
    special = []
    signs = np.array(np.meshgrid(*([[-1, 0, 1]] * dim), indexing="ij")).reshape(dim, -1).T
    signs = signs[np.any(signs != 0, axis=1)]
    for r in radii:
        special.append(signs * r)
    pts = rng.integers(-hi, hi + 1, size=(max_points, dim))
    face = rng.integers(0, dim, size=max_points)
    pts[np.arange(max_points), face] = rng.choice([-1, 1], size=max_points) * rng.integers(lo, hi + 1, size=max_points)
    pts = np.concatenate(special + [pts])
    return pts, True


def _as_norm_fn(profile, dim):
    if isinstance(profile, Symbol):
        return lambda cells: np.linalg.norm(profile(cells), ord=2, axis=(-2, -1))
    if isinstance(profile, RadialLaw):
        return lambda cells: np.abs(profile.values(cells))
    if callable(profile):
        return lambda cells: np.abs(np.asarray(profile(cells), dtype=complex)).reshape(cells.shape[0], -1).max(axis=1)
    raise TypeError("profile must be a Symbol, RadialLaw or callable on lattice points")


def _as_value_fn(profile):
    if isinstance(profile, Symbol):
        return profile
    if isinstance(profile, RadialLaw):
        return profile.values
    return profile


def classify_terms(terms):
    """Ratio test on the last dyadic terms.

    Returns ``(label, median_ratio)``.  All-zero tails converge trivially.
    A median ratio below ``CONVERGING_RATIO`` is read as geometric decay,
    at least ``DIVERGING_RATIO`` (or growth from zero) as divergence, and
    anything in between as inconclusive.
    """
    tail = np.asarray(terms[-TAIL:], dtype=float)
    if np.all(tail == 0):
        return "converging", 0.0
    if np.any(tail[:-1] == 0):
        return "diverging", float("inf")
    ratios = tail[1:] / tail[:-1]
    rho = float(np.median(ratios))
    if rho < CONVERGING_RATIO:
        return "converging", rho
    if rho >= DIVERGING_RATIO:
        return "diverging", rho
    return "inconclusive", rho


def decay_report(profile, condition, lambda_max, dim=1, max_points=20000):
    """Classify the dyadic series of a profile.

    Parameters
    ----------
    profile : Symbol, RadialLaw or callable
        A callable receives lattice points ``(P, d)`` and returns values
        (scalars or matrices) per point.
    condition : {"short", "long"}
    lambda_max : int
        Largest dyadic scale; must be at least 4.
    """
    if condition not in ("short", "long"):
        raise ValueError("condition must be 'short' or 'long'")
    if lambda_max < 4:
        raise InsufficientDataError("need lambda_max >= 4 for at least three dyadic shells")
    if isinstance(profile, Symbol):
        dim = len(profile.shift)
    lambdas = [1 << i for i in range(int(np.log2(lambda_max)) + 1)]
    sampled = False
    terms = []
    if condition == "short":
        norm = _as_norm_fn(profile, dim)
        for lam in lambdas:
            pts, s = shell_points(lam, dim, max_points)
            sampled |= s
            terms.append(lam * float(norm(pts).max(initial=0.0)) if pts.shape[0] else 0.0)
        label, rho = classify_terms(terms)
        return DecayReport("short", label, lambdas, terms, list(np.cumsum(terms)), rho, sampled)

    value = _as_value_fn(profile)
    unit = np.eye(dim, dtype=np.int64)
    sups = []
    last = None
    for lam in lambdas:
        pts, s = shell_points(lam, dim, max_points)
        sampled |= s
        if pts.shape[0] == 0:
            terms.append(0.0)
            sups.append(0.0)
            continue
        base = np.asarray(value(pts), dtype=complex).reshape(pts.shape[0], -1)
        diff = np.zeros(pts.shape[0])
        for j in range(dim):
            step = np.asarray(value(pts + unit[j]), dtype=complex).reshape(pts.shape[0], -1)
            diff = np.maximum(diff, np.abs(step - base).max(axis=1))
        terms.append(lam * float(diff.max()))
        sups.append(float(np.abs(base).max()))
        last = base
    label, rho = classify_terms(terms)
    tail_sups = np.asarray(sups[-TAIL:])
    tends_to_zero = bool(tail_sups[-1] == 0 or tail_sups[-1] <= 0.5 * tail_sups[0])
    limit = float(np.mean(last.real)) if last is not None else 0.0
    note = ""
    if not tends_to_zero:
        note = ("profile does not decay to zero; a constant limit can be moved "
                "into the periodic potential")
    return DecayReport("long", label, lambdas, terms, list(np.cumsum(terms)), rho, sampled,
                       tends_to_zero, limit, note)


# ---------------------------------------------------------------------------
# path telescoping
# ---------------------------------------------------------------------------

def fundamental_paths(crystal, start=0):
    """Shortest lifted paths from ``x_start`` in cell 0 to every base element in cell 0.

    Breadth-first search on the lifted graph restricted to cells with
    ``|mu|_inf <= 1``.  Returns ``{("vertex", j): [edges], ("edge", k): [edges]}``;
    an edge target's path ends at the origin of ``0 . e_k``.
    """
    zero = (0,) * crystal.dim
    src = CrystalVertex(start, zero)
    prev = {src: None}
    queue = deque([src])
    while queue:
        v = queue.popleft()
        for e in outgoing_edges(crystal, v):
            w = terminus(crystal, e)
            if max(abs(c) for c in w.cell) > 1 or w in prev:
                continue
            prev[w] = (v, e)
            queue.append(w)

    def path_to(v):
        path = []
        while prev[v] is not None:
            v, e = prev[v]
            path.append(e)
        return path[::-1]

    out = {}
    for j in range(crystal.n):
        tgt = CrystalVertex(j, zero)
        if tgt in prev:
            out[("vertex", j)] = path_to(tgt)
    for k in range(crystal.l):
        o = CrystalVertex(int(crystal.origin[k]), zero)
        if o in prev:
            out[("edge", k)] = path_to(o)
    return out


def path_telescope(crystal, field, start, target, mu, paths=None, path=None):
    """Telescoping bound on ``|R(mu . end) - R(mu . x_start)|`` along a fixed path.

    Parameters
    ----------
    field : lattice field (e.g. the long-range potential part)
    start : int
        Base vertex the path starts from (in cell 0 before translation).
    target : ("vertex", j) or ("edge", k)
        Looked up in ``paths`` (default: :func:`fundamental_paths`).
    mu : array_like, shape (d,) or (P, d)
    path : list of CrystalEdge, optional
        Explicit path from ``0 . x_start``; overrides the lookup.  Its end is
        then wherever the path ends, and ``target`` is ignored unless it
        names an edge.

    Each path edge ``e`` contributes ``|R(t(e)) - R(e)| + |R(e) - R(o(e))|``.
    An edge target adds the last half step ``|R(mu e_k) - R(o(mu e_k))|``.
    """
    if path is None:
        paths = fundamental_paths(crystal, start) if paths is None else paths
        if target not in paths:
            raise ConfigurationError(f"no stored path from vertex {start} to {target}")
        path = paths[target]
    mu = np.atleast_2d(np.asarray(mu, dtype=np.int64))
    total = np.zeros(mu.shape[0])

    def vertex_val(cells, j):
        return field.vertex_values(cells)[:, j]

    def edge_val(cells, k):
        return field.edge_values(cells)[:, k]

    for e in path:
        cell = mu + np.asarray(e.cell)
        eta = np.asarray(edge_index(crystal, e))
        # a reversed edge carries the value of the positive lift it reverses
        pos = cell + eta if e.reversed else cell
        ev = edge_val(pos, e.index)
        o_base = crystal.terminus[e.index] if e.reversed else crystal.origin[e.index]
        t_base = crystal.origin[e.index] if e.reversed else crystal.terminus[e.index]
        total += np.abs(vertex_val(cell + eta, t_base) - ev) + np.abs(ev - vertex_val(cell, o_base))
    if target is not None and target[0] == "edge":
        k = target[1]
        total += np.abs(edge_val(mu, k) - vertex_val(mu, crystal.origin[k]))
    return total if total.size > 1 else float(total[0])


def path_end(crystal, start, path):
    """Lattice element reached by ``path`` from ``0 . x_start``."""
    v = CrystalVertex(start, (0,) * crystal.dim)
    for e in path:
        v = terminus(crystal, e)
    return v
