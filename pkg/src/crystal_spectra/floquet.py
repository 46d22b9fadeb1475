"""Bloch fibres, the Floquet-Bloch transform and band structures.

Quasimomenta ``xi`` live in ``[0, 1)^d`` and act through
``xi(mu) = exp(2 pi i xi . mu)``.  Fibre matrices use the basis
``x_1..x_n, e_1..e_l`` scaled by the square root of the periodic measure.
The transform of a cochain ``f`` is

    U f(xi)_j = m(x_j)^{1/2} sum_mu exp(-2 pi i xi . mu) f(mu . x_j)

(and likewise for positive edges), so the Fourier coefficients of the
transformed function are the measure-normalised values ``m^{1/2} f(mu . )``.
"""
from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .crystal import LatticeCochain, box_cells, cell_lookup
from .errors import NumericError, ShapeError

__all__ = [
    "TrigPolynomial",
    "BandStructure",
    "ThresholdEstimate",
    "torus_grid",
    "assemble_h0",
    "assemble_h1_edge",
    "bloch_transform",
    "inverse_bloch",
    "to_trig_polynomial",
    "from_trig_polynomial",
    "compute_bands",
    "band_values",
    "estimate_thresholds",
    "refined_band_intervals",
    "merge_intervals",
    "bands_csv",
    "bands_summary",
    "thread_count",
]


def thread_count(default=None):
    """Worker cap from ``CRYSTAL_SPECTRA_THREADS`` (at least 1)."""
    raw = os.environ.get("CRYSTAL_SPECTRA_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    if default is not None:
        return max(1, int(default))
    return max(1, min(4, os.cpu_count() or 1))


def torus_grid(N, dim):
    """Grid ``k / N`` in lexicographic order, shape (N**dim, dim)."""
    if N < 1:
        raise ValueError("grid size must be positive")
    axes = np.meshgrid(*([np.arange(N) / N] * dim), indexing="ij")
    return np.stack([a.reshape(-1) for a in axes], axis=1)


def _xi(crystal, xi):
    xi = np.asarray(xi, dtype=float)
    if xi.ndim == 0 and crystal.dim == 1:
        xi = xi.reshape(1)
    if xi.shape[-1:] != (crystal.dim,):
        raise ShapeError(f"quasimomentum must have {crystal.dim} components")
    return xi


# ---------------------------------------------------------------------------
# fibres
# ---------------------------------------------------------------------------

def assemble_h0(crystal, xi, include_potential=True):
    """Fibre ``h0(xi)`` of the periodic Gauss-Bonnet operator.

    Entry ``(j, n + l)`` collects ``+ w exp(-2 pi i xi . eta)`` when edge ``l``
    ends at ``x_j`` and ``- w`` when it starts there, ``w`` being the square
    root of ``m(e_l) / m(x_j)``; for a loop both cases apply.  The lower-left
    block is the conjugate transpose.  Accepts ``xi`` of shape (..., d).
    """
    xi = _xi(crystal, xi)
    n, l = crystal.n, crystal.l
    batch = xi.shape[:-1]
    h = np.zeros(batch + (n + l, n + l), dtype=complex)
    phase = np.exp(-2j * np.pi * (xi @ crystal.eta.T))  # (..., l)
    for k in range(l):
        o, t = int(crystal.origin[k]), int(crystal.terminus[k])
        w_o = np.sqrt(crystal.m_edge[k] / crystal.m_vertex[o])
        if o == t:
            entry = w_o * (-1.0 + phase[..., k])
            h[..., o, n + k] = entry
            h[..., n + k, o] = np.conj(entry)
            continue
        w_t = np.sqrt(crystal.m_edge[k] / crystal.m_vertex[t])
        h[..., t, n + k] = w_t * phase[..., k]
        h[..., n + k, t] = w_t * np.conj(phase[..., k])
        h[..., o, n + k] = -w_o
        h[..., n + k, o] = -w_o
    if include_potential:
        idx = np.arange(n + l)
        h[..., idx, idx] = np.concatenate([crystal.r_vertex, crystal.r_edge])
    return h


def assemble_h1_edge(crystal, xi):
    """Fibre of the periodic edge operator ``-Delta_1 + R`` on C^l."""
    h = assemble_h0(crystal, xi, include_potential=False)
    n = crystal.n
    block = h[..., n:, :n] @ h[..., :n, n:]
    idx = np.arange(crystal.l)
    block[..., idx, idx] += crystal.r_edge
    return block


# ---------------------------------------------------------------------------
# transform
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TrigPolynomial:
    """Coefficients ``c(mu) in C^k`` on the box ``|mu|_inf <= radius``.

    The function it stands for is ``u(xi) = sum_mu c(mu) exp(-2 pi i xi . mu)``.
    """

    radius: int
    dim: int
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.ndim != 2 or c.shape[0] != (2 * self.radius + 1) ** self.dim:
            raise ShapeError("need one coefficient row per cell of the box")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def k(self):
        return self.coeffs.shape[1]

    @property
    def cells(self):
        return box_cells(self.radius, self.dim)

    @classmethod
    def zeros(cls, radius, dim, k):
        return cls(radius, dim, np.zeros(((2 * radius + 1) ** dim, k)))

    @classmethod
    def from_dict(cls, mapping, dim, k, radius=None):
        """Build from ``{mu: vector}``; the box is the smallest that fits."""
        r = max((max(abs(c) for c in mu) for mu in mapping), default=0)
        r = r if radius is None else radius
        out = np.zeros(((2 * r + 1) ** dim, k), dtype=complex)
        for mu, vec in mapping.items():
            out[int(cell_lookup(np.array(mu, ndmin=1), r))] += vec
        return cls(r, dim, out)

    def regrid(self, radius):
        target = box_cells(radius, self.dim)
        src = cell_lookup(target, self.radius)
        keep = src >= 0
        lost = np.ones(self.coeffs.shape[0], dtype=bool)
        lost[src[keep]] = False
        if np.any(self.coeffs[lost] != 0):
            raise ValueError("regrid would drop nonzero coefficients")
        out = np.zeros((target.shape[0], self.k), dtype=complex)
        out[keep] = self.coeffs[src[keep]]
        return TrigPolynomial(radius, self.dim, out)

    def coefficient(self, mu):
        i = int(cell_lookup(np.array(mu, ndmin=1), self.radius))
        return self.coeffs[i] if i >= 0 else np.zeros(self.k, dtype=complex)

    def evaluate(self, xi):
        xi = np.asarray(xi, dtype=float)
        phases = np.exp(-2j * np.pi * (xi @ self.cells.T))
        return phases @ self.coeffs

    def __add__(self, other):
        r = max(self.radius, other.radius)
        return TrigPolynomial(r, self.dim, self.regrid(r).coeffs + other.regrid(r).coeffs)

    def __sub__(self, other):
        r = max(self.radius, other.radius)
        return TrigPolynomial(r, self.dim, self.regrid(r).coeffs - other.regrid(r).coeffs)

    def max_abs(self):
        return float(np.abs(self.coeffs).max(initial=0.0))


def to_trig_polynomial(crystal, f):
    """Coefficients of ``I U f``: values scaled by the periodic measure root."""
    coeffs = np.concatenate([f.vertex * np.sqrt(crystal.m_vertex),
                             f.edge * np.sqrt(crystal.m_edge)], axis=1)
    return TrigPolynomial(f.radius, f.dim, coeffs)


def from_trig_polynomial(crystal, u):
    n = crystal.n
    return LatticeCochain(u.radius, u.dim,
                          u.coeffs[:, :n] / np.sqrt(crystal.m_vertex),
                          u.coeffs[:, n:] / np.sqrt(crystal.m_edge))


def bloch_transform(crystal, f, xi):
    """``I U f`` at one or many quasimomenta by direct summation, shape (..., n+l)."""
    xi = _xi(crystal, xi)
    cells = box_cells(f.radius, f.dim)
    phases = np.exp(-2j * np.pi * (xi @ cells.T))  # (..., C)
    vals = np.concatenate([f.vertex * np.sqrt(crystal.m_vertex),
                           f.edge * np.sqrt(crystal.m_edge)], axis=1)
    return phases @ vals


def inverse_bloch(crystal, samples):
    """Recover a cochain from fibre samples on the ``N^d`` grid ``k / N``.

    ``samples`` has shape ``(N,)*d + (n+l,)``.  Coefficients are read off by
    the discrete Fourier inversion and placed at ``|mu|_inf <= (N-1)//2``.
    The result is exact only if the true support lies inside that box; a
    larger support aliases silently.
    """
    samples = np.asarray(samples, dtype=complex)
    d = crystal.dim
    if samples.ndim != d + 1 or samples.shape[-1] != crystal.size:
        raise ShapeError("samples must have shape (N,)*d + (n+l,)")
    N = samples.shape[0]
    if any(s != N for s in samples.shape[:d]):
        raise ShapeError("grid must have the same size along every axis")
    coeffs = np.fft.ifftn(samples, axes=tuple(range(d)))
    radius = (N - 1) // 2
    cells = box_cells(radius, d)
    take = tuple((cells % N).T)
    u = TrigPolynomial(radius, d, coeffs[take])
    return from_trig_polynomial(crystal, u)


def bloch_grid(crystal, f, N):
    """``I U f`` on the whole ``N^d`` grid, shape ``(N,)*d + (n+l,)``."""
    xi = torus_grid(N, crystal.dim)
    return bloch_transform(crystal, f, xi).reshape((N,) * crystal.dim + (crystal.size,))


# ---------------------------------------------------------------------------
# bands
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BandStructure:
    """Sorted fibre eigenvalues on the uniform torus grid.

    ``eigenvalues[p, k]`` is the ``k``-th band at ``xi[p]``; rows follow the
    lexicographic grid order.
    """

    crystal: object
    grid_size: int
    xi: np.ndarray
    eigenvalues: np.ndarray
    fibre: str = "gauss_bonnet"
    band_min: np.ndarray = field(init=False)
    band_max: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "band_min", self.eigenvalues.min(axis=0))
        object.__setattr__(self, "band_max", self.eigenvalues.max(axis=0))

    @property
    def num_bands(self):
        return self.eigenvalues.shape[1]

    @property
    def band_intervals(self):
        return [(float(a), float(b)) for a, b in zip(self.band_min, self.band_max)]

    def union(self, gap_tol=0.0):
        """Band intervals merged into disjoint pieces, sorted."""
        return merge_intervals(self.band_intervals, gap_tol)

    def gaps(self):
        u = self.union()
        return [(u[i][1], u[i + 1][0]) for i in range(len(u) - 1)]

    def grid_array(self):
        """Eigenvalues reshaped to ``(N,)*d + (bands,)``."""
        return self.eigenvalues.reshape((self.grid_size,) * self.crystal.dim + (self.num_bands,))


def _fibre(crystal, fibre):
    if fibre == "gauss_bonnet":
        return lambda xi: assemble_h0(crystal, xi)
    if fibre == "edge_laplacian":
        return lambda xi: assemble_h1_edge(crystal, xi)
    raise ValueError(f"unknown fibre {fibre!r}")


def band_values(crystal, xi, fibre="gauss_bonnet"):
    """Sorted eigenvalues of the fibre at each point of ``xi``, shape (P, k)."""
    xi = _xi(crystal, xi)
    mats = _fibre(crystal, fibre)(xi)
    try:
        return np.linalg.eigvalsh(mats)
    except np.linalg.LinAlgError:
        flat_xi = xi.reshape(-1, crystal.dim)
        flat = mats.reshape((-1,) + mats.shape[-2:])
        for p in range(flat.shape[0]):
            try:
                np.linalg.eigvalsh(flat[p])
            except np.linalg.LinAlgError:
                raise NumericError("fibre eigensolver failed",
                                   {"xi": flat_xi[p].tolist()}) from None
        raise


def compute_bands(crystal, N, fibre="gauss_bonnet", threads=None, chunk=8192):
    """Diagonalise the fibre on the ``N^d`` grid.

    Grid chunks are solved in a thread pool whose size is capped by
    ``CRYSTAL_SPECTRA_THREADS``; chunks are reassembled in grid order so the
    result does not depend on the worker count.
    """
    if N < 2:
        raise ValueError("grid size must be at least 2")
    xi = torus_grid(N, crystal.dim)
    bounds = [(s, min(s + chunk, xi.shape[0])) for s in range(0, xi.shape[0], chunk)]
    workers = min(thread_count(threads), len(bounds))
    solve = lambda b: band_values(crystal, xi[b[0]:b[1]], fibre)  # noqa: E731
    if workers == 1:
        parts = [solve(b) for b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(solve, bounds))
    return BandStructure(crystal, N, xi, np.concatenate(parts), fibre)


# ---------------------------------------------------------------------------
# thresholds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ThresholdEstimate:
    values: list
    flat_bands: list
    band_endpoints: list
    critical_values: list


def _stencil(dim, steps):
    axes = np.meshgrid(*([np.arange(-steps, steps + 1)] * dim), indexing="ij")
    return np.stack([a.reshape(-1) for a in axes], axis=1).astype(float)


def _zoom(objective, start, h0, dim, h_min=1e-11, steps=2, max_iter=400, local=False):
    """Minimise ``objective`` (vectorised over points) by shrinking grid searches.

    The step halves whenever the centre is best; with ``local`` it halves
    every round, which bounds the total travel by about ``2 * steps * h0``.
    """
    offsets = _stencil(dim, steps)
    centre = offsets.shape[0] // 2
    best = np.asarray(start, dtype=float)
    h = h0
    for _ in range(max_iter):
        if h <= h_min:
            break
        vals = objective(best + h * offsets)
        i = int(np.argmin(vals))
        if vals[i] < vals[centre]:
            best = best + h * offsets[i]
            if not local:
                continue
        h /= 2.0
    return best


def _band_fn(bands, k):
    return lambda pts: band_values(bands.crystal, np.mod(pts, 1.0), bands.fibre)[:, k]


def _refined_edges(bands, k, g, h_min):
    f = _band_fn(bands, k)
    N, d = bands.grid_size, bands.crystal.dim
    h0 = 1.0 / N
    lo, hi = float(g.min()), float(g.max())
    amin = np.array(np.unravel_index(np.argmin(g), g.shape)) / N
    amax = np.array(np.unravel_index(np.argmax(g), g.shape)) / N
    lo = min(lo, float(f(_zoom(f, amin, h0, d, h_min)[None])[0]))
    hi = max(hi, float(f(_zoom(lambda p: -f(p), amax, h0, d, h_min)[None])[0]))
    return lo, hi


def refined_band_intervals(bands, refinement=40, flat_tol=1e-10):
    """Band ranges with each grid extremum refined off the grid.

    A grid only samples the band functions, so its min/max can sit inside the
    true range; the refinement zooms from the best grid point.
    """
    grid = bands.grid_array()
    h_min = max(1.0 / bands.grid_size / 2.0 ** refinement, 1e-12)
    out = []
    for k in range(bands.num_bands):
        g = grid[..., k]
        if float(g.max() - g.min()) <= flat_tol:
            out.append((float(g.min()), float(g.max())))
        else:
            out.append(_refined_edges(bands, k, g, h_min))
    return out


def merge_intervals(intervals, gap_tol=0.0):
    """Sorted disjoint union of closed intervals."""
    pieces = sorted(intervals)
    merged = [list(pieces[0])]
    for a, b in pieces[1:]:
        if a <= merged[-1][1] + gap_tol:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    return [tuple(p) for p in merged]


def estimate_thresholds(bands, refinement=40, dedupe_tol=1e-6, max_candidates=64, flat_tol=1e-10):
    """Band endpoints and interior critical values, sorted and deduplicated.

    Endpoints are refined by zooming on the band function.  Interior
    candidates are grid points where every axis shows a sign change (or a
    zero) in the one-sided differences.  Local extrema (judged against all
    neighbours) are refined on the value; the remaining candidates are
    polished by minimising a central-difference gradient norm and kept only
    if that gradient ends up small.
    ``refinement`` bounds the number of zoom levels.  This is a heuristic.
    """
    crystal, N, d = bands.crystal, bands.grid_size, bands.crystal.dim
    grid = bands.grid_array()
    h0 = 1.0 / N
    h_min = max(h0 / 2.0 ** refinement, 1e-12)
    ends, crit, flats = [], [], []

    for k in range(bands.num_bands):
        g = grid[..., k]
        f = _band_fn(bands, k)
        lo, hi = float(g.min()), float(g.max())
        if hi - lo <= flat_tol:
            flats.append(lo)
            ends.append(lo)
            continue
        ends.extend(_refined_edges(bands, k, g, h_min))

        tie = 1e-12 * max(1.0, abs(lo), abs(hi))
        is_crit = np.ones(g.shape, dtype=bool)
        for ax in range(d):
            fwd = np.roll(g, -1, axis=ax) - g
            bwd = g - np.roll(g, 1, axis=ax)
            is_crit &= fwd * bwd <= tie * tie
        is_min = is_crit.copy()
        is_max = is_crit.copy()
        for off in _stencil(d, 1).astype(int):
            if not off.any():
                continue
            nb = np.roll(g, tuple(-off), axis=tuple(range(d)))
            is_min &= nb >= g - tie
            is_max &= nb <= g + tie
        kind = np.where(is_min, 0, np.where(is_max, 1, 2))

        picked, seen = [], {0: [], 1: [], 2: []}
        idx = np.argwhere(is_crit)
        vals = g[tuple(idx.T)]
        for p in np.argsort(vals, kind="stable"):
            c = int(kind[tuple(idx[p])])
            if all(abs(vals[p] - v) > dedupe_tol for v in seen[c]):
                seen[c].append(vals[p])
                picked.append((c, idx[p]))
            if len(picked) >= max_candidates:
                break

        eps = 1e-6
        unit = np.eye(d)

        def grad_norm(pts):
            total = np.zeros(pts.shape[0])
            for ax in range(d):
                diff = f(pts + eps * unit[ax]) - f(pts - eps * unit[ax])
                total += (diff / (2 * eps)) ** 2
            return np.sqrt(total)

        grad_tol = 1e-4 * max(1.0, hi - lo)
        for c, p in picked:
            start = p / N
            if c == 0:
                best = _zoom(f, start, h0, d, h_min)
            elif c == 1:
                best = _zoom(lambda q: -f(q), start, h0, d, h_min)
            else:
                # polish locally; a kink also has vanishing central differences
                # only at one exact point, so saddles must show a small gradient
                best = _zoom(grad_norm, start, h0 / 4, d, max(h_min, 1e-7), local=True)
                if grad_norm(best[None])[0] > grad_tol:
                    continue
            crit.append(float(f(best[None])[0]))

    values = sorted(ends + crit + flats)
    out = []
    for v in values:
        if not out or v - out[-1] > dedupe_tol:
            out.append(v)
    return ThresholdEstimate(out, sorted(set(flats)), sorted(ends), sorted(crit))


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def bands_csv(bands):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    d = bands.crystal.dim
    w.writerow([f"xi_{i + 1}" for i in range(d)] + [f"band_{k + 1}" for k in range(bands.num_bands)])
    for x, ev in zip(bands.xi, bands.eigenvalues):
        w.writerow([repr(float(v)) for v in x] + [repr(float(v)) for v in ev])
    return buf.getvalue()


def bands_summary(bands, thresholds):
    return {
        "grid_size": bands.grid_size,
        "dimension": bands.crystal.dim,
        "fibre": bands.fibre,
        "band_intervals": [list(iv) for iv in bands.band_intervals],
        "band_union": [list(iv) for iv in bands.union()],
        "gaps": [list(g) for g in bands.gaps()],
        "thresholds": list(thresholds.values),
        "flat_bands": list(thresholds.flat_bands),
    }
