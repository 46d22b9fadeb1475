"""Truncated perturbed operators, their eigenvalues, and where those fall.

The perturbed Gauss-Bonnet operator ``H = J D(X, m) J* + R`` is unitarily the
operator ``D(X, m) + R`` read in the ``m^{1/2}``-normalised basis: ``J`` maps
that basis onto the ``m_Gamma^{1/2}``-normalised one entry by entry.  So the
matrix of ``H`` in the ``m_Gamma^{1/2}`` basis is the normalised matrix of the
perturbed graph operator, and it is Hermitian by construction.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import graph_core as gc
from .crystal import truncate
from .errors import NumericError
from .floquet import BandStructure, merge_intervals, refined_band_intervals, thread_count

__all__ = [
    "HermitianMatrixHandle",
    "EigenResult",
    "SpectrumReport",
    "StabilityScan",
    "assemble_truncated",
    "eigensolve",
    "band_union_for",
    "classify_spectrum",
    "gap_stability_scan",
    "DENSE_LIMIT",
    "OPERATORS",
]

DENSE_LIMIT = 2000
OPERATORS = ("gauss_bonnet", "edge_laplacian")
RESIDUAL_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class HermitianMatrixHandle:
    """Hermitian matrix, dense below :data:`DENSE_LIMIT` and CSR above.

    ``warning`` is set when the truncation does not contain the perturbation
    with one hop to spare.
    """

    matrix: object
    operator: str = "gauss_bonnet"
    radius: int | None = None
    warning: str | None = None

    @property
    def dimension(self):
        return self.matrix.shape[0]

    @property
    def storage(self):
        return "sparse" if sp.issparse(self.matrix) else "dense"

    def entry(self, i, j):
        return complex(self.matrix[i, j])

    def toarray(self):
        return self.matrix.toarray() if sp.issparse(self.matrix) else np.asarray(self.matrix)

    def norm_bound(self):
        """Upper bound on the operator norm (max absolute row sum)."""
        if sp.issparse(self.matrix):
            return float(np.asarray(abs(self.matrix).sum(axis=1)).max(initial=0.0))
        return float(np.abs(self.matrix).sum(axis=1).max(initial=0.0))

    def matvec(self, v):
        return self.matrix @ v


def _support_warning(crystal, radius, measure, potential):
    reach = -1
    for part in (measure, potential):
        if part is None:
            continue
        fields = [part]
        if hasattr(part, "short"):
            fields = [part.short, part.long]
        for f in fields:
            s = getattr(f, "support_radius", None)
            if s is None:
                continue  # decaying law: unbounded support by design
            reach = max(reach, s)
    if reach >= 0 and reach + crystal.max_hop > radius:
        return (f"truncation radius {radius} does not contain the perturbation "
                f"(support radius {reach}) with one hop to spare")
    return None


def assemble_truncated(crystal, measure=None, potential=None, radius=1, operator="gauss_bonnet",
                       storage=None):
    """Matrix of the perturbed operator on the ball ``|mu|_inf <= radius``.

    Parameters
    ----------
    measure, potential : lattice fields or None
        ``None`` means the periodic data of ``crystal``.
    operator : {"gauss_bonnet", "edge_laplacian"}
        The edge variant is ``-J Delta_1(X, m) J* + R`` on the truncated edges.
    storage : {"dense", "sparse"}, optional
        Forces a storage mode; by default dense below :data:`DENSE_LIMIT`.
    """
    if operator not in OPERATORS:
        raise ValueError(f"operator must be one of {OPERATORS}")
    if not isinstance(radius, (int, np.integer)) or radius < 1:
        raise ValueError("radius must be an integer >= 1")
    trunc = truncate(crystal, int(radius), measure=measure, potential=potential)
    gb = gc.gauss_bonnet_matrix(trunc.graph, trunc.measure)
    if operator == "gauss_bonnet":
        diag = np.concatenate([trunc.potential.vertex, trunc.potential.edge])
        M = gb + sp.diags(diag.astype(complex), format="csr")
    else:
        n = trunc.num_vertices
        grad = gb[n:, :n]
        M = (grad @ grad.conj().T).tocsr() + sp.diags(trunc.potential.edge.astype(complex), format="csr")
    M = ((M + M.conj().T) * 0.5).tocsr()
    M.sort_indices()
    mode = storage or ("dense" if M.shape[0] < DENSE_LIMIT else "sparse")
    mat = M.toarray() if mode == "dense" else M
    return HermitianMatrixHandle(mat, operator, int(radius),
                                 _support_warning(crystal, radius, measure, potential))


@dataclass(frozen=True, eq=False)
class EigenResult:
    values: np.ndarray
    vectors: np.ndarray | None
    method: str
    max_residual: float


def _residuals(handle, values, vectors):
    R = handle.matvec(vectors) - vectors * values[None, :]
    return np.linalg.norm(R, axis=0)


def _check(handle, values, vectors, method):
    scale = max(handle.norm_bound(), 1.0)
    res = _residuals(handle, values, vectors)
    worst = float(res.max(initial=0.0))
    if worst > RESIDUAL_TOL * scale:
        raise NumericError("eigenpair residual above tolerance",
                           {"method": method, "max_residual": worst, "norm_bound": scale})
    return worst


def eigensolve(handle, k=None, sigma=None, which="LM", return_vectors=False, maxiter=None):
    """Eigenvalues of a Hermitian handle, sorted ascending.

    With ``k is None`` the whole spectrum is computed densely.  Otherwise
    ``k`` eigenvalues come from ARPACK: the ``which`` end of the spectrum, or
    the ones nearest ``sigma`` in shift-invert mode.  Every returned pair is
    checked against ``||A v - lambda v|| <= 1e-9 ||A||``.
    """
    if k is None or k >= handle.dimension - 1:
        A = handle.toarray()
        try:
            values, vectors = sla.eigh(A, driver="evd")
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise NumericError("dense eigensolver failed", {"dimension": handle.dimension,
                                                            "error": str(exc)}) from None
        worst = _check(handle, values, vectors, "dense")
        if k is not None:
            values, vectors = _select(values, vectors, k, sigma, which)
        return EigenResult(values, vectors if return_vectors else None, "dense", worst)

    A = handle.matrix if sp.issparse(handle.matrix) else sp.csr_matrix(handle.matrix)
    v0 = np.ones(handle.dimension, dtype=complex) / np.sqrt(handle.dimension)
    try:
        if sigma is None:
            values, vectors = spla.eigsh(A, k=k, which=which, v0=v0, maxiter=maxiter, tol=1e-13)
        else:
            values, vectors = spla.eigsh(A, k=k, sigma=sigma, which="LM", v0=v0, maxiter=maxiter, tol=1e-13)
    except spla.ArpackNoConvergence as exc:
        raise NumericError("iterative eigensolver did not converge",
                           {"k": k, "sigma": sigma, "converged": len(exc.eigenvalues),
                            "dimension": handle.dimension}) from None
    except (RuntimeError, ValueError) as exc:
        raise NumericError("iterative eigensolver failed", {"k": k, "sigma": sigma, "error": str(exc)}) from None
    order = np.argsort(values)
    values, vectors = values[order], vectors[:, order]
    worst = _check(handle, values, vectors, "iterative")
    return EigenResult(values, vectors if return_vectors else None, "iterative", worst)


def _select(values, vectors, k, sigma, which):
    if sigma is not None:
        idx = np.argsort(np.abs(values - sigma), kind="stable")[:k]
    elif which == "LA":
        idx = np.arange(len(values))[-k:]
    elif which == "SA":
        idx = np.arange(k)
    else:
        idx = np.argsort(-np.abs(values), kind="stable")[:k]
    idx = np.sort(idx)
    return values[idx], vectors[:, idx]


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------

def band_union_for(bands):
    """Band union as a list of intervals.

    A :class:`BandStructure` has its grid extrema refined off the grid first;
    a list of ``(lo, hi)`` pairs is merged as given.
    """
    if isinstance(bands, BandStructure):
        return merge_intervals(refined_band_intervals(bands))
    return merge_intervals([(float(a), float(b)) for a, b in bands])


def _clusters(values, width):
    out = []
    for v in values:
        if out and v - out[-1][-1] <= width:
            out[-1].append(v)
        else:
            out.append([v])
    return [{"value": float(np.mean(c)), "multiplicity": len(c)} for c in out]


@dataclass
class SpectrumReport:
    """Eigenvalues of one truncation with their positions against the bands.

    Labels are ``"band"``, ``"near_threshold"`` (within ``tol`` of a band
    edge or a supplied threshold) or ``"gap"``.  ``gaps`` lists every open
    gap of the band union, including the two unbounded ones, with its
    eigenvalue clusters.
    """

    eigenvalues: list
    labels: list
    gaps: list
    band_union: list
    tol: float
    radius: int | None = None
    warning: str | None = None

    @property
    def gap_eigenvalues(self):
        return [v for v, lab in zip(self.eigenvalues, self.labels) if lab == "gap"]

    @property
    def gap_count(self):
        return sum(g["count"] for g in self.gaps)

    def to_dict(self):
        return {
            "radius": self.radius,
            "tol": self.tol,
            "band_union": [list(iv) for iv in self.band_union],
            "gap_count": self.gap_count,
            "gaps": self.gaps,
            "eigenvalues": self.eigenvalues,
            "labels": self.labels,
            "warning": self.warning,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self):
        lines = [f"radius {self.radius}  eigenvalues {len(self.eigenvalues)}  gap eigenvalues {self.gap_count}"]
        for g in self.gaps:
            lines.append(f"  gap ({g['lower']:.6g}, {g['upper']:.6g}): {g['count']}")
            for c in g["clusters"]:
                lines.append(f"    {c['value']:.12g}  x{c['multiplicity']}")
        return "\n".join(lines) + "\n"


def classify_spectrum(eigenvalues, bands, tol=1e-6, thresholds=(), radius=None, cluster_width=1e-6,
                      warning=None):
    """Label eigenvalues against the band union and count gap eigenvalues."""
    union = band_union_for(bands)
    values = np.sort(np.asarray(eigenvalues, dtype=float))
    edges = np.array([x for iv in union for x in iv] + [float(t) for t in thresholds])
    labels = []
    for v in values:
        if np.any(np.abs(edges - v) <= tol):
            labels.append("near_threshold")
        elif any(a <= v <= b for a, b in union):
            labels.append("band")
        else:
            labels.append("gap")
    bounds = [-np.inf] + [x for iv in union for x in iv] + [np.inf]
    gaps = []
    for lower, upper in zip(bounds[0::2], bounds[1::2]):
        inside = [float(v) for v, lab in zip(values, labels) if lab == "gap" and lower < v < upper]
        gaps.append({"lower": float(lower), "upper": float(upper), "count": len(inside),
                     "clusters": _clusters(inside, cluster_width)})
    return SpectrumReport([float(v) for v in values], labels, gaps, union, tol, radius, warning)


# ---------------------------------------------------------------------------
# stability across radii
# ---------------------------------------------------------------------------

@dataclass
class StabilityScan:
    radii: list
    reports: list
    counts: list
    verdict: str
    max_drift: float | None = None

    def to_dict(self):
        return {"radii": self.radii, "gap_counts": self.counts, "verdict": self.verdict,
                "max_drift": self.max_drift, "reports": [r.to_dict() for r in self.reports]}


def _gap_spectrum(handle, union, per_target=8):
    """Eigenvalues in every gap of ``union`` by shift-invert, for large handles.

    Each target (the gap midpoints and one point beyond each end of the
    union) asks for more eigenvalues until at least one of them lands in a
    band, so no gap eigenvalue near the target is missed.
    """
    lo, hi = union[0][0], union[-1][1]
    span = max(hi - lo, 1.0)
    targets = [lo - 0.5 * span, hi + 0.5 * span]
    targets += [(a[1] + b[0]) / 2 for a, b in zip(union[:-1], union[1:])]
    found = []
    for t in targets:
        k = per_target
        while True:
            k = min(k, handle.dimension - 2)
            vals = eigensolve(handle, k=k, sigma=t).values
            in_band = any(a <= v <= b for v in vals for a, b in union)
            if in_band or k >= handle.dimension - 2:
                break
            k *= 2
        # windows of neighbouring targets may overlap; keep one copy
        fresh = [v for v in vals if all(abs(v - w) > 1e-10 for w in found)]
        found.extend(fresh)
    return np.sort(np.asarray(found))


def _solve_radius(crystal, measure, potential, r, union, operator, tol, thresholds):
    handle = assemble_truncated(crystal, measure, potential, r, operator)
    if handle.storage == "dense":
        values = eigensolve(handle).values
    else:
        values = _gap_spectrum(handle, union)
    return classify_spectrum(values, union, tol, thresholds, r, warning=handle.warning)


def gap_stability_scan(crystal, measure, potential, radii, bands, tol=1e-6, drift_tol=1e-4,
                       operator="gauss_bonnet", thresholds=(), threads=None):
    """Gap eigenvalue counts over increasing radii, and a stability verdict.

    The verdict is ``"stable"`` when the two largest radii give the same gap
    count and their gap eigenvalues pair up within ``drift_tol``; otherwise
    ``"unsettled"``.  Radii are solved in parallel and reported in order.
    Large truncations are only searched near the gaps, so their reports
    list those eigenvalues rather than the whole spectrum.
    """
    radii = [int(r) for r in radii]
    if len(radii) < 3:
        raise ValueError("stability scan needs at least three radii")
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be strictly increasing")
    union = band_union_for(bands)
    run = lambda r: _solve_radius(crystal, measure, potential, r, union, operator, tol, thresholds)  # noqa: E731
    workers = min(thread_count(threads), len(radii))
    if workers == 1:
        reports = [run(r) for r in radii]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(run, radii))
    counts = [r.gap_count for r in reports]
    a, b = reports[-2].gap_eigenvalues, reports[-1].gap_eigenvalues
    drift = None
    verdict = "unsettled"
    if len(a) == len(b):
        drift = float(np.max(np.abs(np.subtract(a, b)), initial=0.0))
        if drift <= drift_tol:
            verdict = "stable"
    return StabilityScan(radii, reports, counts, verdict, drift)
