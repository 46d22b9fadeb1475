"""Magnetic operators on the finite base graph as small dense matrices.

All matrices use the ordered basis ``x_1..x_n, e_1..e_l`` with every
coordinate scaled by the square root of the periodic measure, so adjoints are
plain conjugate transposes.  Flux values are given on positively oriented
edges only; ``theta(e-bar) = conj(theta(e))`` is implied.

Functions accept a batch of fluxes of shape ``(..., l)`` and return matrices of
shape ``(..., rows, cols)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError

__all__ = [
    "FluxAssignment",
    "MagneticMatrixSet",
    "bloch_flux",
    "magnetic_d_matrix",
    "magnetic_gauss_bonnet_matrix",
    "magnetic_laplacian0_matrix",
    "magnetic_laplacian1_matrix",
    "magnetic_matrix_set",
    "weighted_inner_products",
]


@dataclass(frozen=True, eq=False)
class FluxAssignment:
    """Unit-modulus phases on the positive base edges."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if np.abs(np.abs(v) - 1.0).max(initial=0.0) > 1e-12:
            raise ValueError("flux values must have modulus 1")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def trivial(cls, crystal):
        return cls(np.ones(crystal.l, dtype=complex))

    def gauge(self, crystal, u):
        """Flux ``conj(u(t(e))) theta(e) u(o(e))`` for unit scalars ``u`` per vertex."""
        u = np.asarray(u, dtype=complex)
        return FluxAssignment(np.conj(u[..., crystal.terminus]) * self.values * u[..., crystal.origin])


def bloch_flux(crystal, xi):
    """``theta_xi(e) = exp(2 pi i xi . eta(e))`` for one or many ``xi`` of shape (..., d)."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1:] != (crystal.dim,):
        raise ShapeError(f"quasimomentum must have {crystal.dim} components")
    return np.exp(2j * np.pi * (xi @ crystal.eta.T))


def _theta(crystal, theta):
    if isinstance(theta, FluxAssignment):
        theta = theta.values
    theta = np.asarray(theta, dtype=complex)
    if theta.shape[-1:] != (crystal.l,):
        raise ShapeError(f"flux must have {crystal.l} entries per assignment")
    return theta


def magnetic_d_matrix(crystal, theta):
    """Matrix of ``f -> theta(e) f(t(e)) - f(o(e))``, shape (..., l, n)."""
    theta = _theta(crystal, theta)
    n, l = crystal.n, crystal.l
    ratio_t = np.sqrt(crystal.m_edge / crystal.m_vertex[crystal.terminus])
    ratio_o = np.sqrt(crystal.m_edge / crystal.m_vertex[crystal.origin])
    out = np.zeros(theta.shape[:-1] + (l, n), dtype=complex)
    rows = np.arange(l)
    # loops hit the same entry twice; accumulate rather than overwrite
    for k in rows:
        out[..., k, crystal.terminus[k]] += ratio_t[k] * theta[..., k]
        out[..., k, crystal.origin[k]] -= ratio_o[k]
    return out


def magnetic_gauss_bonnet_matrix(crystal, theta, include_potential=True):
    """Hermitian ``D_theta + R`` on C^{n+l}, shape (..., n+l, n+l)."""
    d = magnetic_d_matrix(crystal, theta)
    n = crystal.n
    N = crystal.size
    out = np.zeros(d.shape[:-2] + (N, N), dtype=complex)
    out[..., n:, :n] = d
    out[..., :n, n:] = np.conj(np.swapaxes(d, -1, -2))
    if include_potential:
        idx = np.arange(N)
        out[..., idx, idx] += np.concatenate([crystal.r_vertex, crystal.r_edge])
    return out


def magnetic_laplacian0_matrix(crystal, theta):
    """Vertex magnetic Laplacian assembled from its star sum, shape (..., n, n)."""
    theta = _theta(crystal, theta)
    n = crystal.n
    sq = np.sqrt(crystal.m_vertex)
    out = np.zeros(theta.shape[:-1] + (n, n), dtype=complex)
    for k in range(crystal.l):
        o, t, m = crystal.origin[k], crystal.terminus[k], crystal.m_edge[k]
        # e_k in A_o with phase theta; its reversal in A_t with conj(theta)
        out[..., o, t] += m / (sq[o] * sq[t]) * theta[..., k]
        out[..., t, o] += m / (sq[o] * sq[t]) * np.conj(theta[..., k])
        out[..., o, o] -= m / crystal.m_vertex[o]
        out[..., t, t] -= m / crystal.m_vertex[t]
    return out


def magnetic_laplacian1_matrix(crystal, theta):
    """Edge magnetic Laplacian assembled from its two star sums, shape (..., l, l).

    Values on reversed edges follow the twisted antisymmetry
    ``f(e-bar) = -conj(theta(e)) f(e)``.
    """
    theta = _theta(crystal, theta)
    l = crystal.l
    o, t = crystal.origin, crystal.terminus
    mv, me = crystal.m_vertex, crystal.m_edge
    out = np.zeros(theta.shape[:-1] + (l, l), dtype=complex)
    for row in range(l):
        for col in range(l):
            scale = np.sqrt(me[row] / me[col]) * me[col]
            acc = 0
            # sum over A_{t(e_row)} weighted by theta(e_row)
            if o[col] == t[row]:
                acc = acc + theta[..., row] / mv[t[row]]
            if t[col] == t[row]:
                acc = acc - theta[..., row] * np.conj(theta[..., col]) / mv[t[row]]
            # minus the sum over A_{o(e_row)}
            if o[col] == o[row]:
                acc = acc - 1.0 / mv[o[row]]
            if t[col] == o[row]:
                acc = acc + np.conj(theta[..., col]) / mv[o[row]]
            out[..., row, col] = scale * acc
    return out


@dataclass(frozen=True, eq=False)
class MagneticMatrixSet:
    d: np.ndarray
    d_star: np.ndarray
    gauss_bonnet: np.ndarray
    laplacian0: np.ndarray
    laplacian1: np.ndarray


def magnetic_matrix_set(crystal, theta):
    d = magnetic_d_matrix(crystal, theta)
    return MagneticMatrixSet(
        d=d,
        d_star=np.conj(np.swapaxes(d, -1, -2)),
        gauss_bonnet=magnetic_gauss_bonnet_matrix(crystal, theta, include_potential=False),
        laplacian0=magnetic_laplacian0_matrix(crystal, theta),
        laplacian1=magnetic_laplacian1_matrix(crystal, theta),
    )


def weighted_inner_products(crystal, theta, f0, g1):
    """``(<d_theta f, g>_1, <f, d_theta^* g>_0)`` evaluated in unnormalised coordinates.

    ``f0`` holds vertex values, ``g1`` values on positive edges.  Both sides
    use the literal formulas (the edge pairing sums over both orientations
    with the twisted antisymmetry), so this checks the adjoint relation
    independently of the matrix normalisation.
    """
    theta = _theta(crystal, theta)
    o, t = crystal.origin, crystal.terminus
    me, mv = crystal.m_edge, crystal.m_vertex
    df = theta * f0[t] - f0[o]
    # reversed edges: values -conj(theta) * value, same measure
    df_rev = np.conj(theta) * f0[o] - f0[t]
    g_rev = -np.conj(theta) * g1
    lhs = 0.5 * (np.sum(me * df * np.conj(g1)) + np.sum(me * df_rev * np.conj(g_rev)))
    dstar = np.zeros(crystal.n, dtype=complex)
    np.add.at(dstar, o, -me * g1)
    np.add.at(dstar, t, -me * g_rev)
    dstar /= mv
    rhs = np.sum(mv * f0 * np.conj(dstar))
    return complex(lhs), complex(rhs)
