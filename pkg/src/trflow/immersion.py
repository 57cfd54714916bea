"""Discretized totally real immersions of T^n into a chart, with frames.

An immersion is stored as an affine-periodic position field:

    pos(phi) = W @ phi + p(phi),     p periodic on the grid,

where the winding matrix W (2n x n) carries the non-periodic part.  Integer
multiples of the lattice give closed tori in periodic ambients; non-integer
windings describe graph sheets over a fundamental square (the quadrature and
all stencils remain well defined).

The per-node frame data (tangents, projections pi_L / pi_J, induced metric,
pullback of omega, the J-volume density) is assembled in one vectorized pass
by `frames`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import discrete
from .ambient import ChartDomainError, DegenerateImmersionError


@dataclass(frozen=True)
class TorusGrid:
    """Periodic structured grid on T^n, nodes at i * 2pi/N_i per axis."""

    n: int
    shape: tuple

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError("grid dimension must be 1 or 2")
        if len(self.shape) != self.n or any(s < 16 for s in self.shape):
            raise ValueError("need at least 16 nodes per axis")

    @property
    def spacings(self):
        return tuple(2.0 * np.pi / s for s in self.shape)

    def angles(self, axis):
        return np.arange(self.shape[axis]) * self.spacings[axis]

    def mesh(self):
        """Node angles, shape (N..., n)."""
        axes = [self.angles(i) for i in range(self.n)]
        return np.stack(np.meshgrid(*axes, indexing='ij'), axis=-1)

    @property
    def cell_volume(self):
        return float(np.prod(self.spacings))

    @property
    def node_count(self):
        return int(np.prod(self.shape))


@dataclass
class Immersion:
    grid: TorusGrid
    periodic: np.ndarray                      # (N..., 2n)
    winding: Optional[np.ndarray] = None      # (2n, n) affine part

    @property
    def dim(self):
        return self.periodic.shape[-1]

    def positions(self):
        pos = self.periodic
        if self.winding is not None:
            pos = pos + np.einsum('an,...n->...a', self.winding, self.grid.mesh())
        return pos

    def tangents(self):
        """4th-order stencil tangents d_i iota, shape (N..., n, 2n)."""
        sp = self.grid.spacings
        t = np.stack([discrete.deriv(self.periodic, sp[i], i) for i in range(self.grid.n)],
                     axis=-2)
        if self.winding is not None:
            t = t + self.winding.T[(None,) * self.grid.n]
        return t

    def second_derivatives(self):
        """d_i d_j iota, shape (N..., n, n, 2n); mixed entries commute exactly."""
        sp = self.grid.spacings
        n = self.grid.n
        out = np.empty(self.periodic.shape[:-1] + (n, n, self.dim))
        for i in range(n):
            for j in range(n):
                if i == j:
                    out[..., i, j, :] = discrete.second_deriv(self.periodic, sp[i], i)
                else:
                    out[..., i, j, :] = discrete.deriv(
                        discrete.deriv(self.periodic, sp[j], j), sp[i], i)
        return out

    def displaced(self, delta):
        """A copy with the periodic part moved by delta (N..., 2n)."""
        return Immersion(self.grid, self.periodic + delta, self.winding)

    def to_snapshot(self):
        """JSON-serializable node positions with grid metadata."""
        return {
            'grid': {'n': self.grid.n, 'shape': list(self.grid.shape)},
            'winding': None if self.winding is None else self.winding.tolist(),
            'positions': self.positions().reshape(-1, self.dim).tolist(),
        }


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------

def make_immersion(preset, grid, **params):
    """Immersion presets named in scenario configs."""
    phi = grid.mesh()
    n = grid.n
    if preset == 'flat-clifford':
        r = params.get('radii', (1.0,) * n)
        cols = []
        for i in range(n):
            cols += [r[i] * np.cos(phi[..., i]), r[i] * np.sin(phi[..., i])]
        return Immersion(grid, np.stack(cols, axis=-1))
    if preset == 'flat-sheared':
        if n != 2:
            raise ValueError("flat-sheared needs n = 2")
        d = params.get('delta', 0.2)
        p = np.stack([np.cos(phi[..., 0]), np.sin(phi[..., 0]),
                      np.cos(phi[..., 1]) + d * np.cos(phi[..., 0]),
                      np.sin(phi[..., 1]) + d * np.sin(phi[..., 0])], axis=-1)
        return Immersion(grid, p)
    if preset in ('ch-torus', 'fs-torus'):
        c = np.asarray(params.get('center', (0.0,) * (2 * n)))
        r = params.get('radius', 0.15)
        d = params.get('delta', 0.0)
        base = make_immersion('flat-sheared' if (d != 0 and n == 2) else 'flat-clifford',
                              grid, delta=d)
        return Immersion(grid, c + r * base.periodic)
    if preset == 'straight-torus':
        w = np.zeros((2 * n, n))
        for i in range(n):
            w[2 * i, i] = 1.0
        return Immersion(grid, np.zeros(phi.shape[:-1] + (2 * n,)), winding=w)
    if preset == 'graph-torus':
        base = make_immersion('straight-torus', grid)
        a = params.get('amplitude', 0.1)
        heights = params.get('heights')
        p = base.periodic.copy()
        for i in range(n):
            if heights is None:
                h = np.cos(phi[..., i]) + (0.5 * np.sin(phi[..., (i + 1) % n]) if n > 1 else 0.0)
            else:
                h = heights[i]
            p[..., 2 * i + 1] = a * h
        return Immersion(grid, p, winding=base.winding)
    if preset == 'str-graph':
        # graph sheet y = F(x) with F_* = [[0, c], [0, 0]] over the square
        if n != 2:
            raise ValueError("str-graph needs n = 2")
        c = params.get('c', 0.5)
        w = np.zeros((4, 2))
        w[0, 0] = 1.0
        w[2, 1] = 1.0
        w[1, 1] = c
        return Immersion(grid, np.zeros(phi.shape[:-1] + (4,)), winding=w)
    raise ValueError(f"unknown immersion preset '{preset}'")


# ---------------------------------------------------------------------------
# frames
# ---------------------------------------------------------------------------

class FrameField:
    """Per-node frame data along an immersion; immutable once assembled.

    Eager fields are everything the margin check and the flow velocities
    need; the orthogonal projections, the doubled orthonormal frame, and the
    second J-volume-density route are materialized on first access.
    """

    _BUNDLE_NAMES = ('christoffel', 'nabla_j', 'chern_christoffel', 'torsion')

    def __init__(self, immersion, model, points, t, jt, basis, basis_inv,
                 G, Om, Jm, g, ginv, sqrtg, omega, pi_l, pi_j, gs, e, rho):
        self.immersion = immersion
        self.model = model
        self.points = points        # (N..., 2n) chart positions
        self.t = t                  # (N..., n, 2n) tangents
        self.jt = jt
        self.basis = basis          # (N..., 2n, 2n) columns [t | Jt]
        self.basis_inv = basis_inv
        self.G = G                  # ambient metric at nodes
        self.Om = Om
        self.Jm = Jm
        self.g = g                  # induced metric
        self.ginv = ginv
        self.sqrtg = sqrtg
        self.omega = omega          # pullback omega_{ij}
        self.pi_l = pi_l            # projection onto TL along J(TL)
        self.pi_j = pi_j
        self.gs = gs                # e_i = gs[..., j, i] t_j
        self.e = e                  # orthonormal tangent frame
        self.rho = rho              # J-volume density (complex determinant)
        self._cache = {}

    @property
    def pi_t(self):
        """g-orthogonal tangential projection."""
        if 'pi_t' not in self._cache:
            self._cache['pi_t'] = np.einsum(
                '...ij,...ia,...jb,...bc->...ac', self.ginv, self.t, self.t,
                self.G, optimize=True)
        return self._cache['pi_t']

    @property
    def pi_perp(self):
        if 'pi_perp' not in self._cache:
            self._cache['pi_perp'] = np.eye(self.t.shape[-1]) - self.pi_t
        return self._cache['pi_perp']

    @property
    def je(self):
        if 'je' not in self._cache:
            self._cache['je'] = np.einsum('...ab,...ib->...ia', self.Jm, self.e)
        return self._cache['je']

    @property
    def rho_alt(self):
        """J-volume density via the ambient volume of (e_1, ..., Je_n)."""
        if 'rho_alt' not in self._cache:
            eje = np.concatenate([np.swapaxes(self.e, -2, -1),
                                  np.swapaxes(self.je, -2, -1)], axis=-1)
            amb_vol = np.sqrt(np.linalg.det(self.G)) * np.abs(np.linalg.det(eje))
            self._cache['rho_alt'] = np.sqrt(amb_vol)
        return self._cache['rho_alt']

    def ambient(self, name):
        """Memoized ambient tensor evaluation at the node points."""
        if name in self._BUNDLE_NAMES:
            if name not in self._cache:
                self._cache.update(
                    {k: v for k, v in self.model.connection_bundle(self.points).items()
                     if k in self._BUNDLE_NAMES})
            return self._cache[name]
        if name not in self._cache:
            self._cache[name] = getattr(self.model, name)(self.points)
        return self._cache[name]

    @property
    def n(self):
        return self.immersion.grid.n

    def second_derivatives(self):
        if 'd2' not in self._cache:
            self._cache['d2'] = self.immersion.second_derivatives()
        return self._cache['d2']

    def omega_sup(self):
        """Largest |omega(d_i, d_j)| normalized by the volume density, per node."""
        if self.n == 1:
            return np.zeros(self.sqrtg.shape)
        return np.abs(self.omega[..., 0, 1]) / self.sqrtg

    def volumes(self):
        cell = self.immersion.grid.cell_volume
        vol_g = float(np.sum(self.sqrtg) * cell)
        vol_j = float(np.sum(self.rho * self.sqrtg) * cell)
        return vol_g, vol_j


def _gram_schmidt(t, G):
    """Orthonormalize tangents in coordinate order against the ambient metric.

    Returns (e, coeff) with e[..., i, :] = coeff[..., j, i] t[..., j, :] and
    coeff upper triangular (Cholesky of the induced Gram matrix).
    """
    g = np.einsum('...ia,...ab,...jb->...ij', t, G, t)
    L = np.linalg.cholesky(g)
    coeff = np.linalg.inv(np.swapaxes(L, -2, -1))       # upper triangular
    e = np.einsum('...ji,...ja->...ia', coeff, t)
    return e, coeff, g


def j_volume_density(vs, G, Om, Jm):
    """The squared J-volume density of frames, by both defining routes.

    vs (..., n, 2n) spans the planes; returns (rho_sq, amb_vol) where rho_sq
    is Re det_C(I - i omega_ON) on the orthonormalized frame and amb_vol the
    Gram-density of the doubled frame (e, Je); the two agree identically and
    rho = sqrt of either.
    """
    e, coeff, g = _gram_schmidt(vs, G)
    n = vs.shape[-2]
    omega = np.einsum('...ia,...ab,...jb->...ij', vs, Om, vs)
    om_on = np.einsum('...ai,...ab,...bj->...ij', coeff, omega, coeff, optimize=True)
    det_c = np.linalg.det(np.eye(n) - 1j * om_on)
    rho_sq = det_c.real
    je = np.einsum('...ab,...ib->...ia', Jm, e)
    eje = np.concatenate([np.swapaxes(e, -2, -1), np.swapaxes(je, -2, -1)], axis=-1)
    amb_vol = np.sqrt(np.linalg.det(G)) * np.abs(np.linalg.det(eje))
    return rho_sq, amb_vol


def frames(immersion, model, margin=1e-6):
    """Assemble the frame field; raises if the totally real margin is lost."""
    pos = immersion.positions()
    pts = model.domain.wrap(pos)
    inside = model.domain.contains(pts)
    if not np.all(inside):
        bad = np.argwhere(~inside)[0]
        raise ChartDomainError(f"immersion left chart domain at node {tuple(bad)}")

    G = model.metric(pts)
    Om = model.omega(pts)
    Jm = model.jmat(pts)
    t = immersion.tangents()
    jt = np.einsum('...ab,...ib->...ia', Jm, t)
    n = immersion.grid.n

    basis = np.concatenate([np.swapaxes(t, -2, -1), np.swapaxes(jt, -2, -1)], axis=-1)
    det_b = np.linalg.det(basis)

    e, coeff, g = _gram_schmidt(t, G)
    ginv = np.linalg.inv(g)
    sqrtg = np.sqrt(np.linalg.det(g))
    omega = np.einsum('...ia,...ab,...jb->...ij', t, Om, t)

    # rho via det_C(I - i omega_ON) on the orthonormal frame
    om_on = np.einsum('...ai,...ab,...bj->...ij', coeff, omega, coeff, optimize=True)
    det_c = np.linalg.det(np.eye(n) - 1j * om_on)
    rho_sq = det_c.real

    worst = np.unravel_index(np.argmin(rho_sq), rho_sq.shape)
    if rho_sq[worst] <= margin ** 2 or np.min(np.abs(det_b)) < 1e-300:
        raise DegenerateImmersionError(
            f"degenerate: totally real margin lost at node {tuple(int(i) for i in worst)}"
            f" (rho^2 = {rho_sq[worst]:.3e})")

    basis_inv = np.linalg.inv(basis)
    sel = np.zeros((2 * n, 2 * n))
    sel[:n, :n] = np.eye(n)
    pi_l = basis @ sel @ basis_inv
    pi_j = np.eye(2 * n) - pi_l

    return FrameField(
        immersion=immersion, model=model, points=pts, t=t, jt=jt, basis=basis,
        basis_inv=basis_inv, G=G, Om=Om, Jm=Jm, g=g, ginv=ginv, sqrtg=sqrtg,
        omega=omega, pi_l=pi_l, pi_j=pi_j, gs=coeff, e=e, rho=np.sqrt(rho_sq))


def volumes(immersion, model):
    """(Vol_g, Vol_J) by trapezoidal quadrature on the periodic grid."""
    return frames(immersion, model).volumes()


def induced_riemann(fr):
    """Intrinsic curvature of the induced metric by grid differentiation."""
    return discrete.riemann_of(fr.g, fr.immersion.grid.spacings)
