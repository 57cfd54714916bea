"""Curvature and connection quantities along a totally real immersion.

Everything here is a vectorized per-node computation over a FrameField.
Covariant derivatives of the coordinate tangent fields are realized as

    nabla_i t_j = d_i d_j iota + Gamma(t_i)(t_j)

with grid stencils for the position derivatives and the model's connection
coefficients at the node; derivatives are taken along L only.  Traces over
orthonormal frames are metric-weighted coordinate traces where the defining
formula is tensorial, and explicit Gram-Schmidt frame sums where it names
the orthonormal vectors directly (the torsion vectors).

The sup-norm residual helpers return plain floats so they can be logged as
check results directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import discrete
from .immersion import FrameField, induced_riemann


# ---------------------------------------------------------------------------
# covariant node data
# ---------------------------------------------------------------------------

def _nabla_tangents(fr: FrameField, connection):
    """nabla_{d_i} t_j as (N..., i, j, 2n) for 'levi-civita' or 'chern'."""
    key = f'nab:{connection}'
    if key in fr._cache:
        return fr._cache[key]
    d2 = fr.second_derivatives()
    gam = fr.ambient('christoffel' if connection == 'levi-civita' else 'chern_christoffel')
    nab = d2 + np.einsum('...abc,...ib,...jc->...ija', gam, fr.t, fr.t, optimize=True)
    fr._cache[key] = nab
    return nab


def second_fundamental_form(fr: FrameField):
    """A(d_i, d_j) = pi_perp(nabla_i t_j), ambient-valued, symmetric in (i, j)."""
    nab = _nabla_tangents(fr, 'levi-civita')
    return np.einsum('...ab,...ijb->...ija', fr.pi_perp, nab)


def mean_curvature(fr: FrameField):
    """H = g^{ij} A(d_i, d_j)."""
    return np.einsum('...ij,...ija->...a', fr.ginv, second_fundamental_form(fr))


# ---------------------------------------------------------------------------
# the classical (Kahler) one-form built from A
# ---------------------------------------------------------------------------

def _require_kahler(fr, what):
    if not fr.model.is_kahler:
        raise ValueError(
            f"{what} assumes a Kahler ambient model (parallel omega); "
            f"model '{fr.model.name}' is not Kahler")


def mean_curvature_form(fr: FrameField):
    """xi(X) = -omega(e_i, A(e_i, X)) as a coordinate 1-form (N..., n)."""
    _require_kahler(fr, "mean_curvature_form")
    a = second_fundamental_form(fr)
    return -np.einsum('...ij,...ia,...ab,...jkb->...k', fr.ginv, fr.t, fr.Om, a)


def h_contraction_residual(fr: FrameField):
    """sup over nodes and coordinate X of |omega(H, X) + d*omega(X) - xi(X)|."""
    _require_kahler(fr, "h_contraction_residual")
    h = mean_curvature(fr)
    xi = mean_curvature_form(fr)
    lhs = np.einsum('...a,...ab,...kb->...k', h, fr.Om, fr.t)
    sp = fr.immersion.grid.spacings
    if fr.n == 2:
        dstar = discrete.codifferential_2(fr.omega[..., 0, 1], fr.g, fr.ginv,
                                          fr.sqrtg, sp)
    else:
        dstar = np.zeros(xi.shape)
    return float(np.max(np.abs(lhs + dstar - xi)))


def dxi_formula_residual(fr: FrameField):
    """sup residual of the curvature formula for d(xi) against its grid d."""
    _require_kahler(fr, "dxi_formula_residual")
    if fr.n == 1:
        return 0.0
    xi = mean_curvature_form(fr)
    dxi = discrete.exterior_derivative_1(xi, fr.immersion.grid.spacings)
    amb = _ambient_curvature_trace(fr, fr.ambient('riemann'))
    rl = induced_riemann(fr)
    intr = np.einsum('...ij,...abil,...lj->...ab', fr.ginv, rl, fr.omega)
    a = second_fundamental_form(fr)
    aa = 2.0 * np.einsum('...ij,...aic,...cd,...bjd->...ab', fr.ginv, a, fr.Om, a)
    rhs = amb - intr - aa
    return float(np.max(np.abs(dxi - rhs[..., 0, 1])))


def _ambient_curvature_trace(fr, rbar):
    """omega(Rbar(t_a, t_b) e_i, e_i) as a 2-form on the grid coordinates."""
    rg = np.einsum('...abcd,...xa,...yb,...ic->...xyid', rbar, fr.t, fr.t, fr.t)
    return np.einsum('...ij,...xyid,...de,...je->...xy', fr.ginv, rg, fr.Om, fr.t)


# ---------------------------------------------------------------------------
# Maslov form, J-mean curvature, torsion vectors
# ---------------------------------------------------------------------------

def maslov_form(fr: FrameField):
    """xi_J(d_k) = trace over TL of J pi_J nabla~_{d_k}, as a 1-form (N..., n)."""
    nab = _nabla_tangents(fr, 'chern')
    w = np.einsum('...ab,...bc,...kic->...kia', fr.Jm, fr.pi_j, nab, optimize=True)
    return np.einsum('...ij,...kia,...ab,...jb->...k', fr.ginv, w, fr.G, fr.t, optimize=True)


def j_mean_curvature(fr: FrameField):
    """H_J = g^{kl} g^{ij} g(J t_j, pi_J nabla~_i t_l) J t_k, valued in J(TL)."""
    nab = _nabla_tangents(fr, 'chern')
    pj = np.einsum('...ab,...ilb->...ila', fr.pi_j, nab, optimize=True)
    coef = np.einsum('...ja,...ab,...ilb->...ijl', fr.jt, fr.G, pj, optimize=True)
    return np.einsum('...kl,...ij,...ijl,...ka->...a', fr.ginv, fr.ginv, coef, fr.jt, optimize=True)


def _torsion_on_frame(fr):
    key = 'torsion-tensor'
    if key not in fr._cache:
        fr._cache[key] = fr.ambient('torsion')
    return fr._cache[key]


def torsion_vector(fr: FrameField):
    """T_J = -g(pi_L J T~(e_j, e_i), e_i) J e_j."""
    tt = _torsion_on_frame(fr)
    tv = np.einsum('...abc,...jb,...ic->...jia', tt, fr.e, fr.e, optimize=True)   # T(e_j, e_i)
    jtv = np.einsum('...ab,...jib->...jia', fr.Jm, tv)
    ptv = np.einsum('...ab,...jib->...jia', fr.pi_l, jtv)
    s = np.einsum('...jia,...ab,...ib->...j', ptv, fr.G, fr.e)
    return -np.einsum('...j,...ja->...a', s, fr.je)


def gradient_correction(fr: FrameField):
    """S_J = -g(pi_L T~(J e_j, e_i), e_i) J e_j; H_J + S_J is the J-volume gradient."""
    tt = _torsion_on_frame(fr)
    tv = np.einsum('...abc,...jb,...ic->...jia', tt, fr.je, fr.e, optimize=True)  # T(Je_j, e_i)
    ptv = np.einsum('...ab,...jib->...jia', fr.pi_l, tv)
    s = np.einsum('...jia,...ab,...ib->...j', ptv, fr.G, fr.e)
    return -np.einsum('...j,...ja->...a', s, fr.je)


def maslov_duality_residual(fr: FrameField):
    """sup over nodes, coordinate X of |omega(H_J + T_J, X) - xi_J(X)|."""
    v = j_mean_curvature(fr) + torsion_vector(fr)
    lhs = np.einsum('...a,...ab,...kb->...k', v, fr.Om, fr.t)
    return float(np.max(np.abs(lhs - maslov_form(fr))))


def _chern_ricci_pullback(fr):
    p = fr.ambient('chern_ricci_form')
    return np.einsum('...ia,...ab,...jb->...ij', fr.t, p, fr.t)


def chern_ricci_restriction_residual(fr: FrameField):
    """sup | d(xi_J) - (1/2) pullback of the Chern-Ricci form |."""
    if fr.n == 1:
        return 0.0
    dxi = discrete.exterior_derivative_1(maslov_form(fr), fr.immersion.grid.spacings)
    return float(np.max(np.abs(dxi - 0.5 * _chern_ricci_pullback(fr)[..., 0, 1])))


def integrability_residual(fr: FrameField):
    """sup | d(pullback omega(H_J + T_J, .)) - (1/2) pullback Chern-Ricci |.

    The single identity-residual run on every preset; subsumes the duality
    and curvature-restriction residuals.
    """
    if fr.n == 1:
        return 0.0
    v = j_mean_curvature(fr) + torsion_vector(fr)
    alpha = np.einsum('...a,...ab,...kb->...k', v, fr.Om, fr.t)
    dalpha = discrete.exterior_derivative_1(alpha, fr.immersion.grid.spacings)
    return float(np.max(np.abs(dalpha - 0.5 * _chern_ricci_pullback(fr)[..., 0, 1])))


# ---------------------------------------------------------------------------
# alternative mean curvature vectors (Lagrangian submanifolds only)
# ---------------------------------------------------------------------------

def alternative_mean_curvatures(fr: FrameField, lag_tol=None):
    """The four Lagrangian mean-curvature representatives with pairwise residuals.

    Returns (fields, residuals): fields maps name -> (N..., 2n) vector field,
    residuals maps 'a|b' -> sup-norm difference.
    """
    if lag_tol is None:
        lag_tol = 1e-8 * float(np.max(np.abs(fr.points)) + 2 * np.pi)
    defect = float(np.max(fr.omega_sup()))
    if defect > lag_tol:
        raise ValueError(
            f"alternative mean curvatures are stated on Lagrangians; "
            f"sup |omega| = {defect:.3e} exceeds tolerance {lag_tol:.3e}")
    h = mean_curvature(fr)
    hj = j_mean_curvature(fr)
    tj = torsion_vector(fr)
    nab_ch = _nabla_tangents(fr, 'chern')
    h_tilde = np.einsum('...ij,...ab,...ijb->...a', fr.ginv, fr.pi_perp, nab_ch)
    nj = fr.ambient('nabla_j')
    nab_lc = _nabla_tangents(fr, 'levi-civita')
    d_jt = (np.einsum('...cab,...ic,...jb->...ija', nj, fr.t, fr.t)
            + np.einsum('...ab,...ijb->...ija', fr.Jm, nab_lc))
    cplx = -np.einsum('...ab,...bc,...ij,...ijc->...a', fr.pi_perp, fr.Jm,
                      fr.ginv, d_jt)
    fields = {
        'maslov': hj + tj,
        'generalized': h + 2.0 * tj,
        'chern-trace': 2.0 * h_tilde - h,
        'complex': cplx,
    }
    names = list(fields)
    residuals = {}
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            d = float(np.max(np.abs(fields[names[i]] - fields[names[j]])))
            residuals[f'{names[i]}|{names[j]}'] = d
    return fields, residuals


# ---------------------------------------------------------------------------
# symbols
# ---------------------------------------------------------------------------

@dataclass
class PointFrame:
    """Frame data at a single point, for symbol-level linear algebra."""

    t: np.ndarray        # (n, 2n)
    G: np.ndarray
    Om: np.ndarray
    Jm: np.ndarray

    @classmethod
    def from_field(cls, fr: FrameField, index):
        return cls(t=fr.t[index], G=fr.G[index], Om=fr.Om[index], Jm=fr.Jm[index])

    @property
    def n(self):
        return self.t.shape[0]

    @property
    def g(self):
        return self.t @ self.G @ self.t.T

    @property
    def ginv(self):
        return np.linalg.inv(self.g)

    @property
    def pi_j(self):
        n = self.n
        jt = (self.Jm @ self.t.T).T
        basis = np.concatenate([self.t.T, jt.T], axis=1)
        sel = np.zeros((2 * n, 2 * n))
        sel[n:, n:] = np.eye(n)
        return basis @ sel @ np.linalg.inv(basis)


def symbol_j_mean_curvature(frame: PointFrame, zeta):
    """Exact symbol of the flow operator at covector zeta: rank-one map on TM.

    Returns (matrix, report) where report carries the distinguished direction,
    its eigenvalue |zeta|^2_g, and the kernel dimension from an SVD.
    """
    zeta = np.asarray(zeta, dtype=float)
    if np.allclose(zeta, 0.0):
        raise ValueError("symbol requires a nonzero covector")
    sharp = frame.ginv @ zeta
    w = np.einsum('i,ia->a', sharp, (frame.Jm @ frame.t.T).T)
    row = frame.pi_j.T @ frame.G @ w
    mat = np.outer(w, row)
    sv = np.linalg.svd(mat, compute_uv=False)
    eig = float(zeta @ frame.ginv @ zeta)
    report = {
        'direction': w,
        'eigenvalue': eig,
        'rank': int(np.sum(sv > 1e-12 * max(sv.max(), 1.0))),
        'kernel_dim': int(np.sum(sv <= 1e-12 * max(sv.max(), 1.0))),
        'eigen_residual': float(np.max(np.abs(mat @ w - eig * w))),
    }
    return mat, report


def symbol_constraint_operator(frame: PointFrame, zeta):
    """Symbol of W -> d(pullback omega(W, .)): maps TM to Lambda^2(T*L)."""
    zeta = np.asarray(zeta, dtype=float)
    if np.allclose(zeta, 0.0):
        raise ValueError("symbol requires a nonzero covector")
    n = frame.n
    beta_rows = frame.Om @ frame.t.T         # column k: functional omega(., t_k)... transposed below
    rows = []
    for i in range(n):
        for j in range(i + 1, n):
            rows.append(zeta[i] * beta_rows[:, j] - zeta[j] * beta_rows[:, i])
    if not rows:
        return np.zeros((0, 2 * n))
    return np.stack(rows, axis=0)


def symbol_composition_residual(frame: PointFrame, zeta):
    """|sigma(constraint) o sigma(flow)| -- vanishes identically."""
    mat, _ = symbol_j_mean_curvature(frame, zeta)
    lmat = symbol_constraint_operator(frame, zeta)
    if lmat.size == 0:
        return 0.0
    return float(np.max(np.abs(lmat @ mat)))


# ---------------------------------------------------------------------------
# plane-wave linearization probe
# ---------------------------------------------------------------------------

def planewave_response(immersion, model, k, direction, amplitude=1e-6, axis=0):
    """Measured leading Fourier coefficient of the flow-velocity linearization.

    Perturbs the immersion by a * cos(k phi_axis) * V for V the symbol
    eigendirection ('eigen'), a tangent direction ('tangent'), or the
    orthogonal kernel direction in J(TL) ('kernel'), and returns the measured
    response coefficient normalized by a, together with the k^2 |zeta|^2_g
    prediction for the eigendirection.
    """
    from .immersion import frames as _frames
    grid = immersion.grid
    if grid.shape[axis] / k < 8:
        raise ValueError(
            f"mode k={k} leaves fewer than 8 nodes per wavelength on axis {axis}")
    fr = _frames(immersion, model)
    zeta = np.zeros(grid.n)
    zeta[axis] = 1.0
    sharp = np.einsum('...ij,j->...i', fr.ginv, zeta)
    w = np.einsum('...i,...ia->...a', sharp, fr.jt)
    if direction == 'eigen':
        v = w
    elif direction == 'tangent':
        v = fr.t[..., (axis + 1) % grid.n, :] if grid.n > 1 else fr.t[..., 0, :]
    elif direction == 'kernel':
        if grid.n == 1:
            raise ValueError("no orthogonal kernel direction in J(TL) for n = 1")
        v = fr.jt[..., (axis + 1) % grid.n, :]
    else:
        raise ValueError(f"unknown direction '{direction}'")

    phase = np.cos(k * grid.mesh()[..., axis])
    delta = amplitude * phase[..., None] * v

    def hj_of(d):
        return j_mean_curvature(_frames(immersion.displaced(d), model))

    response = (hj_of(delta) - hj_of(-delta)) / (2.0 * amplitude)
    vnorm = np.einsum('...a,...ab,...b->...', v, fr.G, v)
    proj = np.einsum('...a,...ab,...b->...', response, fr.G, v) / vnorm
    measured = abs(2.0 * float(np.mean(proj * phase)))
    zeta_norm = float(np.max(np.einsum('...i,...ij,...j->...', zeta, fr.ginv, zeta)))
    predicted = k ** 2 * zeta_norm
    return {'measured': measured, 'predicted': predicted,
            'ratio': measured / predicted}
