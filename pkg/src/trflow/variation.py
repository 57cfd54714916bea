"""Finite-difference verification of the J-volume variation formulas.

Probe families are chart-straight: positions move by t * J iota_* Y for a
tangential field Y given by per-node coefficients in the grid coordinate
frame, so the t = 0 velocity is exactly J Y.  First derivatives use the
five-point Richardson stencil, second derivatives the five-point fourth
order stencil.
"""

from __future__ import annotations

import numpy as np

from . import discrete
from .immersion import frames
from .tensors import j_mean_curvature, gradient_correction


def _j_field(fr, coeffs):
    """J iota_* Y for Y = coeffs^i d_i, as an ambient field (N..., 2n)."""
    return np.einsum('...i,...ia->...a', coeffs, fr.jt)


def _vol_j(immersion, model, delta, margin):
    fr = frames(immersion.displaced(delta), model, margin=margin)
    return fr.volumes()[1]


def first_variation_check(immersion, model, coeffs, tau=1e-4, margin=1e-6):
    """Richardson derivative of Vol_J along the probe vs the gradient integral.

    Returns a dict with both sides and the relative residual
    |difference| / max(|derivative|, 1e-8).
    """
    fr = frames(immersion, model, margin=margin)
    w = _j_field(fr, np.asarray(coeffs))
    v = {s: _vol_j(immersion, model, s * tau * w, margin) for s in (-2, -1, 1, 2)}
    derivative = (-v[2] + 8.0 * v[1] - 8.0 * v[-1] + v[-2]) / (12.0 * tau)
    grad = j_mean_curvature(fr) + gradient_correction(fr)
    integrand = np.einsum('...a,...ab,...b->...', w, fr.G, grad)
    cell = immersion.grid.cell_volume
    integral = -float(np.sum(integrand * fr.rho * fr.sqrtg) * cell)
    resid = abs(derivative - integral) / max(abs(derivative), 1e-8)
    return {'derivative': float(derivative), 'gradient_integral': integral,
            'relative_residual': float(resid)}


def divergence(fr, coeffs):
    """Div Y of a tangential field w.r.t. the induced metric."""
    sp = fr.immersion.grid.spacings
    flux = fr.sqrtg[..., None] * coeffs
    div = sum(discrete.deriv(flux[..., i], sp[i], i) for i in range(fr.n))
    return div / fr.sqrtg


def second_variation_check(immersion, model, coeffs, tau=1e-2, margin=1e-6,
                           critical_tol=1e-8):
    """Second t-derivative of Vol_J at a critical point vs int (Div Y)^2 dvol.

    Refuses off criticality: the formula's remaining terms need an ambient
    extension convention the probe family does not fix.
    """
    fr = frames(immersion, model, margin=margin)
    hj = j_mean_curvature(fr) + gradient_correction(fr)
    hj_sup = float(np.max(np.linalg.norm(hj, axis=-1)))
    if hj_sup > critical_tol:
        raise ValueError(
            f"second variation check requires a critical immersion; "
            f"sup|H_J + S_J| = {hj_sup:.3e}")
    coeffs = np.asarray(coeffs)
    w = _j_field(fr, coeffs)
    v = {s: _vol_j(immersion, model, s * tau * w, margin) for s in (-2, -1, 0, 1, 2)}
    second = (-v[2] + 16.0 * v[1] - 30.0 * v[0] + 16.0 * v[-1] - v[-2]) / (12.0 * tau ** 2)
    div = divergence(fr, coeffs)
    cell = immersion.grid.cell_volume
    rhs = float(np.sum(div ** 2 * fr.rho * fr.sqrtg) * cell)
    resid = abs(second - rhs) / max(abs(rhs), 1e-8)
    return {'second_derivative': float(second), 'divergence_integral': rhs,
            'relative_residual': float(resid)}


def periodic_bump(grid, center, concentration):
    """Smooth periodic bump exp(kappa (cos(phi - c) - 1)) per axis, product."""
    mesh = grid.mesh()
    out = np.ones(grid.shape)
    for i in range(grid.n):
        out = out * np.exp(concentration * (np.cos(mesh[..., i] - center[i]) - 1.0))
    return out


def gradient_reconstruction(immersion, model, nodes, concentrations=(8.0, 16.0),
                            tau=1e-4, margin=1e-6):
    """Reconstruct the J-volume gradient at selected nodes from bump probes.

    For each node and coordinate direction, probes with two bump widths and
    Richardson-extrapolates in the squared width; returns pairs of
    (reconstructed, direct) ambient vectors.
    """
    fr = frames(immersion, model, margin=margin)
    grad = j_mean_curvature(fr) + gradient_correction(fr)
    grid = immersion.grid
    cell = grid.cell_volume
    mesh = grid.mesh()
    out = []
    for node in nodes:
        center = mesh[node]
        comps = {}
        for kappa in concentrations:
            bump = periodic_bump(grid, center, kappa)
            weight = float(np.sum(bump * fr.rho * fr.sqrtg) * cell)
            c = np.zeros(grid.n)
            for i in range(grid.n):
                coeffs = bump[..., None] * np.eye(grid.n)[i]
                r = first_variation_check(immersion, model, coeffs, tau=tau,
                                          margin=margin)
                c[i] = -r['derivative'] / weight
            comps[kappa] = c
        k0, k1 = concentrations
        # error is O(1/kappa); extrapolate linearly in the width^2 = 1/kappa
        c_ext = (comps[k1] * k1 - comps[k0] * k0) / (k1 - k0) \
            if abs(k1 - k0) > 0 else comps[k1]
        # c_i = g(J t_i, grad): solve for the J(TL) components
        gtil = np.einsum('ia,ab,jb->ij', fr.jt[node], fr.G[node], fr.jt[node])
        comp_vec = np.linalg.solve(gtil, c_ext)
        recon = comp_vec @ fr.jt[node]
        out.append({'node': node, 'reconstructed': recon, 'direct': grad[node]})
    return out
