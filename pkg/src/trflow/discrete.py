"""Periodic finite-difference calculus on structured torus grids.

Grid fields are numpy arrays whose leading axes are the grid axes
(N_1 x ... x N_n nodes, spacing 2*pi/N_i per axis) and whose trailing axes,
if any, are component axes.  All stencils are central and wrap periodically.
First derivatives default to the 4th-order five-point stencil; the
divergence inside the codifferential uses the 2nd-order stencil, which is
therefore the dominant truncation error in codifferential-based residuals.

Form conventions (n = grid dimension, n <= 2):
  0-form   (N...,)        scalar field
  1-form   (N..., n)      coefficients on the coordinate coframe dphi_i
  2-form   (N...,)        the single coefficient on dphi_1 ^ dphi_2 (n = 2)
"""

from __future__ import annotations

import numpy as np


def shift(field, k, axis):
    """field evaluated at phi + k*h along the given grid axis (periodic)."""
    return np.roll(field, -k, axis=axis)


def deriv(field, spacing, axis, order=4):
    """Central first derivative along a periodic grid axis."""
    if order == 4:
        return (-shift(field, 2, axis) + 8.0 * shift(field, 1, axis)
                - 8.0 * shift(field, -1, axis) + shift(field, -2, axis)) / (12.0 * spacing)
    if order == 2:
        return (shift(field, 1, axis) - shift(field, -1, axis)) / (2.0 * spacing)
    raise ValueError(f"unsupported stencil order {order}")


def second_deriv(field, spacing, axis, order=4):
    """Central second derivative along one periodic grid axis."""
    if order == 4:
        return (-shift(field, 2, axis) + 16.0 * shift(field, 1, axis) - 30.0 * field
                + 16.0 * shift(field, -1, axis) - shift(field, -2, axis)) / (12.0 * spacing ** 2)
    if order == 2:
        return (shift(field, 1, axis) - 2.0 * field + shift(field, -1, axis)) / spacing ** 2
    raise ValueError(f"unsupported stencil order {order}")


def grid_partials(field, spacings, order=4):
    """All first partials, stacked on a new axis right after the grid axes.

    field (N..., comp...) -> (N..., n, comp...).
    """
    n = len(spacings)
    return np.stack([deriv(field, spacings[i], i, order=order) for i in range(n)],
                    axis=n)


def exterior_derivative_0(f, spacings, order=4):
    """d of a 0-form: (N...,) -> (N..., n)."""
    n = len(spacings)
    return np.stack([deriv(f, spacings[i], i, order=order) for i in range(n)], axis=n)


def exterior_derivative_1(alpha, spacings, order=4):
    """d of a 1-form on a 2-torus grid: (N..., 2) -> (N...,) coefficient."""
    n = len(spacings)
    if n == 1:
        return np.zeros(alpha.shape[:-1])
    if n != 2:
        raise ValueError("exterior derivative of 1-forms implemented for n <= 2")
    return (deriv(alpha[..., 1], spacings[0], 0, order=order)
            - deriv(alpha[..., 0], spacings[1], 1, order=order))


def codifferential_1(alpha, ginv, sqrtg, spacings, order=2):
    """d* of a 1-form: -(1/sqrt g) d_i (sqrt g g^{ij} alpha_j)."""
    n = len(spacings)
    flux = sqrtg[..., None] * np.einsum('...ij,...j->...i', ginv, alpha)
    div = sum(deriv(flux[..., i], spacings[i], i, order=order) for i in range(n))
    return -div / sqrtg


def codifferential_2(w, g, ginv, sqrtg, spacings, order=2):
    """d* of a 2-form on a 2-torus grid; w is the dphi_1 ^ dphi_2 coefficient.

    Uses the antisymmetric-tensor divergence (d*w)^j = -(1/sqrt g) d_i(sqrt g w^{ij}),
    lowered with the induced metric.  Returns a 1-form (N..., 2).
    """
    n = len(spacings)
    if n == 1:
        return np.zeros(w.shape + (1,))
    eps = np.array([[0.0, 1.0], [-1.0, 0.0]])
    w_lo = w[..., None, None] * eps                       # w_{ij}
    w_up = np.einsum('...ia,...jb,...ab->...ij', ginv, ginv, w_lo)
    flux = sqrtg[..., None, None] * w_up
    div = np.stack([sum(deriv(flux[..., i, j], spacings[i], i, order=order)
                        for i in range(n)) for j in range(n)], axis=-1)
    return -np.einsum('...kj,...j->...k', g, div / sqrtg[..., None])


def christoffels_of(g_field, spacings, order=4):
    """Christoffel symbols Gamma^k_{ij} of a metric field g_{ij}(phi)."""
    n = len(spacings)
    dg = grid_partials(g_field, spacings, order=order)     # (N..., c, i, j)
    ginv = np.linalg.inv(g_field)
    # sym[..., i, j, l] = d_i g_{jl} + d_j g_{il} - d_l g_{ij}
    sym = dg + np.swapaxes(dg, -3, -2) - np.moveaxis(dg, -3, -1)
    return 0.5 * np.einsum('...kl,...ijl->...kij', ginv, sym)


def riemann_of(g_field, spacings, order=4):
    """Intrinsic curvature R(e_i,e_j)e_k = R[..., i, j, k, l] e_l of g(phi).

    Returns zeros for one-dimensional grids.
    """
    n = len(spacings)
    if n == 1:
        return np.zeros(g_field.shape[:-2] + (1, 1, 1, 1))
    gam = christoffels_of(g_field, spacings, order=order)          # (..., k, i, j)
    dgam = grid_partials(gam, spacings, order=order)               # (..., c, k, i, j)
    term = np.einsum('...iljk->...ijkl', dgam) - np.einsum('...jlik->...ijkl', dgam)
    quad = (np.einsum('...lim,...mjk->...ijkl', gam, gam)
            - np.einsum('...ljm,...mik->...ijkl', gam, gam))
    return term + quad
