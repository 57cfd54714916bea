"""Calabi-Yau calibration toolkit on flat models.

The built-in holomorphic volume form is e^{i theta0} dz^1 ^ ... ^ dz^n on
flat C^n or the flat torus (these are the only models carrying a parallel
unit-length (n,0)-form in closed form).  Complexification follows the chart
convention z_k = x_k + i y_k, so a real ambient vector v has complex
coordinates v[2k] + i v[2k+1].

Angles are computed two ways: intrinsically from the ratio of the volume
form to the Hermitian norm of the frame, and through the unitary factor of
the polar decomposition; they agree to rounding on flat metrics and the
pair is kept as a standing cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ambient import GeometryError
from .immersion import FrameField, frames


@dataclass(frozen=True)
class CalabiYau:
    """Constant holomorphic volume form e^{i phase} dz^1 ^ ... ^ dz^n."""

    n: int
    phase: float = 0.0

    def check_model(self, model):
        if not model.is_flat_cy:
            raise GeometryError(
                f"model '{model.name}' carries no built-in parallel volume form; "
                "Calabi-Yau checks run on flat / flat-torus models only")


def complex_frame_matrix(vs):
    """(..., n, 2n) real frame vectors -> (..., n, n) complex matrix M_{ij} = dz_j(v_i)."""
    return vs[..., 0::2] + 1j * vs[..., 1::2]


def volume_form_value(vs, cy: CalabiYau):
    """Omega(v_1, ..., v_n) as a complex number."""
    return np.exp(1j * cy.phase) * np.linalg.det(complex_frame_matrix(vs))


def hermitian_gram(vs):
    """h(v_i, v_j) = g(v_i, v_j) - i omega(v_i, v_j) for the flat structures."""
    m = complex_frame_matrix(vs)
    return np.einsum('...ij,...kj->...ik', m, m.conj())


def hermitian_frame_norm(vs):
    """|v_1 ^ ... ^ v_n|_h = sqrt(det h(v_i, v_j)) (flat Hermitian metric)."""
    det = np.linalg.det(hermitian_gram(vs))
    return np.sqrt(np.abs(det.real))


def angle_intrinsic(vs, cy: CalabiYau):
    """theta with e^{i theta} = Omega(v) / |v_1 ^ ... ^ v_n|_h, mod 2 pi."""
    val = volume_form_value(vs, cy)
    norm = hermitian_frame_norm(vs)
    if np.any(np.abs(val) < 1e-12 * np.maximum(norm, 1e-300)) or np.any(norm == 0):
        raise GeometryError("partially complex frame: |Omega(v)| below threshold")
    return np.angle(val / norm)


def angle_polar(vs, cy: CalabiYau):
    """theta from the unitary polar factor of the complex frame matrix."""
    m = complex_frame_matrix(vs)
    u, s, vh = np.linalg.svd(m)
    if np.any(s[..., -1] < 1e-12 * np.maximum(s[..., 0], 1e-300)):
        raise GeometryError("partially complex frame: polar factor is singular")
    unitary = u @ vh
    return np.angle(np.exp(1j * cy.phase) * np.linalg.det(unitary))


# ---------------------------------------------------------------------------
# angle fields, unwrapping, Maslov class data
# ---------------------------------------------------------------------------

@dataclass
class AngleField:
    theta_raw: np.ndarray       # (N...,) in (-pi, pi]
    theta_lift: np.ndarray      # continuous lift, theta_lift[0...0] = theta_raw[0...0]
    windings: tuple             # integer winding per grid generator
    mu: np.ndarray              # (N..., n) the angle-derivative (Maslov) 1-form


def _branch(delta):
    return delta - 2.0 * np.pi * np.round(delta / (2.0 * np.pi))


def _lift_axis(raw, lift, axis):
    """Propagate the lift along one axis by nearest-branch increments."""
    n_nodes = raw.shape[axis]
    idx = [slice(None)] * raw.ndim
    for k in range(1, n_nodes):
        idx_prev, idx_k = list(idx), list(idx)
        idx_prev[axis] = k - 1
        idx_k[axis] = k
        step = _branch(np.take(raw, k, axis) - np.take(raw, k - 1, axis))
        if np.any(np.abs(step) >= 0.9 * np.pi):
            raise GeometryError("insufficient resolution: ambiguous angle jump "
                                f"along axis {axis}")
        lift[tuple(idx_k)] = lift[tuple(idx_prev)] + step
    return lift


def unwrap_angles(raw):
    """Continuous lift over the periodic grid plus integer generator windings.

    Lifts along axis 0 from the origin row, then along axis 1 per column;
    closure around each generator must be an integer multiple of 2 pi and
    plaquette windings must vanish, else the grid is too coarse.
    """
    lift = np.array(raw, dtype=float)
    ndim = raw.ndim
    if ndim == 1:
        lift = _lift_axis(raw, lift, 0)
    else:
        first_col = _lift_axis(raw[:, :1], np.array(raw[:, :1]), 0)
        lift[:, :1] = first_col
        lift = _lift_axis(raw, lift, 1)
    windings = []
    for axis in range(ndim):
        closure = _branch(np.take(raw, 0, axis) - np.take(raw, -1, axis))
        total = np.take(lift, -1, axis) + closure - np.take(lift, 0, axis)
        w = total / (2.0 * np.pi)
        w_int = np.round(w)
        if np.any(np.abs(w - w_int) > 1e-6) or np.ptp(w_int) != 0:
            raise GeometryError("insufficient resolution: non-integer or "
                                f"inconsistent winding along axis {axis}")
        windings.append(int(w_int.flat[0]))
    return lift, tuple(windings)


def angle_field(immersion, model, cy: CalabiYau):
    """Per-node Lagrangian angle with lift, windings, and the Maslov 1-form."""
    cy.check_model(model)
    fr = frames(immersion, model)
    return angle_field_from_frames(fr, cy)


def angle_field_from_frames(fr: FrameField, cy: CalabiYau):
    raw = angle_intrinsic(fr.t, cy)
    lift, windings = unwrap_angles(raw)
    grid = fr.immersion.grid
    # differentiate the lift with winding-aware periodic extension
    mu = np.stack([_winding_deriv(lift, windings[axis], grid.spacings[axis], axis)
                   for axis in range(grid.n)], axis=-1)
    rewrap = _branch(lift - raw)
    if np.max(np.abs(rewrap)) > 1e-10:
        raise GeometryError("angle lift failed to re-wrap onto the raw angle")
    return AngleField(theta_raw=raw, theta_lift=lift, windings=windings, mu=mu)


def _winding_deriv(lift, winding, spacing, axis):
    n_nodes = lift.shape[axis]
    jump = 2.0 * np.pi * winding
    # build the periodicized increments of the lift: lift(phi + 2pi e) = lift + jump
    def shifted(k):
        s = np.roll(lift, -k, axis=axis)
        if k == 0:
            return s
        ramp = np.zeros(n_nodes)
        if k > 0:
            ramp[n_nodes - k:] = jump
        else:
            ramp[:-k] = -jump
        shape = [1] * lift.ndim
        shape[axis] = n_nodes
        return s + ramp.reshape(shape)
    return (-shifted(2) + 8.0 * shifted(1) - 8.0 * shifted(-1) + shifted(-2)) / (12.0 * spacing)


def maslov_class_integrals(field: AngleField):
    """Integrals of the Maslov form over the grid generators, in units of 2 pi."""
    return tuple(2.0 * np.pi * w for w in field.windings)


def maslov_vs_connection_residual(fr: FrameField, cy: CalabiYau):
    """sup-node |xi_J + mu_L|: the Maslov form against the angle derivative."""
    from .tensors import maslov_form
    cy.check_model(fr.model)
    field = angle_field_from_frames(fr, cy)
    return float(np.max(np.abs(maslov_form(fr) + field.mu)))


# ---------------------------------------------------------------------------
# calibration inequalities and the STR condition
# ---------------------------------------------------------------------------

def calibration_inequality(vs, cy: CalabiYau, theta, tol=1e-10):
    """Check Re(e^{i theta} Omega)|pi <= vol_J <= vol_g on an oriented frame.

    Returns a dict of slacks and the equality-case classification.
    """
    vs = np.asarray(vs, dtype=float)
    val = np.exp(1j * theta) * volume_form_value(vs, cy)
    vol_j = np.abs(volume_form_value(vs, cy))
    gram_r = np.einsum('...ia,...ja->...ij', vs, vs)
    vol_g = np.sqrt(np.linalg.det(gram_r))
    slack1 = vol_j - val.real
    slack2 = vol_g - vol_j
    omega_sup = float(np.max(np.abs(hermitian_gram(vs).imag)))
    return {
        'calibrated_value': float(val.real),
        'vol_j': float(vol_j),
        'vol_g': float(vol_g),
        'slack_calibration': float(slack1),
        'slack_lagrangian': float(slack2),
        'first_equality': bool(slack1 <= tol),
        'first_equality_expected': bool(abs(val.imag) <= tol and val.real > 0),
        'second_equality': bool(slack2 <= tol),
        'second_equality_expected': bool(omega_sup <= tol),
    }


def str_phase_residual(fr: FrameField, cy: CalabiYau):
    """Best constant phase and the special-totally-real defect of an immersion.

    Returns (theta_best, sup |Im(e^{i theta} Omega)| density, min Re density,
    lagrangian_defect).  theta_best is the circular mean of -theta_L.
    """
    cy.check_model(fr.model)
    raw = angle_intrinsic(fr.t, cy)
    theta_best = float(np.angle(np.mean(np.exp(-1j * raw))))
    # |sin(theta_L + theta)| * vol_J density = |Im(e^{i theta} Omega)| on the frame
    im_resid = float(np.max(np.abs(np.sin(raw + theta_best)) * fr.rho * fr.sqrtg))
    re_min = float(np.min(np.cos(raw + theta_best) * fr.rho * fr.sqrtg))
    return {
        'theta_best': theta_best,
        'im_residual': im_resid,
        're_min': re_min,
        'lagrangian_defect': float(np.max(fr.omega_sup())),
    }


# ---------------------------------------------------------------------------
# graphs of maps: totally real criterion and the STR equations
# ---------------------------------------------------------------------------

def str_graph_determinant(mat):
    """det_C(I + i M) for a real n x n matrix (field): the graph-angle invariant."""
    mat = np.asarray(mat, dtype=float)
    n = mat.shape[-1]
    return np.linalg.det(np.eye(n) + 1j * mat)


def str_graph_residual(mat):
    """(Im det_C(I + iM), Re det_C(I + iM)); STR graphs have Im = 0, Re > 0."""
    det = str_graph_determinant(mat)
    return det.imag, det.real


def totally_real_graph_check(f_star, j1, j2, threshold=1e-10):
    """Graph of F is totally real iff J2 F_* + F_* J1 is injective."""
    comp = j2 @ f_star + f_star @ j1
    smin = np.linalg.svd(comp, compute_uv=False)[..., -1]
    return bool(np.all(smin > threshold)), float(np.min(smin))


def str_family_root(family, s0, bracket=None, tol=1e-12, max_iter=60):
    """Solve Im det_C(I + i M(s)) = 0 over a scalar family, requiring Re > 0.

    Newton iteration with a bisection fallback on the supplied bracket.
    Families that satisfy the equation identically are detected and flagged.
    """
    def im_of(s):
        return float(str_graph_determinant(family(s)).imag)

    probes = np.linspace(s0 - 1.0, s0 + 1.0, 9)
    if all(abs(im_of(p)) <= tol for p in probes):
        det = str_graph_determinant(family(s0))
        return {'s': float(s0), 'im': float(det.imag), 're': float(det.real),
                'status': 'identically satisfied' if det.real > 0 else 'no STR member found'}

    s = float(s0)
    h = 1e-6 * max(1.0, abs(s0))
    converged = False
    for _ in range(max_iter):
        f = im_of(s)
        if abs(f) <= tol:
            converged = True
            break
        df = (im_of(s + h) - im_of(s - h)) / (2.0 * h)
        if df == 0.0:
            break
        s_new = s - f / df
        if not np.isfinite(s_new):
            break
        s = s_new
    if not converged and bracket is not None:
        lo, hi = bracket
        flo = im_of(lo)
        if flo * im_of(hi) > 0:
            return {'s': s, 'im': im_of(s), 're': float('nan'),
                    'status': 'no STR member found'}
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            fm = im_of(mid)
            if abs(fm) <= tol:
                s, converged = mid, True
                break
            if flo * fm <= 0:
                hi = mid
            else:
                lo, flo = mid, fm
        else:
            s, converged = 0.5 * (lo + hi), abs(im_of(0.5 * (lo + hi))) < 1e-9
    if not converged:
        return {'s': s, 'im': im_of(s), 're': float('nan'),
                'status': 'no STR member found'}
    det = str_graph_determinant(family(s))
    status = 'ok' if det.real > 0 else 'no STR member found'
    return {'s': float(s), 'im': float(det.imag), 're': float(det.real),
            'status': status}


def j_volume_homology_table(base_immersion, model, perturbations, margin=1e-6):
    """Vol_J of the base and of each perturbed immersion in its class.

    Perturbations are periodic displacement fields (N..., 2n); entries that
    break the totally real margin are rejected with an error.
    """
    base_fr = frames(base_immersion, model, margin=margin)
    _, base_vj = base_fr.volumes()
    rows = [{'name': 'base', 'vol_j': base_vj}]
    for k, delta in enumerate(perturbations):
        fr = frames(base_immersion.displaced(delta), model, margin=margin)
        _, vj = fr.volumes()
        rows.append({'name': f'perturbation-{k}', 'vol_j': vj})
    return rows
