"""Time stepping for the geometric flows, with optional ambient evolution.

Flow kinds (velocities per node):
  mcf     mean curvature                H
  jmcf    J-volume negative gradient    H_J + S_J
  maslov  Maslov form flow              H_J + T_J

Ambient modes:
  static          fixed model
  ke_normalized   fixed Kahler-Einstein model; the measured Einstein constant
                  is recorded and the exponential law for the pullback form
                  is a diagnostic target, not an equation of motion
  krf_potential   flat-plus-bump potential on a box grid advanced by
                  d(phi)/dt = log det(2 phi_{i jbar}), the potential-level
                  realization of the Ricci-form flow of the Kahler form

The ambient grid is advanced by forward Euler once per step and held frozen
across the RK4 stages of the immersion update (the coupling is
one-directional).  A run halts with a terminal status instead of raising:
'degenerate', 'left-domain', 'unstable', or 'ambient degenerate'.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy import ndimage

from .ambient import (AmbientModel, ChartDomain, ChartDomainError,
                      DegenerateImmersionError, smooth_bump)
from .immersion import Immersion, frames
from .tensors import (mean_curvature, j_mean_curvature, torsion_vector,
                      gradient_correction, integrability_residual)
from . import calibration


@dataclass(frozen=True)
class FlowConfig:
    kind: str = 'maslov'                 # mcf | jmcf | maslov
    ambient_mode: str = 'static'         # static | ke_normalized | krf_potential
    dt: float = 1e-4
    steps: int = 200
    integrator: str = 'rk4'              # euler | rk4
    diagnostics_every: int = 10
    margin_min: float = 1e-6
    snapshot_every: int = 0              # 0 = start and end only


def velocity_field(fr, kind):
    if kind == 'mcf':
        return mean_curvature(fr)
    if kind not in ('jmcf', 'maslov'):
        raise ValueError(f"unknown flow kind '{kind}'")
    if fr.model.is_kahler:
        # torsion vanishes for the Chern = Levi-Civita connection, so both
        # flows reduce to H_J; the vanishing itself is checked elsewhere
        return j_mean_curvature(fr)
    if kind == 'jmcf':
        return j_mean_curvature(fr) + gradient_correction(fr)
    return j_mean_curvature(fr) + torsion_vector(fr)


def stability_estimate(fr):
    """dt-independent symbol-eigenvalue estimate at the grid Nyquist mode."""
    shape = fr.immersion.grid.shape
    diag = np.einsum('...ii->...i', fr.ginv)
    return float(np.max(np.sum(diag * np.array([(s / 2) ** 2 for s in shape]), axis=-1)))


@dataclass
class FlowState:
    t: float
    immersion: Immersion
    model: AmbientModel
    potential: Optional['PotentialGrid'] = None
    status: str = 'running'


@dataclass
class FlowResult:
    series: list
    snapshots: list
    status: str
    einstein_constant: Optional[float] = None


def _try_frames(state, cfg):
    try:
        return frames(state.immersion, state.model, margin=cfg.margin_min), None
    except DegenerateImmersionError:
        return None, 'degenerate'
    except ChartDomainError:
        return None, 'left-domain'


def flow_step(state: FlowState, cfg: FlowConfig):
    """One explicit time step; returns the new state (terminal on failure)."""
    if state.status not in ('running',):
        return state
    dt = cfg.dt

    def vel(immersion):
        fr = frames(immersion, state.model, margin=cfg.margin_min)
        return velocity_field(fr, cfg.kind)

    try:
        if cfg.integrator == 'euler':
            k = vel(state.immersion)
            delta = dt * k
        elif cfg.integrator == 'rk4':
            im = state.immersion
            k1 = vel(im)
            k2 = vel(im.displaced(0.5 * dt * k1))
            k3 = vel(im.displaced(0.5 * dt * k2))
            k4 = vel(im.displaced(dt * k3))
            delta = (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        else:
            raise ValueError(f"unknown integrator '{cfg.integrator}'")
    except DegenerateImmersionError:
        return replace(state, status='degenerate')
    except ChartDomainError:
        return replace(state, status='left-domain')

    if np.max(np.linalg.norm(delta, axis=-1)) > 10.0 * min(state.immersion.grid.spacings):
        return replace(state, status='unstable')

    new_im = state.immersion.displaced(delta)
    new_state = FlowState(t=state.t + dt, immersion=new_im, model=state.model,
                          potential=state.potential, status='running')

    if cfg.ambient_mode == 'krf_potential':
        try:
            new_pot = state.potential.krf_step(dt)
        except DegenerateImmersionError:
            return replace(new_state, status='ambient degenerate')
        new_state.potential = new_pot
        new_state.model = new_pot.to_model()
    return new_state


def _diagnostic_row(state, cfg, cy=None):
    fr, fail = _try_frames(state, cfg)
    if fr is None:
        return {'t': state.t, 'status': fail}, None
    vol_g, vol_j = fr.volumes()
    row = {
        't': state.t,
        'vol_g': vol_g,
        'vol_j': vol_j,
        'sup_omega': float(np.max(fr.omega_sup())),
        'min_rhoJ': float(np.min(fr.rho)),
        'theta_min': float('nan'),
        'theta_max': float('nan'),
        'integrability_residual': integrability_residual(fr),
        'status': state.status,
    }
    if cy is not None and state.model.is_flat_cy:
        af = calibration.angle_field_from_frames(fr, cy)
        row['theta_min'] = float(np.min(af.theta_lift))
        row['theta_max'] = float(np.max(af.theta_lift))
    return row, fr


def run_flow(immersion, model, cfg: FlowConfig, cy=None, einstein_points=None):
    """Run a flow, recording the diagnostics series and omega snapshots."""
    lam = None
    if cfg.ambient_mode == 'ke_normalized':
        pts = einstein_points if einstein_points is not None \
            else _points_near(immersion, model)
        lam, _ = model.einstein_ratio(pts)

    potential = None
    if cfg.ambient_mode == 'krf_potential':
        potential = model
        if not isinstance(potential, PotentialGrid):
            raise ValueError("krf_potential mode expects a PotentialGrid")
        model = potential.to_model()

    state = FlowState(t=0.0, immersion=immersion, model=model, potential=potential)
    fr0, fail = _try_frames(state, cfg)
    if fr0 is None:
        return FlowResult([], [], fail, lam)
    if cfg.integrator == 'euler':
        est = stability_estimate(fr0) * cfg.dt
        if est > 0.25:
            warnings.warn(f"euler step dt * symbol estimate = {est:.3f} exceeds 0.25",
                          stacklevel=2)

    series, snapshots = [], []

    def snap(state, fr):
        snapshots.append({'t': state.t,
                          'omega': fr.omega.copy(),
                          'immersion': state.immersion})

    row, fr = _diagnostic_row(state, cfg, cy)
    series.append(row)
    snap(state, fr)

    for step_index in range(1, cfg.steps + 1):
        state = flow_step(state, cfg)
        if state.status != 'running':
            series.append({'t': state.t, 'status': state.status})
            break
        on_cadence = (step_index % cfg.diagnostics_every == 0
                      or step_index == cfg.steps)
        if on_cadence:
            row, fr = _diagnostic_row(state, cfg, cy)
            series.append(row)
            if fr is None:
                state = replace(state, status=row['status'])
                break
            if cfg.snapshot_every and step_index % cfg.snapshot_every == 0:
                snap(state, fr)
    else:
        state = replace(state, status='completed')
    if state.status == 'running':
        state = replace(state, status='completed')

    fr_final, fail = _try_frames(state, cfg)
    if fr_final is not None:
        snap(state, fr_final)
    final_status = state.status if state.status != 'completed' else 'completed'
    for row in series:
        if row.get('status') == 'running':
            row['status'] = 'completed' if final_status == 'completed' else final_status
    return FlowResult(series, snapshots, final_status, lam)


def _points_near(immersion, model, count=2000, seed=11):
    """Einstein-ratio sample cloud around the immersion, inside the chart."""
    rng = np.random.default_rng(seed)
    pos = immersion.positions().reshape(-1, immersion.dim)
    idx = rng.integers(0, len(pos), size=count)
    pts = pos[idx] + 0.02 * rng.normal(size=(count, immersion.dim))
    keep = model.domain.contains(pts)
    return pts[keep]


# ---------------------------------------------------------------------------
# Kahler-Ricci flow at the potential level
# ---------------------------------------------------------------------------

def _grid_d1(arr, h, axis):
    # 4th-order central differences with wrap-around: the bump fields vanish
    # to rounding near the frozen flat boundary, so the wrap is inert
    def sh(k):
        return np.roll(arr, -k, axis=axis)
    return (-sh(2) + 8.0 * sh(1) - 8.0 * sh(-1) + sh(-2)) / (12.0 * h)


@dataclass(frozen=True)
class PotentialGrid:
    """phi = |z|^2/2 + psi on a symmetric box grid, flat frozen at the boundary."""

    n: int
    half_width: float
    psi: np.ndarray                      # (S,) * 2n values of the bump part
    domain_margin: float = 0.85

    @property
    def dim(self):
        return 2 * self.n

    @property
    def shape(self):
        return self.psi.shape

    @property
    def spacing(self):
        return 2.0 * self.half_width / (self.shape[0] - 1)

    @classmethod
    def from_bump(cls, n, half_width, nodes, eps, center=None, width=1.0):
        axes = [np.linspace(-half_width, half_width, nodes)] * (2 * n)
        mesh = np.stack(np.meshgrid(*axes, indexing='ij'), axis=-1)
        center = np.zeros(2 * n) if center is None else np.asarray(center)
        psi = eps * smooth_bump(mesh, center, width)
        return cls(n=n, half_width=half_width, psi=psi)

    def _psi_hessian(self):
        h = self.spacing
        dim = self.dim
        grads = [_grid_d1(self.psi, h, c) for c in range(dim)]
        hess = np.empty(self.shape + (dim, dim))
        for a in range(dim):
            for b in range(a, dim):
                hess[..., a, b] = _grid_d1(grads[a], h, b)
                hess[..., b, a] = hess[..., a, b]
        return hess

    def complex_hessian(self):
        """phi_{j kbar} = A + iB on the grid, including the flat part."""
        hess = self._psi_hessian()
        n = self.n
        A = np.zeros(self.shape + (n, n))
        B = np.zeros(self.shape + (n, n))
        for j in range(n):
            for k in range(n):
                A[..., j, k] = (hess[..., 2 * j, 2 * k] + hess[..., 2 * j + 1, 2 * k + 1]) / 4.0
                B[..., j, k] = (hess[..., 2 * j, 2 * k + 1] - hess[..., 2 * k, 2 * j + 1]) / 4.0
        A += 0.5 * np.eye(n)
        return A, B

    def krf_rhs(self):
        """log det(2 phi_{j kbar}): zero on the flat background."""
        A, B = self.complex_hessian()
        hc = A + 1j * B
        sign, logdet = np.linalg.slogdet(2.0 * hc)
        if np.any(sign.real <= 0):
            raise DegenerateImmersionError("ambient degenerate: potential lost "
                                           "plurisubharmonicity")
        return logdet.real

    def krf_step(self, dt):
        return replace(self, psi=self.psi + dt * self.krf_rhs())

    @staticmethod
    def _assemble_two_form(A, B):
        """i d dbar assembly: hermitian blocks (A, B) -> real 2n x 2n 2-form."""
        n = A.shape[-1]
        om = np.zeros(A.shape[:-2] + (2 * n, 2 * n))
        for j in range(n):
            for k in range(n):
                om[..., 2 * j, 2 * k] = -2.0 * B[..., j, k]
                om[..., 2 * j, 2 * k + 1] = 2.0 * A[..., j, k]
                om[..., 2 * j + 1, 2 * k] = -2.0 * A[..., j, k]
                om[..., 2 * j + 1, 2 * k + 1] = -2.0 * B[..., j, k]
        return om

    @staticmethod
    def _assemble_metric(A, B):
        n = A.shape[-1]
        g = np.zeros(A.shape[:-2] + (2 * n, 2 * n))
        for j in range(n):
            for k in range(n):
                g[..., 2 * j, 2 * k] = 2.0 * A[..., j, k]
                g[..., 2 * j, 2 * k + 1] = 2.0 * B[..., j, k]
                g[..., 2 * j + 1, 2 * k] = -2.0 * B[..., j, k]
                g[..., 2 * j + 1, 2 * k + 1] = 2.0 * A[..., j, k]
        return g

    def ricci_form_grid(self):
        """rho = -(i d dbar of log det) assembled from grid Hessians."""
        u = self.krf_rhs()
        h = self.spacing
        dim = self.dim
        grads = [_grid_d1(u, h, c) for c in range(dim)]
        hess = np.empty(self.shape + (dim, dim))
        for a in range(dim):
            for b in range(a, dim):
                hess[..., a, b] = _grid_d1(grads[a], h, b)
                hess[..., b, a] = hess[..., a, b]
        n = self.n
        Au = np.zeros(self.shape + (n, n))
        Bu = np.zeros(self.shape + (n, n))
        for j in range(n):
            for k in range(n):
                Au[..., j, k] = (hess[..., 2 * j, 2 * k] + hess[..., 2 * j + 1, 2 * k + 1]) / 4.0
                Bu[..., j, k] = (hess[..., 2 * j, 2 * k + 1] - hess[..., 2 * k, 2 * j + 1]) / 4.0
        return -self._assemble_two_form(Au, Bu)

    def to_model(self):
        """Grid-backed ambient model: cubic interpolation of tensor grids."""
        A, B = self.complex_hessian()
        g_grid = self._assemble_metric(A, B)
        om_grid = self._assemble_two_form(A, B)
        h = self.spacing
        dim = self.dim
        dg_grid = np.stack([_grid_d1(g_grid, h, c) for c in range(dim)], axis=-3)
        rho_grid = self.ricci_form_grid()
        return GridAmbientModel(self, g_grid, om_grid, dg_grid, rho_grid)


class GridAmbientModel(AmbientModel):
    """Kahler model read off a potential grid; curvature limited to the Ricci form."""

    def __init__(self, grid: PotentialGrid, g_grid, om_grid, dg_grid, rho_grid):
        self._grid = grid
        dim = grid.dim
        domain = ChartDomain('box', bounds=grid.domain_margin * grid.half_width)
        super().__init__(grid.n, 'krf-potential-grid', domain,
                         metric_fn=self._make_interp(g_grid, (dim, dim)),
                         omega_fn=self._make_interp(om_grid, (dim, dim)),
                         dmetric_fn=self._make_interp(dg_grid, (dim, dim, dim)),
                         scheme='fd', h_amb=grid.spacing, is_kahler=True,
                         name='krf-potential-grid')
        self._rho_fn = self._make_interp(rho_grid, (dim, dim))

    def _make_interp(self, tensor_grid, comp_shape):
        grid = self._grid
        flat = tensor_grid.reshape(grid.shape + (-1,))
        ncomp = flat.shape[-1]
        filtered = [ndimage.spline_filter(flat[..., i], order=3) for i in range(ncomp)]

        def interp(pts):
            coords = (np.moveaxis(pts, -1, 0) + grid.half_width) / grid.spacing
            flat_coords = coords.reshape(grid.dim, -1)
            vals = np.stack([
                ndimage.map_coordinates(f, flat_coords, order=3, prefilter=False,
                                        mode='nearest')
                for f in filtered], axis=-1)
            return vals.reshape(pts.shape[:-1] + comp_shape)

        return interp

    def ricci_form(self, pts):
        return self._rho_fn(np.asarray(pts, dtype=float))

    def ricci(self, pts):
        # rho(X, Y) = Ric(JX, Y) inverted through J
        rho = self.ricci_form(pts)
        jinv = -self.jmat(pts)
        return np.einsum('...ca,...cb->...ab', jinv, rho)

    def chern_ricci_form(self, pts):
        return 2.0 * self.ricci_form(pts)

    def riemann(self, pts):
        raise NotImplementedError("grid-backed models expose only the Ricci form")

    def chern_riemann(self, pts):
        raise NotImplementedError("grid-backed models expose only the Ricci form")


def krf_form_evolution_residual(grid: PotentialGrid, dt, sample_pts):
    """sup |(omega_{t+dt} - omega_t)/dt + rho| at sample points.

    The time derivative is measured from successive grid states; rho is
    evaluated through the Levi-Civita curvature of the interpolated metric,
    an independent route from the log-det evolution driving the grid.
    """
    model_now = grid.to_model()
    model_next = grid.krf_step(dt).to_model()
    om0 = model_now.omega(sample_pts)
    om1 = model_next.omega(sample_pts)
    riem = AmbientModel.riemann(model_now, sample_pts)
    ric = np.einsum('...abca->...bc', riem)
    rho = np.einsum('...ca,...cb->...ab', model_now.jmat(sample_pts), ric)
    return float(np.max(np.abs((om1 - om0) / dt + rho)))
