"""Model almost Hermitian ambient spaces on coordinate charts of R^{2n} ~ C^n.

Coordinates are ordered (x_1, y_1, ..., x_n, y_n) with z_k = x_k + i y_k.
The standard complex structure J0 sends dx_k -> dy_k; the standard
symplectic form is sum dx_k ^ dy_k.  Index conventions for the tensors a
model evaluates (all evaluators accept batched points of shape (..., 2n)):

  metric(x)          g_{ab}                (..., 2n, 2n)
  jmat(x)            J^a_b                 (..., 2n, 2n)
  omega(x)           w_{ab} = g(J e_a, e_b)
  christoffel(x)     Gamma^a_{bc}, b = direction   (..., 2n, 2n, 2n)
  nabla_j(x)         (nabla_c J)^a_b       (..., c, a, b)
  chern_christoffel  Gamma^a_{bc} of the Chern connection
  torsion(x)         T^a_{bc} = chern antisymmetrized in (b, c)
  riemann(x)         R(e_a, e_b)e_c = R[..., a, b, c, d] e_d
  ricci(x), ricci_form(x), chern_riemann(x), chern_ricci_form(x)

Kahler-potential models take g from the complex Hessian of a potential;
almost Kahler models keep the standard symplectic form and build J from an
arbitrary metric by polar retraction.  Derivatives are analytic (sympy
closed forms) or central differences of step h_amb: 4th order for first
derivatives, 2nd order at the curvature level.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
import numpy as np
import sympy as sp


class GeometryError(Exception):
    pass


class ConstructionError(GeometryError):
    pass


class DegenerateImmersionError(GeometryError):
    pass


class ChartDomainError(GeometryError):
    pass


def standard_complex_structure(n):
    """J0 as a matrix, J0 @ v applies J to column vectors."""
    j = np.zeros((2 * n, 2 * n))
    for k in range(n):
        j[2 * k + 1, 2 * k] = 1.0     # J dx_k = dy_k
        j[2 * k, 2 * k + 1] = -1.0    # J dy_k = -dx_k
    return j


def standard_symplectic_form(n):
    om = np.zeros((2 * n, 2 * n))
    for k in range(n):
        om[2 * k, 2 * k + 1] = 1.0
        om[2 * k + 1, 2 * k] = -1.0
    return om


@dataclass(frozen=True)
class ChartDomain:
    """Open chart domain: a box, a ball, or the full periodic torus chart."""

    kind: str                     # 'box' | 'ball' | 'periodic'
    radius: float = np.inf        # ball radius
    bounds: float = np.inf        # half-width of the symmetric box
    period: float = 2.0 * np.pi   # periodic lattice spacing

    def contains(self, pts):
        if self.kind == 'periodic':
            return np.ones(pts.shape[:-1], dtype=bool)
        if self.kind == 'ball':
            return np.sum(pts ** 2, axis=-1) < self.radius ** 2
        return np.all(np.abs(pts) < self.bounds, axis=-1)

    def wrap(self, pts):
        if self.kind == 'periodic':
            return np.mod(pts, self.period)
        return pts


def _fd_weights(order):
    # offsets and weights for the first-derivative central stencil
    if order == 4:
        return [(-2, 1.0 / 12.0), (-1, -8.0 / 12.0), (1, 8.0 / 12.0), (2, -1.0 / 12.0)]
    return [(-1, -0.5), (1, 0.5)]


def fd_partials(fn, pts, h, order=4):
    """First partials of a batched evaluator: fn (...,2n)->(...,S) gives (...,2n,S).

    Builds one stacked call so vectorized evaluators stay vectorized.
    """
    dim = pts.shape[-1]
    weights = _fd_weights(order)
    stencil = []
    for c in range(dim):
        e = np.zeros(dim)
        e[c] = 1.0
        for off, _ in weights:
            stencil.append(pts + (off * h) * e)
    stacked = fn(np.stack(stencil, axis=0))
    per_dir = len(weights)
    out = []
    for c in range(dim):
        block = stacked[c * per_dir:(c + 1) * per_dir]
        out.append(sum(w * block[i] for i, (_, w) in enumerate(weights)) / h)
    return np.stack(out, axis=pts.ndim - 1)


class AmbientModel:
    """Almost Hermitian chart model; immutable after construction.

    Subclass-free: behaviour is wired through the primitive evaluator
    callables handed to the constructor, plus optional analytic metric
    derivatives.  All evaluators are pure functions of their inputs.
    """

    def __init__(self, n, kind, domain, metric_fn, jmat_fn=None, omega_fn=None,
                 dmetric_fn=None, d2metric_fn=None, scheme='analytic',
                 h_amb=1e-3, is_kahler=False, is_flat_cy=False, name='',
                 flat_connection=False):
        self.n = n
        self.dim = 2 * n
        self.kind = kind
        self.domain = domain
        self.scheme = scheme
        self.h_amb = h_amb
        self.is_kahler = is_kahler
        self.is_flat_cy = is_flat_cy
        self.name = name or kind
        self._metric_fn = metric_fn
        self._jmat_fn = jmat_fn
        self._omega_fn = omega_fn
        self._dmetric_fn = dmetric_fn
        self._d2metric_fn = d2metric_fn
        self._j0 = standard_complex_structure(n)
        self._flat_connection = flat_connection

    # -- primitive fields ---------------------------------------------------

    def metric(self, pts):
        return self._metric_fn(np.asarray(pts, dtype=float))

    def jmat(self, pts):
        pts = np.asarray(pts, dtype=float)
        if self._jmat_fn is None:
            return np.broadcast_to(self._j0, pts.shape[:-1] + (self.dim, self.dim)).copy()
        return self._jmat_fn(pts)

    def omega(self, pts):
        pts = np.asarray(pts, dtype=float)
        if self._omega_fn is not None:
            return self._omega_fn(pts)
        return np.einsum('...ca,...cb->...ab', self.jmat(pts), self.metric(pts))

    def inverse_metric(self, pts):
        return np.linalg.inv(self.metric(pts))

    # -- derivatives of the metric and J ------------------------------------

    def dmetric(self, pts):
        if self._dmetric_fn is not None:
            return self._dmetric_fn(pts)
        return fd_partials(self.metric, pts, self.h_amb, order=4)

    def djmat(self, pts):
        if self._jmat_fn is None:
            return np.zeros(pts.shape[:-1] + (self.dim,) * 3)
        return fd_partials(self.jmat, pts, self.h_amb, order=4)

    # -- connections ---------------------------------------------------------

    def connection_bundle(self, pts):
        """Levi-Civita and Chern data sharing evaluations of g and its derivatives."""
        if self._flat_connection:
            zeros = np.zeros(pts.shape[:-1] + (self.dim,) * 3)
            return {'metric': self.metric(pts),
                    'inverse_metric': self.metric(pts), 'dmetric': zeros,
                    'jmat': self.jmat(pts), 'christoffel': zeros,
                    'nabla_j': zeros, 'chern_christoffel': zeros,
                    'torsion': zeros}
        g = self.metric(pts)
        dg = self.dmetric(pts)
        ginv = np.linalg.inv(g)
        sym = dg + np.swapaxes(dg, -3, -2) - np.moveaxis(dg, -3, -1)
        gam = 0.5 * np.einsum('...kl,...ijl->...kij', ginv, sym, optimize=True)
        j = self.jmat(pts)
        dj = self.djmat(pts)
        nj = dj + (np.einsum('...acd,...db->...cab', gam, j, optimize=True)
                   - np.einsum('...dcb,...ad->...cab', gam, j, optimize=True))
        chern = gam + 0.5 * np.einsum('...cad,...db->...acb', nj, j, optimize=True)
        return {
            'metric': g, 'inverse_metric': ginv, 'dmetric': dg, 'jmat': j,
            'christoffel': gam, 'nabla_j': nj, 'chern_christoffel': chern,
            'torsion': chern - np.swapaxes(chern, -2, -1),
        }

    def christoffel(self, pts):
        return self.connection_bundle(pts)['christoffel']

    def nabla_j(self, pts):
        """(nabla_c J)^a_b for the Levi-Civita connection, stored (..., c, a, b)."""
        return self.connection_bundle(pts)['nabla_j']

    def chern_christoffel(self, pts):
        """Chern coefficients: Levi-Civita plus half (nabla J) J in the argument slot."""
        return self.connection_bundle(pts)['chern_christoffel']

    def torsion(self, pts):
        """T^a_{bc} of the Chern connection (antisymmetric part of its coefficients)."""
        return self.connection_bundle(pts)['torsion']

    def torsion_vector_value(self, pts, X, Y):
        """T(X, Y) as an ambient vector at pts."""
        return np.einsum('...abc,...b,...c->...a', self.torsion(pts), X, Y)

    # -- curvature -----------------------------------------------------------

    def riemann(self, pts):
        """Levi-Civita curvature R[..., a, b, c, d]: R(e_a, e_b)e_c = R[...]e_d."""
        if self._dmetric_fn is not None and self._d2metric_fn is not None:
            return self._riemann_analytic(pts)
        dgam = fd_partials(self.christoffel, pts, self.h_amb, order=2)
        return self._riemann_from(self.christoffel(pts), dgam)

    def chern_riemann(self, pts):
        """Curvature of the Chern connection; equals riemann on Kahler models."""
        if self.is_kahler:
            return self.riemann(pts)
        dch = fd_partials(self.chern_christoffel, pts, self.h_amb, order=2)
        return self._riemann_from(self.chern_christoffel(pts), dch)

    @staticmethod
    def _riemann_from(gam, dgam):
        term = (np.einsum('...adbc->...abcd', dgam)
                - np.einsum('...bdac->...abcd', dgam))
        quad = (np.einsum('...dam,...mbc->...abcd', gam, gam)
                - np.einsum('...dbm,...mac->...abcd', gam, gam))
        return term + quad

    def _riemann_analytic(self, pts):
        g = self.metric(pts)
        dg = self._dmetric_fn(pts)
        d2g = self._d2metric_fn(pts)           # (..., c, d, a, b) = d_c d_d g_{ab}
        ginv = np.linalg.inv(g)
        dginv = -np.einsum('...ka,...cab,...bl->...ckl', ginv, dg, ginv)
        sym = dg + np.swapaxes(dg, -3, -2) - np.moveaxis(dg, -3, -1)
        # d_m sym[..., i, j, l]
        dsym = (d2g + np.swapaxes(d2g, -3, -2) - np.moveaxis(d2g, -3, -1))
        gam = 0.5 * np.einsum('...kl,...ijl->...kij', ginv, sym)
        dgam = (0.5 * np.einsum('...mkl,...ijl->...mkij', dginv, sym)
                + 0.5 * np.einsum('...kl,...mijl->...mkij', ginv, dsym))
        return self._riemann_from(gam, dgam)

    def ricci(self, pts):
        """Ric_{bc} = tr(Z -> R(Z, e_b) e_c)."""
        r = self.riemann(pts)
        return np.einsum('...abca->...bc', r)

    def ricci_form(self, pts):
        """rho(X, Y) = Ric(JX, Y)."""
        return np.einsum('...ca,...cb->...ab', self.jmat(pts), self.ricci(pts))

    def chern_ricci_form(self, pts):
        """P(X, Y) = omega(R~(X,Y) e_j, e_j) over a g-orthonormal frame.

        The trace is frame independent; contracting with g^{-1} is exact for
        any orthonormalization of the coordinate frame.
        """
        rt = self.chern_riemann(pts)
        om = self.omega(pts)
        ginv = self.inverse_metric(pts)
        return np.einsum('...abcd,...de,...ec->...ab', rt, om, ginv)

    # -- diagnostics ----------------------------------------------------------

    def einstein_ratio(self, pts):
        """Median component ratio rho/omega and the max deviation |rho - lam*omega|."""
        pts = np.asarray(pts, dtype=float)
        if pts.shape[0] < 100:
            raise ValueError("einstein_ratio needs at least 100 sample points")
        rho = self.ricci_form(pts)
        om = self.omega(pts)
        mask = np.abs(om) > 1e-8
        lam = float(np.median(rho[mask] / om[mask]))
        dev = float(np.max(np.abs(rho - lam * om)))
        return lam, dev


# ---------------------------------------------------------------------------
# flat models
# ---------------------------------------------------------------------------

def _const_matrix_fn(mat):
    def fn(pts):
        return np.broadcast_to(mat, pts.shape[:-1] + mat.shape).copy()
    return fn


def _zero_dmetric(pts):
    dim = pts.shape[-1]
    return np.zeros(pts.shape[:-1] + (dim,) * 3)


def _zero_d2metric(pts):
    dim = pts.shape[-1]
    return np.zeros(pts.shape[:-1] + (dim,) * 4)


def flat_model(n, bounds=np.inf):
    """Flat C^n with the standard structures."""
    dim = 2 * n
    return AmbientModel(
        n, 'flat', ChartDomain('box', bounds=bounds),
        metric_fn=_const_matrix_fn(np.eye(dim)),
        omega_fn=_const_matrix_fn(standard_symplectic_form(n)),
        dmetric_fn=_zero_dmetric, d2metric_fn=_zero_d2metric,
        is_kahler=True, is_flat_cy=True, name='flat', flat_connection=True)


def flat_torus_model(n, period=2.0 * np.pi):
    """Flat complex torus C^n / (period Z)^{2n}."""
    dim = 2 * n
    return AmbientModel(
        n, 'flat-torus', ChartDomain('periodic', period=period),
        metric_fn=_const_matrix_fn(np.eye(dim)),
        omega_fn=_const_matrix_fn(standard_symplectic_form(n)),
        dmetric_fn=_zero_dmetric, d2metric_fn=_zero_d2metric,
        is_kahler=True, is_flat_cy=True, name='flat-torus', flat_connection=True)


# ---------------------------------------------------------------------------
# Kahler potentials
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KahlerPotential:
    """A strictly plurisubharmonic potential with closed-form derivatives."""

    tag: str
    n: int
    expr: sp.Expr = field(compare=False)
    coords: tuple = field(compare=False)
    domain: ChartDomain = ChartDomain('box')
    params: tuple = ()


def builtin_potential(tag, n, eps=0.05, center=None, width=1.0):
    """Construct one of the builtin potentials as a sympy expression."""
    coords = sp.symbols(' '.join(f'x{k} y{k}' for k in range(1, n + 1)), real=True)
    r2 = sum(c ** 2 for c in coords)
    if tag == 'flat':
        expr, domain = r2 / 2, ChartDomain('box')
    elif tag == 'complex-hyperbolic':
        expr, domain = -sp.log(1 - r2), ChartDomain('ball', radius=1.0)
    elif tag == 'fubini-study-chart':
        expr, domain = sp.log(1 + r2), ChartDomain('box')
    elif tag == 'flat-plus-bump':
        # compactly supported C^5 profile: derivative constants stay tame to
        # order 4, which the curvature evaluators need on coarse grids
        center = tuple(center) if center is not None else (0.0,) * (2 * n)
        s = sum((c - c0) ** 2 for c, c0 in zip(coords, center)) / width ** 2
        bump = sp.Piecewise(((1 - s) ** 6, s < 1), (0, True))
        expr, domain = r2 / 2 + eps * bump, ChartDomain('box')
        return KahlerPotential(tag, n, expr, coords, domain,
                               params=(eps, center, width))
    else:
        raise ConstructionError(f"unknown potential tag '{tag}'")
    return KahlerPotential(tag, n, expr, coords, domain)


def _hermitian_blocks(potential):
    """Real matrices A, B with complex Hessian phi_{j kbar} = A_{jk} + i B_{jk}."""
    phi, coords, n = potential.expr, potential.coords, potential.n
    xs = coords[0::2]
    ys = coords[1::2]
    A = sp.zeros(n, n)
    B = sp.zeros(n, n)
    for j in range(n):
        for k in range(n):
            A[j, k] = (sp.diff(phi, xs[j], xs[k]) + sp.diff(phi, ys[j], ys[k])) / 4
            B[j, k] = (sp.diff(phi, xs[j], ys[k]) - sp.diff(phi, xs[k], ys[j])) / 4
    return A, B


def _metric_omega_syms(potential):
    """Symbolic 2n x 2n matrices of g and omega from the complex Hessian."""
    n = potential.n
    A, B = _hermitian_blocks(potential)
    G = sp.zeros(2 * n, 2 * n)
    Om = sp.zeros(2 * n, 2 * n)
    for j in range(n):
        for k in range(n):
            G[2 * j, 2 * k] = 2 * A[j, k]
            G[2 * j, 2 * k + 1] = 2 * B[j, k]
            G[2 * j + 1, 2 * k] = -2 * B[j, k]
            G[2 * j + 1, 2 * k + 1] = 2 * A[j, k]
            Om[2 * j, 2 * k] = -2 * B[j, k]
            Om[2 * j, 2 * k + 1] = 2 * A[j, k]
            Om[2 * j + 1, 2 * k] = -2 * A[j, k]
            Om[2 * j + 1, 2 * k + 1] = -2 * B[j, k]
    return G, Om


def _lambdify_stack(exprs, coords):
    """Vectorized evaluator pts (..., 2n) -> (..., len(exprs))."""
    fn = sp.lambdify(coords, exprs, modules='numpy', cse=True)

    def evaluate(pts):
        cols = [pts[..., i] for i in range(pts.shape[-1])]
        vals = fn(*cols)
        shape = pts.shape[:-1]
        out = np.empty(shape + (len(exprs),))
        for i, v in enumerate(vals):
            out[..., i] = v
        return out

    return evaluate


def kahler_model_from_potential(potential, scheme='analytic', h_amb=1e-3,
                                sample_pts=None):
    """Build a Kahler model by lambdifying g (and its derivatives if analytic).

    Checks strict plurisubharmonicity on a sample grid at construction; the
    positive-definiteness of g is equivalent to that of the complex Hessian.
    """
    n, dim = potential.n, 2 * potential.n
    coords = potential.coords
    G, Om = _metric_omega_syms(potential)
    g_fn = _lambdify_stack([G[a, b] for a in range(dim) for b in range(dim)], coords)
    om_fn = _lambdify_stack([Om[a, b] for a in range(dim) for b in range(dim)], coords)

    def metric(pts):
        return g_fn(pts).reshape(pts.shape[:-1] + (dim, dim))

    def omega(pts):
        return om_fn(pts).reshape(pts.shape[:-1] + (dim, dim))

    dmetric = d2metric = None
    if scheme == 'analytic':
        dG = [[sp.diff(G[a, b], coords[c]) for a in range(dim) for b in range(dim)]
              for c in range(dim)]
        d2G = [[[sp.diff(G[a, b], coords[c], coords[d])
                 for a in range(dim) for b in range(dim)]
                for d in range(dim)] for c in range(dim)]
        dg_fn = _lambdify_stack([e for row in dG for e in row], coords)
        d2g_fn = _lambdify_stack([e for blk in d2G for row in blk for e in row], coords)

        def dmetric(pts):
            return dg_fn(pts).reshape(pts.shape[:-1] + (dim, dim, dim))

        def d2metric(pts):
            return d2g_fn(pts).reshape(pts.shape[:-1] + (dim, dim, dim, dim))

    model = AmbientModel(
        n, 'kahler-potential', potential.domain, metric_fn=metric,
        omega_fn=omega, dmetric_fn=dmetric, d2metric_fn=d2metric,
        scheme=scheme, h_amb=h_amb, is_kahler=True,
        is_flat_cy=(potential.tag == 'flat'),
        name=f'kahler:{potential.tag}')

    pts = sample_pts if sample_pts is not None else _default_samples(model)
    eigmin = np.linalg.eigvalsh(model.metric(pts)).min(axis=-1)
    if np.any(eigmin <= 0):
        bad = pts[np.argmin(eigmin)]
        raise ConstructionError(
            f"potential '{potential.tag}' is not strictly plurisubharmonic "
            f"at sample point {bad.tolist()}")
    return model


def _default_samples(model, count=512, seed=7):
    rng = np.random.default_rng(seed)
    if model.domain.kind == 'ball':
        pts = rng.normal(size=(4 * count, model.dim))
        pts = pts[np.sum(pts ** 2, axis=-1) < (0.9 * model.domain.radius) ** 2]
        return pts[:count] * 0.9
    half = min(model.domain.bounds, 1.5)
    return rng.uniform(-half, half, size=(count, model.dim))


@lru_cache(maxsize=16)
def builtin_kahler_model(tag, n, scheme='analytic', h_amb=1e-3, eps=0.05,
                         center=None, width=1.0):
    """Cached builder: sympy lambdification is the expensive step."""
    pot = builtin_potential(tag, n, eps=eps, center=center, width=width)
    return kahler_model_from_potential(pot, scheme=scheme, h_amb=h_amb)


# ---------------------------------------------------------------------------
# almost Kahler pair models
# ---------------------------------------------------------------------------

def smooth_bump(pts, center, width):
    """Compactly supported C^5 bump, 1 at the center, 0 for |x-c| >= width."""
    s = np.sum((pts - np.asarray(center)) ** 2, axis=-1) / width ** 2
    return np.where(s < 1.0, (1.0 - np.minimum(s, 1.0)) ** 6, 0.0)


def bump_metric_field(n, eps=0.1, center=None, width=1.0):
    """g' = diag(1 + eps*b(x), 1, ..., 1): the generic non-Kahler seed."""
    center = np.asarray(center) if center is not None else np.zeros(2 * n)

    def gprime(pts):
        dim = pts.shape[-1]
        g = np.broadcast_to(np.eye(dim), pts.shape[:-1] + (dim, dim)).copy()
        g[..., 0, 0] = 1.0 + eps * smooth_bump(pts, center, width)
        return g

    return gprime


def almost_kahler_model_from_pair(gprime_fn, n, h_amb=1e-3, bounds=np.inf,
                                  sample_pts=None):
    """Polar-retraction almost Kahler structure from (omega standard, g').

    A is defined by omega(X,Y) = g'(AX,Y); J = A(A^t A)^{-1/2} with transpose
    and square root taken in g'; gbar(X,Y) = omega(X, JY).  dOmega = 0 holds
    exactly because omega is the constant standard form.
    """
    om0 = standard_symplectic_form(n)

    def structures(pts):
        gp = gprime_fn(pts)
        if np.any(np.linalg.eigvalsh(gp).min(axis=-1) <= 0):
            raise ConstructionError("g' is not positive definite on the chart")
        L = np.linalg.cholesky(gp)
        a = -np.linalg.solve(gp, np.broadcast_to(om0, gp.shape))
        b = np.swapaxes(L, -2, -1) @ a @ np.swapaxes(np.linalg.inv(L), -2, -1)
        u, s, vh = np.linalg.svd(b)
        if np.any(s < 1e-12):
            raise ConstructionError("degenerate pairing between g' and omega")
        q = u @ vh
        j = np.swapaxes(np.linalg.inv(L), -2, -1) @ q @ np.swapaxes(L, -2, -1)
        g = np.broadcast_to(om0, gp.shape) @ j
        return g, j

    def metric(pts):
        return structures(pts)[0]

    def jmat(pts):
        return structures(pts)[1]

    model = AmbientModel(
        n, 'almost-kahler-pair', ChartDomain('box', bounds=bounds),
        metric_fn=metric, jmat_fn=jmat,
        omega_fn=_const_matrix_fn(om0),
        scheme='fd', h_amb=h_amb, is_kahler=False, name='almost-kahler-pair')

    pts = sample_pts if sample_pts is not None else _default_samples(model)
    structures(pts)   # raises on degeneracy
    return model
