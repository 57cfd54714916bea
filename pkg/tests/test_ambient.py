import numpy as np
import pytest

from trflow import ambient as amb
from conftest import ball_points

RNG = np.random.default_rng(42)


def sample_points(model, count=1000):
    if model.domain.kind == 'ball':
        return ball_points(np.random.default_rng(1), count, radius=0.5)
    if model.domain.kind == 'periodic':
        return np.random.default_rng(1).uniform(0, 2 * np.pi, size=(count, model.dim))
    return np.random.default_rng(1).uniform(-1.0, 1.0, size=(count, model.dim))


def _structure_identities(model, tol):
    pts = sample_points(model)
    J = model.jmat(pts)
    G = model.metric(pts)
    Om = model.omega(pts)
    eye = np.eye(model.dim)
    assert np.abs(J @ J + eye).max() <= tol
    assert np.abs(Om - np.einsum('...ca,...cb->...ab', J, G)).max() <= tol
    assert np.abs(np.einsum('...ca,...cd,...db->...ab', J, G, J) - G).max() <= tol
    assert np.linalg.eigvalsh(G).min() > 0


def test_flat_structures(flat2):
    _structure_identities(flat2, 1e-14)
    pts = sample_points(flat2, 50)
    assert np.abs(flat2.christoffel(pts)).max() == 0.0
    assert np.abs(flat2.riemann(pts)).max() == 0.0
    assert np.abs(flat2.ricci_form(pts)).max() == 0.0
    assert np.abs(flat2.chern_ricci_form(pts)).max() == 0.0


@pytest.mark.parametrize('tag', ['complex-hyperbolic', 'fubini-study-chart'])
def test_potential_models_structures(tag, ch2, fs2):
    model = ch2 if tag == 'complex-hyperbolic' else fs2
    _structure_identities(model, 1e-10)


def test_kahler_invariants(ch2):
    pts = sample_points(ch2, 200)
    assert np.abs(ch2.nabla_j(pts)).max() < 1e-10
    assert np.abs(ch2.chern_christoffel(pts) - ch2.christoffel(pts)).max() < 1e-10
    assert np.abs(ch2.torsion(pts)).max() < 1e-10
    P = ch2.chern_ricci_form(pts)
    rho = ch2.ricci_form(pts)
    assert np.abs(P - 2 * rho).max() < 1e-8
    assert np.abs(rho + np.swapaxes(rho, -1, -2)).max() < 1e-8


def test_einstein_ratio_flat(flat2):
    lam, dev = flat2.einstein_ratio(sample_points(flat2, 200))
    assert lam == 0.0 and dev == 0.0


def test_einstein_ratio_complex_hyperbolic(ch2):
    pts = ball_points(np.random.default_rng(3), 10000, radius=0.5)
    lam, dev = ch2.einstein_ratio(pts)
    assert lam < 0
    assert dev <= 1e-8


def test_einstein_ratio_fubini_study(fs2):
    pts = np.random.default_rng(3).uniform(-0.7, 0.7, size=(10000, 4))
    lam, dev = fs2.einstein_ratio(pts)
    assert lam > 0
    assert dev <= 1e-8


def test_einstein_ratio_bump_not_ke(bump_kahler):
    pts = np.random.default_rng(3).uniform(0.2, 1.6, size=(2000, 4))
    lam, dev = bump_kahler.einstein_ratio(pts)
    assert dev > 1e-4     # the bump model is not Einstein


def test_einstein_ratio_needs_samples(flat2):
    with pytest.raises(ValueError):
        flat2.einstein_ratio(np.zeros((10, 4)))


def test_curvature_symmetries_and_bianchi(ch2):
    pts = sample_points(ch2, 100)
    r = ch2.riemann(pts)
    scale = np.abs(r).max()
    # antisymmetry in the first slot pair
    assert np.abs(r + np.einsum('...bacd->...abcd', r)).max() < 1e-8 * scale
    # antisymmetry in the last pair after lowering
    g = ch2.metric(pts)
    rl = np.einsum('...abcd,...de->...abce', r, g)
    assert np.abs(rl + np.einsum('...abec->...abce', rl)).max() < 1e-7 * scale
    # first Bianchi identity (Levi-Civita only)
    bianchi = (r + np.einsum('...bcad->...abcd', r) + np.einsum('...cabd->...abcd', r))
    assert np.abs(bianchi).max() < 1e-7 * scale


def test_plurisubharmonicity_guard():
    pot = amb.builtin_potential('flat-plus-bump', 2, eps=-4.0,
                                center=(0.0,) * 4, width=1.5)
    with pytest.raises(amb.ConstructionError) as err:
        amb.kahler_model_from_potential(pot)
    assert 'sample point' in str(err.value)


def test_pair_model_flat_recovery():
    model = amb.almost_kahler_model_from_pair(
        lambda pts: np.broadcast_to(np.eye(4), pts.shape[:-1] + (4, 4)).copy(), 2)
    pts = sample_points(model, 50)
    assert np.abs(model.jmat(pts) - amb.standard_complex_structure(2)).max() < 1e-12
    assert np.abs(model.metric(pts) - np.eye(4)).max() < 1e-12
    assert np.abs(model.torsion(pts)).max() < 1e-10


def test_pair_model_structures(bump_pair):
    _structure_identities(bump_pair, 1e-10)
    pts = sample_points(bump_pair, 100) * 0.5
    assert np.abs(bump_pair.nabla_j(pts)).max() > 1e-4      # genuinely non-Kahler
    # constant standard omega: d(omega) = 0 identically
    assert np.abs(bump_pair.omega(pts) - amb.standard_symplectic_form(2)).max() == 0.0


def test_pair_model_torsion_identities(bump_pair):
    pts = sample_points(bump_pair, 100) * 0.5
    T = bump_pair.torsion(pts)
    J = bump_pair.jmat(pts)
    # T(X, X) = 0 exactly
    X = np.random.default_rng(5).normal(size=pts.shape)
    txx = np.einsum('...abc,...b,...c->...a', T, X, X)
    assert np.abs(txx).max() < 1e-12
    # vanishing (1,1) part: T(JX, Y) = -J T(X, Y), equivalently T(JX,Y) = T(X,JY)
    lhs = np.einsum('...abc,...bd->...adc', T, J)
    rhs = -np.einsum('...ab,...bdc->...adc', J, T)
    assert np.abs(lhs - rhs).max() < 1e-4 * max(np.abs(T).max(), 1.0)
    rhs2 = np.einsum('...abc,...cd->...abd', T, J)
    assert np.abs(lhs - rhs2).max() < 1e-4 * max(np.abs(T).max(), 1.0)


def test_pair_model_chern_parallel_j(bump_pair):
    pts = sample_points(bump_pair, 50) * 0.5
    ch = bump_pair.chern_christoffel(pts)
    J = bump_pair.jmat(pts)
    dj = bump_pair.djmat(pts)
    njt = dj + (np.einsum('...acd,...db->...cab', ch, J)
                - np.einsum('...dcb,...ad->...cab', ch, J))
    assert np.abs(njt).max() < 1e-6   # C * h_amb^2 with h_amb = 1e-3


def test_chern_torsion_forward_difference_oracle(bump_pair):
    # second, independent evaluation of (nabla J) with one-sided differences
    rng = np.random.default_rng(6)
    pts = rng.normal(size=(20, 4)) * 0.3
    X = np.zeros(4)
    X[0] = 1.0                       # d/dx_1
    Y = np.zeros(4)
    Y[3] = 1.0                       # d/dy_2
    got = bump_pair.torsion_vector_value(
        pts, np.broadcast_to(X, pts.shape), np.broadcast_to(Y, pts.shape))

    h = 1e-4
    gam = bump_pair.christoffel(pts)

    def nabla_j_dir(direction):
        e = np.zeros(4)
        e[direction] = h
        dj = (-3 * bump_pair.jmat(pts) + 4 * bump_pair.jmat(pts + e)
              - bump_pair.jmat(pts + 2 * e)) / (2 * h)
        J = bump_pair.jmat(pts)
        comm = (np.einsum('...ad,...db->...ab', gam[..., :, direction, :], J)
                - np.einsum('...db,...ad->...ab', gam[..., :, direction, :], J))
        return dj + comm

    njx = nabla_j_dir(0)
    njy = nabla_j_dir(3)
    J = bump_pair.jmat(pts)
    jy = np.einsum('...ab,b->...a', J, Y)
    jx = np.einsum('...ab,b->...a', J, X)
    oracle = 0.5 * (np.einsum('...ab,...b->...a', njx, jy)
                    - np.einsum('...ab,...b->...a', njy, jx))
    assert np.abs(got).max() > 1e-4         # nonzero torsion near the bump
    assert np.abs(got - oracle).max() < 1e-5


def test_domain_checks(ch2):
    pts = np.array([[0.99, 0.0, 0.0, 0.0], [0.5, 0.5, 0.5, 0.5]])
    inside = ch2.domain.contains(pts)
    assert inside[0] and not inside[1]
    torus = amb.flat_torus_model(2)
    wrapped = torus.domain.wrap(np.array([7.0, -1.0, 0.0, 0.0]))
    assert np.all(wrapped >= 0) and np.all(wrapped < 2 * np.pi)
