import numpy as np
import pytest

from trflow import variation
from trflow.immersion import TorusGrid, make_immersion


def test_zero_probe(flat2, clifford32):
    coeffs = np.zeros(clifford32.grid.shape + (2,))
    rep = variation.first_variation_check(clifford32, flat2, coeffs)
    assert abs(rep['derivative']) < 1e-8
    assert abs(rep['gradient_integral']) == 0.0


def test_first_variation_product_torus(flat2):
    # the 1e-6 example bound needs the tangent-stencil floor below it: 128^2
    g = TorusGrid(2, (128, 128))
    im = make_immersion('flat-clifford', g)
    coeffs = np.zeros(g.shape + (2,))
    coeffs[..., 0] = 1.0
    rep = variation.first_variation_check(im, flat2, coeffs, tau=1e-4)
    assert rep['relative_residual'] < 1e-6


def test_first_variation_order_in_h(flat2):
    vals = []
    for n_nodes in (32, 64):
        g = TorusGrid(2, (n_nodes, n_nodes))
        im = make_immersion('flat-clifford', g)
        coeffs = np.zeros(g.shape + (2,))
        coeffs[..., 0] = 1.0
        rep = variation.first_variation_check(im, flat2, coeffs, tau=1e-4)
        vals.append(rep['relative_residual'])
    assert np.log2(vals[0] / vals[1]) > 2.0


def random_probe(grid, rng, scale=0.5):
    mesh = grid.mesh()
    coeffs = np.zeros(grid.shape + (grid.n,))
    for i in range(grid.n):
        coeffs[..., i] = rng.normal()
        for ax in range(grid.n):
            coeffs[..., i] += scale * (rng.normal() * np.cos(mesh[..., ax])
                                       + rng.normal() * np.sin(mesh[..., ax]))
    return coeffs


def test_first_variation_random_probes(flat2, bump_pair):
    g = TorusGrid(2, (64, 64))
    rng = np.random.default_rng(31)
    for model, bound in ((flat2, 1e-5), (bump_pair, 1e-4)):
        im = make_immersion('flat-sheared', g, delta=0.2)
        rep = variation.first_variation_check(im, model, random_probe(g, rng),
                                              tau=1e-4)
        assert abs(rep['derivative']) > 1e-2    # probe genuinely non-degenerate
        assert rep['relative_residual'] < bound


def test_second_variation_divergence_formula(torus2):
    g = TorusGrid(2, (64, 64))
    im = make_immersion('straight-torus', g)
    mesh = g.mesh()
    coeffs = np.zeros(g.shape + (2,))
    coeffs[..., 0] = np.sin(mesh[..., 0])
    rep = variation.second_variation_check(im, torus2, coeffs)
    # quadrature of (stencil Div)^2 against the closed-form 2 pi^2
    assert abs(rep['divergence_integral'] - 2 * np.pi ** 2) < 1e-3
    assert rep['relative_residual'] < 1e-4


def test_second_variation_translation_invariance(torus2):
    g = TorusGrid(2, (32, 32))
    im = make_immersion('straight-torus', g)
    coeffs = np.zeros(g.shape + (2,))
    coeffs[..., 0] = 1.0
    coeffs[..., 1] = -0.5
    rep = variation.second_variation_check(im, torus2, coeffs)
    assert abs(rep['second_derivative']) < 1e-8


def test_variation_scaling_laws(torus2):
    g = TorusGrid(2, (32, 32))
    im = make_immersion('straight-torus', g)
    mesh = g.mesh()
    coeffs = np.zeros(g.shape + (2,))
    coeffs[..., 0] = np.sin(mesh[..., 0])
    r1 = variation.second_variation_check(im, torus2, coeffs)
    r2 = variation.second_variation_check(im, torus2, 2.0 * coeffs)
    assert abs(r2['second_derivative'] - 4.0 * r1['second_derivative']) < 1e-3
    assert abs(r2['divergence_integral'] - 4.0 * r1['divergence_integral']) < 1e-10


def test_second_variation_refused_off_critical(flat2, clifford32):
    coeffs = np.zeros(clifford32.grid.shape + (2,))
    coeffs[..., 0] = 1.0
    with pytest.raises(ValueError, match='critical'):
        variation.second_variation_check(clifford32, flat2, coeffs)


def test_gradient_reconstruction(flat2):
    g = TorusGrid(2, (64, 64))
    im = make_immersion('flat-clifford', g)
    out = variation.gradient_reconstruction(im, flat2, nodes=[(5, 9), (32, 48)])
    for row in out:
        direct = row['direct']
        err = np.linalg.norm(row['reconstructed'] - direct)
        assert err < 0.05 * np.linalg.norm(direct)
