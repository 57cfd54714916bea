import numpy as np
import pytest

from trflow import ambient as amb
from trflow.immersion import (TorusGrid, Immersion, make_immersion, frames,
                              volumes, induced_riemann)


def test_grid_validation():
    with pytest.raises(ValueError):
        TorusGrid(2, (8, 32))
    with pytest.raises(ValueError):
        TorusGrid(3, (32, 32, 32))
    g = TorusGrid(2, (32, 64))
    assert g.spacings == (2 * np.pi / 32, 2 * np.pi / 64)
    assert g.node_count == 2048


def test_clifford_frames(flat2, clifford32):
    fr = frames(clifford32, flat2)
    assert np.abs(fr.omega).max() < 1e-14
    assert np.abs(fr.rho - 1.0).max() < 1e-12
    assert np.abs(fr.rho - fr.rho_alt).max() < 1e-10


def test_sheared_pullback_oracle(flat2):
    g = TorusGrid(2, (48, 48))
    im = make_immersion('flat-sheared', g, delta=0.2)
    fr = frames(im, flat2)
    phi = g.mesh()
    oracle = 0.2 * np.sin(phi[..., 1] - phi[..., 0])
    assert np.abs(fr.omega[..., 0, 1] - oracle).max() < 1e-5


def test_rho_closed_form_sheared(flat2, sheared32):
    fr = frames(sheared32, flat2)
    w = fr.omega[..., 0, 1]
    detg = np.linalg.det(fr.g)
    assert np.abs(fr.rho - np.sqrt(1.0 - w ** 2 / detg)).max() < 1e-12
    assert np.abs(fr.rho - fr.rho_alt).max() < 1e-10
    vg, vj = fr.volumes()
    assert vj < vg


def test_volumes_clifford(flat2):
    vg, vj = volumes(make_immersion('flat-clifford', TorusGrid(2, (64, 64))), flat2)
    assert abs(vg - 4 * np.pi ** 2) < 1e-3       # 4th-order tangent stencils
    assert abs(vg - vj) < 1e-12
    # totals converge at the stencil order
    errs = []
    for n_nodes in (32, 64):
        vgn, _ = volumes(make_immersion('flat-clifford', TorusGrid(2, (n_nodes,) * 2)),
                         flat2)
        errs.append(abs(vgn - 4 * np.pi ** 2))
    assert np.log2(errs[0] / errs[1]) > 3.5


def test_straight_torus_volume_exact(torus2):
    vg, vj = volumes(make_immersion('straight-torus', TorusGrid(2, (32, 32))), torus2)
    assert abs(vg - 4 * np.pi ** 2) < 1e-12
    assert abs(vj - 4 * np.pi ** 2) < 1e-12


def test_rho_decreases_toward_partially_complex():
    # rotate the second tangent direction of a Lagrangian plane into J of the
    # first: rho falls monotonically to the degenerate boundary
    from trflow.immersion import j_volume_density
    G = np.eye(4)
    Om = amb.standard_symplectic_form(2)
    J = amb.standard_complex_structure(2)
    e1 = np.array([1.0, 0.0, 0.0, 0.0])
    e2 = np.array([0.0, 0.0, 1.0, 0.0])
    je1 = J @ e1
    last = 1.0 + 1e-12
    for theta in np.linspace(0, np.pi / 2 - 0.05, 12):
        vs = np.stack([e1, np.cos(theta) * e2 + np.sin(theta) * je1])
        rho_sq, amb_vol = j_volume_density(vs[None], G[None], Om[None], J[None])
        rho = float(np.sqrt(rho_sq[0]))
        assert rho < last + 1e-12
        assert abs(rho_sq[0] - amb_vol[0]) < 1e-12
        last = rho
    assert last < 0.1


def test_margin_error_names_node(flat2):
    g = TorusGrid(2, (16, 16))
    im = make_immersion('flat-clifford', g)
    # rotate tangents toward a complex direction at one node region
    bad = Immersion(g, im.periodic.copy())
    with pytest.raises(amb.DegenerateImmersionError, match='node'):
        frames(bad, flat2, margin=1.01)


def test_chart_domain_violation(sheared32):
    tight = amb.flat_model(2, bounds=1.0)
    with pytest.raises(amb.ChartDomainError, match='node'):
        frames(sheared32, tight)


def test_str_graph_winding_positions():
    g = TorusGrid(2, (32, 32))
    im = make_immersion('str-graph', g, c=0.5)
    pos = im.positions()
    mesh = g.mesh()
    assert np.abs(pos[..., 1] - 0.5 * mesh[..., 1]).max() < 1e-14
    t = im.tangents()
    assert np.abs(t[..., 1, 1] - 0.5).max() < 1e-14   # dy_1/dphi_2 = c


def test_induced_riemann_flat_cases(flat2, torus2, clifford32):
    fr = frames(clifford32, flat2)
    assert np.abs(induced_riemann(fr)).max() < 1e-10
    frs = frames(make_immersion('straight-torus', TorusGrid(2, (32, 32))), torus2)
    assert np.abs(induced_riemann(frs)).max() == 0.0


def test_snapshot_roundtrip(clifford32):
    snap = clifford32.to_snapshot()
    assert snap['grid']['shape'] == [32, 32]
    assert len(snap['positions']) == 32 * 32
    assert snap['winding'] is None


def test_n1_circle_pipeline():
    # the formulas are dimension generic; exercise the n = 1 path end to end
    from trflow import tensors as tn, calibration as cal, flows
    m1 = amb.flat_model(1)
    g = TorusGrid(1, (64,))
    im = make_immersion('flat-clifford', g)
    fr = frames(im, m1)
    assert fr.t.shape == (64, 1, 2)
    h = tn.mean_curvature(fr)
    assert np.abs(np.linalg.norm(h, axis=-1) - 1.0).max() < 1e-5
    assert tn.maslov_duality_residual(fr) < 1e-12
    assert tn.integrability_residual(fr) == 0.0
    cy = cal.CalabiYau(1)
    field = cal.angle_field_from_frames(fr, cy)
    assert field.windings == (1,)
    cfg = flows.FlowConfig(kind='maslov', dt=1e-4, steps=5, diagnostics_every=5)
    res = flows.run_flow(im, m1, cfg)
    assert res.status == 'completed'
