"""Scenario configuration: strict validation, defaults, object construction."""

from __future__ import annotations

import copy
import json
import math
import os

import numpy as np

from . import presets
from .ambient import (almost_kahler_model_from_pair, bump_metric_field,
                      builtin_kahler_model, flat_model, flat_torus_model)
from .flows import FlowConfig, PotentialGrid
from .immersion import TorusGrid, make_immersion


class ScenarioError(ValueError):
    pass


_SCHEMA = {
    'name': str,
    'seed': int,
    'ambient': {
        'kind': str,
        'n': int,
        'derivative_scheme': str,
        'h_amb': float,
        'chart_bounds': float,
        'potential': {'tag': str, 'epsilon': float, 'center': list, 'width': float},
        'gprime': {'tag': str, 'epsilon': float, 'center': list, 'width': float},
    },
    'immersion': {
        'preset': str,
        'resolution': list,
        'params': {'delta': float, 'radius': float, 'radii': list, 'center': list,
                   'c': float, 'amplitude': float, 'heights': list},
    },
    'flow': {
        'kind': str,
        'ambient_mode': str,
        'dt': float,
        'steps': int,
        'integrator': str,
        'diagnostics_every': int,
        'margin_min': float,
        'snapshot_every': int,
        'potential_box': {'half_width': float, 'nodes': int},
    },
    'checks': {'refine': bool},
    'output': {'directory': (str, type(None))},
}


def _check_keys(data, schema, path):
    for key, value in data.items():
        if key not in schema:
            raise ScenarioError(f"unknown key '{path}{key}' in scenario")
        spec = schema[key]
        if isinstance(spec, dict):
            if not isinstance(value, dict):
                raise ScenarioError(f"'{path}{key}' must be an object")
            _check_keys(value, spec, f"{path}{key}.")
        else:
            types = spec if isinstance(spec, tuple) else (spec,)
            if float in types:
                types = types + (int,)
            if not isinstance(value, types) or isinstance(value, bool) and bool not in types:
                raise ScenarioError(
                    f"'{path}{key}' has type {type(value).__name__}, "
                    f"expected {'/'.join(t.__name__ for t in types)}")
            _check_finite(value, f"{path}{key}")


def _check_finite(value, path):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        if not math.isfinite(value):
            raise ScenarioError(f"non-finite parameter at '{path}'")
    elif isinstance(value, list):
        for i, v in enumerate(value):
            _check_finite(v, f"{path}[{i}]")


def resolve(config):
    """Validate a raw scenario dict and fill in all defaults."""
    if not isinstance(config, dict):
        raise ScenarioError("scenario must be a JSON object")
    _check_keys(config, _SCHEMA, '')
    resolved = presets._scenario(config.get('name', 'scenario'))
    for section in ('ambient', 'immersion', 'flow', 'checks', 'output'):
        resolved[section].update(copy.deepcopy(config.get(section, {})))
    for key in ('seed',):
        if key in config:
            resolved[key] = config[key]
    return resolved


def load(path):
    """Load and resolve a scenario file (JSON)."""
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"invalid JSON in {path}: {exc}") from exc
    return resolve(raw)


def echo_resolved(resolved, out_dir):
    """Write the resolved config next to the outputs for reproducibility."""
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"{resolved['name']}.resolved.json")
    with open(path, 'w') as fh:
        json.dump(resolved, fh, indent=2, sort_keys=True)
        fh.write('\n')
    return path


def build_model(resolved):
    amb_cfg = resolved['ambient']
    kind = amb_cfg['kind']
    n = amb_cfg.get('n', 2)
    scheme = {'analytic': 'analytic', 'central-difference': 'fd'}.get(
        amb_cfg.get('derivative_scheme', 'analytic'))
    if scheme is None:
        raise ScenarioError(
            f"unknown derivative_scheme '{amb_cfg['derivative_scheme']}'")
    h_amb = float(amb_cfg.get('h_amb', 1e-3))
    if kind == 'flat':
        return flat_model(n, bounds=amb_cfg.get('chart_bounds', np.inf))
    if kind == 'flat-torus':
        return flat_torus_model(n)
    if kind == 'kahler-potential':
        pot = amb_cfg.get('potential', {'tag': 'flat'})
        center = pot.get('center')
        return builtin_kahler_model(
            pot.get('tag', 'flat'), n, scheme=scheme, h_amb=h_amb,
            eps=float(pot.get('epsilon', 0.05)),
            center=None if center is None else tuple(center),
            width=float(pot.get('width', 1.0)))
    if kind == 'almost-kahler-pair':
        gp = amb_cfg.get('gprime', {'tag': 'identity-plus-bump'})
        if gp.get('tag', 'identity-plus-bump') == 'identity':
            field = lambda pts: np.broadcast_to(
                np.eye(2 * n), pts.shape[:-1] + (2 * n, 2 * n)).copy()
        else:
            field = bump_metric_field(
                n, eps=float(gp.get('epsilon', 0.1)),
                center=gp.get('center'), width=float(gp.get('width', 2.0)))
        return almost_kahler_model_from_pair(
            field, n, h_amb=h_amb, bounds=amb_cfg.get('chart_bounds', np.inf))
    raise ScenarioError(f"unknown ambient kind '{kind}'")


def build_immersion(resolved, resolution=None):
    imm_cfg = resolved['immersion']
    res = resolution if resolution is not None else imm_cfg['resolution']
    n = resolved['ambient'].get('n', 2)
    grid = TorusGrid(n, tuple(int(r) for r in res))
    params = dict(imm_cfg.get('params', {}))
    if 'radii' in params:
        params['radii'] = tuple(params['radii'])
    return make_immersion(imm_cfg['preset'], grid, **params)


def build_flow_config(resolved):
    f = resolved['flow']
    return FlowConfig(
        kind=f['kind'], ambient_mode=f['ambient_mode'], dt=float(f['dt']),
        steps=int(f['steps']), integrator=f['integrator'],
        diagnostics_every=int(f['diagnostics_every']),
        margin_min=float(f['margin_min']),
        snapshot_every=int(f.get('snapshot_every', 0)))


def build_potential_grid(resolved):
    amb_cfg = resolved['ambient']
    pot = amb_cfg.get('potential', {})
    if pot.get('tag') != 'flat-plus-bump':
        raise ScenarioError("krf_potential mode needs a flat-plus-bump potential")
    box = resolved['flow'].get('potential_box', {'half_width': 2.0, 'nodes': 24})
    n = amb_cfg.get('n', 2)
    return PotentialGrid.from_bump(
        n=n, half_width=float(box.get('half_width', 2.0)),
        nodes=int(box.get('nodes', 24)), eps=float(pot.get('epsilon', 0.05)),
        center=pot.get('center'), width=float(pot.get('width', 1.0)))
