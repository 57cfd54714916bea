"""Named scenario presets: full configuration dicts for the CLI and tests."""

from __future__ import annotations

import copy


_BASE = {
    'name': '',
    'seed': 0,
    'ambient': {
        'kind': 'flat',
        'n': 2,
        'derivative_scheme': 'analytic',
        'h_amb': 1e-3,
    },
    'immersion': {
        'preset': 'flat-clifford',
        'resolution': [64, 64],
        'params': {},
    },
    'flow': {
        'kind': 'maslov',
        'ambient_mode': 'static',
        'dt': 1e-4,
        'steps': 200,
        'integrator': 'rk4',
        'diagnostics_every': 20,
        'margin_min': 1e-6,
        'snapshot_every': 0,
    },
    'checks': {'refine': False},
    'output': {'directory': None},
}


def _scenario(name, **overrides):
    cfg = copy.deepcopy(_BASE)
    cfg['name'] = name
    for section, values in overrides.items():
        if isinstance(values, dict):
            cfg[section].update(copy.deepcopy(values))
        else:
            cfg[section] = values
    return cfg


_CATALOG = {
    'flat-clifford': lambda: _scenario(
        'flat-clifford',
        immersion={'preset': 'flat-clifford'}),
    'flat-sheared': lambda: _scenario(
        'flat-sheared',
        immersion={'preset': 'flat-sheared', 'params': {'delta': 0.2}}),
    'straight-torus': lambda: _scenario(
        'straight-torus',
        ambient={'kind': 'flat-torus'},
        immersion={'preset': 'straight-torus'}),
    'graph-torus': lambda: _scenario(
        'graph-torus',
        ambient={'kind': 'flat-torus'},
        immersion={'preset': 'graph-torus', 'params': {'amplitude': 0.08}}),
    'str-graph': lambda: _scenario(
        'str-graph',
        ambient={'kind': 'flat-torus'},
        immersion={'preset': 'str-graph', 'params': {'c': 0.5}}),
    'ch-sheared': lambda: _scenario(
        'ch-sheared',
        ambient={'kind': 'kahler-potential',
                 'potential': {'tag': 'complex-hyperbolic'}},
        immersion={'preset': 'ch-torus',
                   'params': {'radius': 0.5, 'delta': 0.2}},
        flow={'ambient_mode': 'ke_normalized', 'steps': 1000,
              'diagnostics_every': 100, 'snapshot_every': 100}),
    'fs-sheared': lambda: _scenario(
        'fs-sheared',
        ambient={'kind': 'kahler-potential',
                 'potential': {'tag': 'fubini-study-chart'}},
        immersion={'preset': 'fs-torus',
                   'params': {'radius': 0.5, 'delta': 0.2}},
        flow={'ambient_mode': 'ke_normalized', 'steps': 1000,
              'diagnostics_every': 100, 'snapshot_every': 100}),
    'bump-kahler': lambda: _scenario(
        'bump-kahler',
        ambient={'kind': 'kahler-potential',
                 'potential': {'tag': 'flat-plus-bump', 'epsilon': 0.01,
                               'center': [1.0, 0.0, 1.0, 0.0], 'width': 1.6}},
        immersion={'preset': 'flat-sheared', 'params': {'delta': 0.2}}),
    'bump-almost-kahler': lambda: _scenario(
        'bump-almost-kahler',
        ambient={'kind': 'almost-kahler-pair',
                 'gprime': {'tag': 'identity-plus-bump', 'epsilon': 0.1,
                            'center': [0.0, 0.0, 0.0, 0.0], 'width': 2.0},
                 'derivative_scheme': 'central-difference'},
        immersion={'preset': 'flat-sheared', 'params': {'delta': 0.2}}),
    'bump-almost-kahler-lagrangian': lambda: _scenario(
        'bump-almost-kahler-lagrangian',
        ambient={'kind': 'almost-kahler-pair',
                 'gprime': {'tag': 'identity-plus-bump', 'epsilon': 0.1,
                            'center': [0.0, 0.0, 0.0, 0.0], 'width': 2.0},
                 'derivative_scheme': 'central-difference'},
        immersion={'preset': 'flat-clifford'}),
    'krf-coupled': lambda: _scenario(
        'krf-coupled',
        ambient={'kind': 'kahler-potential',
                 'potential': {'tag': 'flat-plus-bump', 'epsilon': 0.05,
                               'center': [1.0, 0.0, 1.0, 0.0], 'width': 0.8}},
        immersion={'preset': 'flat-sheared', 'params': {'delta': 0.2},
                   'resolution': [16, 16]},
        flow={'ambient_mode': 'krf_potential', 'dt': 4e-3, 'steps': 50,
              'diagnostics_every': 10,
              'potential_box': {'half_width': 2.0, 'nodes': 12}}),
}


def preset_names():
    return sorted(_CATALOG)


def scenario(name):
    if name not in _CATALOG:
        raise KeyError(f"unknown preset scenario '{name}'; "
                       f"choose from {', '.join(preset_names())}")
    return _CATALOG[name]()


# scenarios with a meaningful identity-residual suite at static time
CHECK_PRESETS = ('flat-clifford', 'flat-sheared', 'straight-torus', 'graph-torus',
                 'ch-sheared', 'fs-sheared', 'bump-kahler', 'bump-almost-kahler',
                 'bump-almost-kahler-lagrangian')
