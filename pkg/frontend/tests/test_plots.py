import json
import os
import subprocess
import sys

import numpy as np
import pytest

from trflow_plots import load_series, plot_series, plot_order
from trflow_plots.plots import SeriesError, fit_exponential_slope

FIXTURES = os.path.join(os.path.dirname(__file__), 'fixtures')


def fixture(name):
    return os.path.join(FIXTURES, name)


def test_load_series_metadata():
    series = load_series(fixture('ke-series.csv'))
    assert series.meta['lambda'] == pytest.approx(-3.0)
    assert series.meta['scenario'] == 'ch-sheared-fixture'
    assert len(series.t) == 11
    assert series.columns['status'][-1] == 'completed'
    assert np.isnan(series.columns['theta_min']).all()


def test_slope_matches_recorded_lambda():
    series = load_series(fixture('ke-series.csv'))
    slope = fit_exponential_slope(series)
    lam = series.meta['lambda']
    assert abs(slope - lam) <= 0.02 * abs(lam)


def test_plot_ke_series(tmp_path):
    out = tmp_path / 'ke.png'
    info = plot_series(fixture('ke-series.csv'), out)
    assert out.exists() and out.stat().st_size > 1000
    assert abs(info['slope'] - info['reference']) <= 0.02 * abs(info['reference'])


def test_plot_flat_series(tmp_path):
    out = tmp_path / 'flat.png'
    info = plot_series(fixture('flat-series.csv'), out)
    assert out.exists() and out.stat().st_size > 1000
    assert info['reference'] is None


def test_plot_order(tmp_path):
    out = tmp_path / 'order.png'
    info = plot_order([fixture('checks.json')], out)
    assert out.exists() and info['checks'] == 3


def test_missing_columns_rejected(tmp_path):
    bad = tmp_path / 'bad.csv'
    bad.write_text('t,vol_g\n0.0,1.0\n0.1,1.0\n')
    with pytest.raises(SeriesError, match='missing columns'):
        load_series(bad)


def test_empty_series_rejected(tmp_path):
    bad = tmp_path / 'empty.csv'
    bad.write_text('t,vol_g,vol_J,sup_omega,min_rhoJ,theta_min,theta_max,'
                   'integrability_residual,status\n')
    with pytest.raises(SeriesError, match='no data rows'):
        load_series(bad)


def test_non_monotone_t_rejected(tmp_path):
    bad = tmp_path / 'nonmono.csv'
    bad.write_text('t,vol_g,vol_J,sup_omega,min_rhoJ,theta_min,theta_max,'
                   'integrability_residual,status\n'
                   '0.0,1,1,0.1,1,,,0,running\n'
                   '0.2,1,1,0.1,1,,,0,running\n'
                   '0.1,1,1,0.1,1,,,0,completed\n')
    with pytest.raises(SeriesError, match='increasing'):
        load_series(bad)


def test_module_cli(tmp_path):
    out = tmp_path / 'cli.png'
    proc = subprocess.run(
        [sys.executable, '-m', 'trflow_plots', fixture('ke-series.csv'),
         '--out', str(out)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    info = json.loads(proc.stdout)
    assert out.exists()
    assert abs(info['slope'] + 3.0) < 0.06

    proc2 = subprocess.run(
        [sys.executable, '-m', 'trflow_plots', '--order', fixture('checks.json'),
         '--out', str(tmp_path / 'order-cli.png')], capture_output=True, text=True)
    assert proc2.returncode == 0, proc2.stderr


def test_module_cli_errors(tmp_path):
    proc = subprocess.run(
        [sys.executable, '-m', 'trflow_plots', str(tmp_path / 'missing.csv'),
         '--out', str(tmp_path / 'x.png')], capture_output=True, text=True)
    assert proc.returncode == 1
    assert 'error' in proc.stderr
