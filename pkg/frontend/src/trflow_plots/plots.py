from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import numpy as np

REQUIRED_COLUMNS = ('t', 'vol_g', 'vol_J', 'sup_omega', 'min_rhoJ',
                    'theta_min', 'theta_max', 'integrability_residual', 'status')


class SeriesError(ValueError):
    pass


@dataclass
class SeriesFile:
    """Parsed flow series: numeric columns plus header metadata."""

    columns: dict
    meta: dict = field(default_factory=dict)

    @property
    def t(self):
        return self.columns['t']

    def finite(self, name):
        vals = self.columns[name]
        keep = np.isfinite(vals)
        return self.t[keep], vals[keep]


def load_series(path):
    meta = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            if line.startswith('#'):
                text = line[1:].strip()
                if '=' in text:
                    key, val = text.split('=', 1)
                    try:
                        meta[key.strip()] = float(val)
                    except ValueError:
                        meta[key.strip()] = val.strip()
                continue
            header = line.strip().split(',')
            break
        else:
            raise SeriesError(f"{path}: empty series file")
        missing = [c for c in REQUIRED_COLUMNS if c not in header]
        if missing:
            raise SeriesError(f"{path}: missing columns {missing}")
        reader = csv.DictReader(fh, fieldnames=header)
        for row in reader:
            rows.append(row)
    if not rows:
        raise SeriesError(f"{path}: series has no data rows")

    def column(name):
        out = []
        for row in rows:
            val = row.get(name, '')
            try:
                out.append(float(val))
            except (TypeError, ValueError):
                out.append(np.nan)
        return np.array(out)

    columns = {c: column(c) for c in REQUIRED_COLUMNS if c != 'status'}
    columns['status'] = [row.get('status', '') for row in rows]
    t = columns['t']
    good = np.isfinite(t)
    if good.sum() < 2:
        raise SeriesError(f"{path}: fewer than two timestamped rows")
    if np.any(np.diff(t[good]) <= 0):
        raise SeriesError(f"{path}: t column must be strictly increasing")
    return SeriesFile(columns=columns, meta=meta)


def fit_exponential_slope(series, floor=1e-14):
    """Least-squares slope of log sup|omega| vs t, ignoring sub-floor rows."""
    t, sup = series.finite('sup_omega')
    keep = sup > floor
    if keep.sum() < 3:
        return None
    return float(np.polyfit(t[keep], np.log(sup[keep]), 1)[0])


def plot_series(csv_path, out_image, flat_band=10.0):
    """Volume and sup|omega| panels; annotates the exponential fit if present.

    The sup|omega| panel shows the fitted slope against the reference
    constant from the series header when one was recorded; for flat runs a
    preserved-band annotation replaces the fit.
    """
    series = load_series(csv_path)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))

    t, vg = series.finite('vol_g')
    _, vj = series.finite('vol_J')
    ax1.plot(t, vg, label='Vol_g', lw=1.5)
    ax1.plot(t, vj, label='Vol_J', lw=1.5, ls='--')
    ax1.set_xlabel('t')
    ax1.set_ylabel('volume')
    ax1.legend(frameon=False)

    ts, sup = series.finite('sup_omega')
    positive = sup > 1e-16
    slope = fit_exponential_slope(series)
    if positive.any():
        ax2.semilogy(ts[positive], sup[positive], lw=1.5, label='sup|omega|')
    ref = series.meta.get('lambda')
    if slope is not None and ref is not None:
        ax2.semilogy(ts, sup[0] * np.exp(ref * (ts - ts[0])), ls=':',
                     label=f'reference exp({ref:.3f} t)')
        ax2.set_title(f'fitted slope {slope:.4f} (lambda {ref:.4f})')
    elif positive.any() and sup.max() <= flat_band * max(sup[0], 1e-16):
        ax2.set_title(f'preserved within {flat_band:.0f}x band')
    ax2.set_xlabel('t')
    ax2.legend(frameon=False)

    fig.suptitle(str(series.meta.get('scenario', csv_path)))
    fig.tight_layout()
    fig.savefig(out_image, dpi=130)
    plt.close(fig)
    return {'slope': slope, 'reference': ref, 'image': str(out_image)}


def plot_order(report_paths, out_image):
    """Residual-vs-report index bars with measured refinement orders."""
    rows = []
    for path in report_paths:
        with open(path) as fh:
            rows.extend(json.load(fh))
    if not rows:
        raise SeriesError('no check rows in the given reports')
    fig, ax = plt.subplots(figsize=(9, 4))
    names = [r['check'] for r in rows]
    values = np.array([max(r['value'], 1e-17) for r in rows])
    tols = np.array([r['tolerance'] for r in rows])
    x = np.arange(len(rows))
    ax.bar(x, values, color=['tab:blue' if r['pass'] else 'tab:red' for r in rows])
    ax.plot(x, tols, 'k_', markersize=14, label='tolerance')
    for i, r in enumerate(rows):
        if 'refinement_order' in r and np.isfinite(r['refinement_order']):
            ax.annotate(f"p={r['refinement_order']:.1f}", (i, values[i]),
                        textcoords='offset points', xytext=(0, 4), fontsize=7,
                        ha='center')
    ax.set_yscale('log')
    ax.set_xticks(x)
    ax.set_xticklabels(names, rotation=60, ha='right', fontsize=7)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(out_image, dpi=130)
    plt.close(fig)
    return {'image': str(out_image), 'checks': len(rows)}
