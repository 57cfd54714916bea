"""Render trflow diagnostics files into figures.

Consumes only the documented output schemas: the flow series CSV
(columns t, vol_g, vol_J, sup_omega, min_rhoJ, theta_min, theta_max,
integrability_residual, status; '#'-prefixed header comments may carry
scenario metadata such as 'lambda=<value>') and the check-report JSON rows
({check, value, tolerance, pass, refinement_order?}).
"""

from .plots import SeriesFile, load_series, plot_series, plot_order

__all__ = ['SeriesFile', 'load_series', 'plot_series', 'plot_order']
