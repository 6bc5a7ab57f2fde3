import logging

import numpy as np
import pandas as pd

from handlers.common import EXIT_OK, RunContext, build_ensemble, write_result
from services.analysis_boundary import reference_drives
from services.model import angular_to_mhz, cooperativity
from services.semiclassical import semiclassical_curve

logger = logging.getLogger(__name__)

DEFAULT_COOPERATIVITIES = [4, 6, 8, 10, 12, 14]


def _curve_frame(ensemble, params, eta_max_ratio: float, points: int):
    drives = reference_drives(ensemble, params)
    grid = np.linspace(0.0, eta_max_ratio * drives.eta_plus, points)
    rows = [{'eta': p.eta, 'eta_mhz': angular_to_mhz(p.eta), 'eta_over_etacrit': p.eta / drives.eta_plus,
             'abs_a_sq': p.x, 'branch': p.branch, 'stable': int(p.stable)}
            for p in semiclassical_curve(ensemble, params, grid)]
    frame = pd.DataFrame.from_records(rows, columns=['eta', 'eta_mhz', 'eta_over_etacrit', 'abs_a_sq',
                                                     'branch', 'stable'])
    return frame, drives


def steady(ctx: RunContext) -> int:
    """Полуклассические S-кривые: по кооперативностям или, для гауссова ансамбля, по ширинам Γ"""
    section = ctx.ensemble_section
    eta_max_ratio = ctx.sweep.get('eta_max_ratio', 1.5)
    points = ctx.sweep.get('eta_points', 301)
    summary = []

    if section.get('kind') == 'gaussian':
        curves = [('gamma', gamma, build_ensemble(section, ctx.params, gamma_mhz=gamma))
                  for gamma in ctx.sweep.get('gammas_mhz', [section.get('gamma_mhz', 0.5)])]
    else:
        curves = [('c', c, build_ensemble(section, ctx.params, cooperativity=c))
                  for c in ctx.sweep.get('cooperativities', DEFAULT_COOPERATIVITIES)]

    for label, value, ensemble in curves:
        frame, drives = _curve_frame(ensemble, ctx.params, eta_max_ratio, points)
        c_eff = cooperativity(ensemble, ctx.params)
        name = f"steady_{label}{value:g}"
        write_result(ctx, name, frame, chart={'x': 'eta_mhz', 'y': 'abs_a_sq', 'group_by': ['branch'],
                                              'title': f"{label}={value:g}, C={c_eff:.3g}"})
        summary.append({label: value, 'c_eff': c_eff, 'eta_minus': drives.eta_minus, 'eta_plus': drives.eta_plus,
                        'x_at_eta_minus': drives.x_at_eta_minus, 'x_at_eta_plus': drives.x_at_eta_plus,
                        'bistable': int(drives.bistable)})
        logger.info(f"{label}={value:g}: C={c_eff:.4g}, bistable={drives.bistable}")

    write_result(ctx, 'critical_drives', pd.DataFrame.from_records(summary))
    return EXIT_OK
