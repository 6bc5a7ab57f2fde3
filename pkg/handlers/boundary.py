import logging

from handlers.common import RunContext, build_ensemble, exit_code_for, write_result
from services.analysis_boundary import BoundaryTask, ScaledEnsembleFactory, boundary_frame, boundary_sweep
from utils.formatters import format_boundary_row

logger = logging.getLogger(__name__)

DEFAULT_ETA_RATIOS = [0.9, 0.95, 0.99, 1.01, 1.05, 1.2]


def boundary(ctx: RunContext) -> int:
    """N_sc по сетке (C или Γ) x η/η_crit"""
    section = ctx.ensemble_section
    sweep = ctx.sweep
    reference = sweep.get('reference', 'plus')
    by_gamma = section.get('kind') == 'gaussian'

    if by_gamma:
        bases = [(f"gamma_mhz={gamma:g}", gamma, build_ensemble(section, ctx.params, gamma_mhz=gamma))
                 for gamma in sweep.get('gammas_mhz', [0.1, 0.5, 1.0])]
    else:
        bases = [(f"c={c:g}", None, build_ensemble(section, ctx.params, cooperativity=c))
                 for c in sweep.get('cooperativities', [5, 10, 14, 18])]

    tasks = []
    for label, gamma, base in bases:
        factory = ScaledEnsembleFactory(base, ctx.params, reference)
        for ratio in sweep.get('eta_ratios', DEFAULT_ETA_RATIOS):
            tasks.append(BoundaryTask(factory=factory, eta_ratio=float(ratio), label=label, gamma_mhz=gamma,
                                      delta_eps=sweep.get('delta_eps', 1e-2),
                                      n_range=tuple(sweep.get('n_range', [10, 1e5])),
                                      confirm_points=sweep.get('confirm_points', 3),
                                      points_per_decade=sweep.get('points_per_decade', 8),
                                      settings=ctx.settings()))

    points = boundary_sweep(tasks, ctx.workers)
    for task, point in zip(tasks, points):
        logger.info(format_boundary_row(task.label, point.eta_ratio, point.n_sc, point.status))
    frame = boundary_frame(points, by_gamma=by_gamma)
    write_result(ctx, 'boundary', frame,
                 chart={'x': 'eta_over_etacrit', 'y': 'n_sc', 'group_by': ['gamma_mhz' if by_gamma else 'c'],
                        'title': 'N_sc', 'logy': True})
    return exit_code_for(frame['status'])
