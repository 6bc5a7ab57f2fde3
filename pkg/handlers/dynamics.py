import logging

import numpy as np

from handlers.common import (RunContext, build_ensemble, exit_code_for, ratio_grid, write_result)
from services.analysis_boundary import ScaledEnsembleFactory, normalized_scan, transmission_scan
from services.cumulant_eom import MomentEquations, build_layout, initial_state
from services.integrate import evolve as evolve_moments

logger = logging.getLogger(__name__)

DEFAULT_TIMES_US = list(np.linspace(0.0, 10.0, 201))


def _factory(ctx: RunContext, cooperativity=None) -> ScaledEnsembleFactory:
    base = build_ensemble(ctx.ensemble_section, ctx.params, cooperativity=cooperativity)
    return ScaledEnsembleFactory(base, ctx.params, ctx.sweep.get('reference', 'plus'))


def _orders(ctx: RunContext):
    return ctx.sweep.get('orders', [ctx.order.value])


def evolve(ctx: RunContext) -> int:
    """Временные ряды |⟨a⟩|², ⟨a†a⟩, ⟨σz⟩ из невозбуждённого состояния"""
    factory = _factory(ctx)
    times = ctx.sweep.get('times_us', DEFAULT_TIMES_US)
    sz0 = ctx.sweep.get('sz0_grid', [-1.0])[0]
    statuses = []
    for n in ctx.sweep.get('n_values', [factory.base.total_spins]):
        for ratio in ctx.sweep.get('eta_ratios', [1.05]):
            ensemble, params = factory(n, ratio)
            for order in _orders(ctx):
                layout = build_layout(order, ensemble.size)
                system = MomentEquations(layout, params, ensemble)
                trajectory = evolve_moments(system, initial_state(layout, sz0), ctx.integrator, times)
                status = trajectory.outcome.kind.value if trajectory.outcome else 'ok'
                statuses.append(status)
                name = f"evolve_{order}_n{n:g}_r{ratio:g}"
                write_result(ctx, name, trajectory.frame, chart={'x': 't', 'y': 'abs_a_sq', 'title': name},
                             extra={'status': status, 'eta': params.eta})
                logger.info(f"{name}: {status}, |a|^2(t_end)={trajectory.frame['abs_a_sq'].iloc[-1]:.6g}"
                            if len(trajectory.frame) else f"{name}: {status}")
    return exit_code_for(statuses)


def scan(ctx: RunContext) -> int:
    """Стационарные |⟨a⟩|² против η/η_crit для списка N"""
    factory = _factory(ctx)
    frame = transmission_scan(factory, ctx.sweep.get('n_values', [factory.base.total_spins]),
                              ratio_grid(ctx.sweep), _orders(ctx), ctx.settings(), ctx.workers)
    write_result(ctx, 'scan', frame, chart={'x': 'eta_over_etacrit', 'y': 'abs_a_sq', 'group_by': ['n', 'order'],
                                           'title': 'stationary |a|^2'})
    return exit_code_for(frame['outcome'])


def normalized(ctx: RunContext) -> int:
    """Нормированная амплитуда против N для набора кооперативностей"""
    factories = [_factory(ctx, cooperativity=c) for c in ctx.sweep.get('cooperativities', [10, 12, 14])]
    n_values = ctx.sweep.get('n_values', [int(n) for n in np.unique(np.round(np.geomspace(10, 1000, 25)))])
    eta_ratio = ctx.sweep.get('eta_ratios', [1.05])[0]
    frame = normalized_scan(factories, n_values, eta_ratio, _orders(ctx), ctx.settings(), ctx.workers)
    write_result(ctx, 'normalized', frame, chart={'x': 'n', 'y': 'normalized', 'group_by': ['c', 'order'],
                                                 'title': f"eta/eta_crit={eta_ratio:g}", 'logx': True})
    return exit_code_for(frame['outcome'])
