import logging
import os

import numpy as np
import pandas as pd

from config import DEFAULT_PHOTON_CUTOFF, ORACLE_SEED
from handlers.common import EXIT_OK, EXIT_VERIFICATION_FAILED, RunContext, write_result
from services.cumulant_eom import build_layout
from services.exceptions import ConfigError
from services.model import CumulantOrder, coupling_for_cooperativity, mhz_to_angular
from services.quantum_oracle import HilbertConfig, closure_accuracy, random_density, verify_eom
from utils.formatters import format_inventory, write_csv

logger = logging.getLogger(__name__)

RESIDUAL_TOLERANCE = 1e-8


def _clusters(spins: int, sizes):
    if sizes is None:
        return [[j] for j in range(spins)]
    if sum(sizes) != spins:
        raise ConfigError(f"cluster_sizes {sizes} не дают {spins} спинов")
    clusters, start = [], 0
    for size in sizes:
        clusters.append(list(range(start, start + size)))
        start += size
    return clusters


def hilbert_config(ctx: RunContext, spins: int, clusters) -> HilbertConfig:
    """Спины одного кластера получают общие Δ и g, кластеры различаются"""
    section = ctx.ensemble_section
    if 'g_mhz' in section:
        g = mhz_to_angular(section['g_mhz'])
    else:
        g = coupling_for_cooperativity(section.get('cooperativity', 14.0), spins, ctx.params)
    deltas, couplings = [0.0] * spins, [0.0] * spins
    for index, cluster in enumerate(clusters):
        for j in cluster:
            deltas[j] = (index - 0.5 * (len(clusters) - 1)) * 0.7 * ctx.params.gamma_h
            couplings[j] = g * (1.0 + 0.15 * index)
    params = ctx.params.with_eta(mhz_to_angular(ctx.sweep.get('eta_mhz', 1.0)))
    return HilbertConfig(n_spins=spins, params=params, deltas=tuple(deltas), couplings=tuple(couplings),
                         photon_cutoff=ctx.sweep.get('photon_cutoff', DEFAULT_PHOTON_CUTOFF))


def oracle_verify(ctx: RunContext) -> int:
    """Невязки уравнений моментов на случайных матрицах плотности"""
    spins = ctx.extra.get('spins') or ctx.sweep.get('spins', 2)
    clusters = _clusters(spins, ctx.sweep.get('cluster_sizes'))
    config = hilbert_config(ctx, spins, clusters)
    rng = np.random.default_rng(ORACLE_SEED)
    orders = ctx.sweep.get('orders', [order.value for order in CumulantOrder])

    frames = []
    for state in range(ctx.sweep.get('oracle_states', 10)):
        rho = random_density(config, rng, clusters)
        for order in orders:
            report = verify_eom(config, rho, order, clusters)
            frame = report.frame.copy()
            frame.insert(0, 'order', order)
            frame.insert(0, 'state', state)
            frames.append(frame)
    residuals = pd.concat(frames, ignore_index=True)
    worst = float(residuals['residual'].max())
    write_result(ctx, f"oracle_residuals_n{spins}", residuals, extra={'max_residual': worst})
    print(f"max residual: {worst:.3e}")

    if ctx.extra.get('steady'):
        errors = closure_accuracy(config.params, config.couplings[0], n_spins=spins,
                                  photon_cutoff=config.photon_cutoff, integrator=ctx.integrator)
        write_result(ctx, f"closure_accuracy_n{spins}", pd.DataFrame.from_records([errors]))

    if worst >= RESIDUAL_TOLERANCE:
        logger.error(f"Невязка {worst:.3e} превышает {RESIDUAL_TOLERANCE:g}")
        return EXIT_VERIFICATION_FAILED
    return EXIT_OK


def inventory(order: str, clusters: int, out: str = None) -> int:
    """Число вещественных уравнений и разбивка по семействам"""
    layout = build_layout(order, clusters)
    print(format_inventory(layout.order.value, layout.l, layout.breakdown(), layout.total_real_count))
    if out:
        write_csv(layout.describe(), os.path.join(out, f"inventory_{layout.order.value}_l{layout.l}.csv"))
    return EXIT_OK
