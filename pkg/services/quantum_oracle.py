"""Точное решение уравнения Линдблада для нескольких спинов.

Порядок тензорного произведения: спины по возрастанию номера, резонатор
последним. Базис спина: |e⟩ имеет индекс 0, σz = diag(1, -1).
Строки моментов: произведение токенов 'a', 'ad', 'sm<j>', 'sp<j>', 'sz<j>'
в порядке записи, например 'sz0 sm1 ad a'.
"""
import logging
import re
from dataclasses import dataclass, field
from functools import lru_cache, reduce
from itertools import permutations
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.integrate import solve_ivp
from scipy.linalg import null_space

from services.closures import FOURTH_ORDER_TERMS, SPIN_TRIPLE_TERMS, MomentSource
from services.cumulant_eom import (ORDERED, SCALAR, VECTOR, MomentEquations, StateLayout, families_for,
                                   initial_state, observables)
from services.exceptions import (ContractViolation, DimensionMismatchError, InvalidParameterError,
                                 TruncationError)
from services.model import ClusterEnsemble, CumulantOrder, PhysicalParams, homogeneous_ensemble

logger = logging.getLogger(__name__)

MAX_SPINS = 4
MAX_DIMENSION = 4096
TRUNCATION_TOL = 1e-8

_TOKEN = re.compile(r'^(a|ad|id|sm\d+|sp\d+|sz\d+)$')


@dataclass(frozen=True)
class HilbertConfig:
    n_spins: int
    params: PhysicalParams
    deltas: Tuple[float, ...]
    couplings: Tuple[float, ...]
    photon_cutoff: int = 16

    def __post_init__(self):
        object.__setattr__(self, 'deltas', tuple(float(d) for d in self.deltas))
        object.__setattr__(self, 'couplings', tuple(float(g) for g in self.couplings))
        if not 1 <= self.n_spins <= MAX_SPINS:
            raise InvalidParameterError(f"Число спинов должно быть от 1 до {MAX_SPINS}: {self.n_spins}")
        if len(self.deltas) != self.n_spins or len(self.couplings) != self.n_spins:
            raise InvalidParameterError("Длины списков отстроек и констант связи должны равняться числу спинов")
        if self.photon_cutoff < 1:
            raise InvalidParameterError(f"Обрезка фоковского пространства должна быть положительной: {self.photon_cutoff}")
        if self.dim > MAX_DIMENSION:
            raise InvalidParameterError(f"Размерность {self.dim} превышает {MAX_DIMENSION}")

    @property
    def fock_dim(self) -> int:
        return self.photon_cutoff + 1

    @property
    def dim(self) -> int:
        return 2 ** self.n_spins * self.fock_dim


class _Operators:
    """Вложенные в полное пространство операторы, гамильтониан и каналы распада"""

    def __init__(self, config: HilbertConfig):
        n, fock = config.n_spins, config.fock_dim
        p = config.params
        lowering = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)
        pauli_z = np.diag([1.0, -1.0]).astype(complex)
        annihilation = np.diag(np.sqrt(np.arange(1, fock)), k=1).astype(complex)

        def embed(single, site):
            factors = [np.eye(2, dtype=complex)] * n + [np.eye(fock, dtype=complex)]
            factors[site] = single
            return reduce(np.kron, factors)

        self.identity = np.eye(config.dim, dtype=complex)
        self.a = embed(annihilation, n)
        self.ad = self.a.conj().T
        self.sm = [embed(lowering, j) for j in range(n)]
        self.sp = [op.conj().T for op in self.sm]
        self.sz = [embed(pauli_z, j) for j in range(n)]

        hamiltonian = p.delta_c * self.ad @ self.a + 1j * p.eta * (self.ad - self.a)
        for j in range(n):
            hamiltonian = hamiltonian + 0.5 * config.deltas[j] * self.sz[j]
            hamiltonian = hamiltonian + config.couplings[j] * (self.sm[j] @ self.ad + self.sp[j] @ self.a)
        self.hamiltonian = hamiltonian

        # каждый канал в форме r(2JρJ† - J†Jρ - ρJ†J)
        self.channels = [(p.kappa, self.a)]
        self.channels += [(p.gamma_h, op) for op in self.sm]
        if p.gamma_p > 0:
            self.channels += [(0.5 * p.gamma_p, op) for op in self.sz]
        self.channels = [(rate, op, op.conj().T, op.conj().T @ op) for rate, op in self.channels]

    def token(self, name: str) -> np.ndarray:
        if name == 'a':
            return self.a
        if name == 'ad':
            return self.ad
        if name == 'id':
            return self.identity
        site = int(name[2:])
        table = {'sm': self.sm, 'sp': self.sp, 'sz': self.sz}[name[:2]]
        if site >= len(table):
            raise ContractViolation(f"Спин {site} отсутствует в системе из {len(table)} спинов")
        return table[site]


@lru_cache(maxsize=8)
def _operators(config: HilbertConfig) -> _Operators:
    return _Operators(config)


def _check_shape(config: HilbertConfig, rho: np.ndarray) -> None:
    if np.shape(rho) != (config.dim, config.dim):
        raise DimensionMismatchError(f"Ожидалась матрица {config.dim}x{config.dim}, получено {np.shape(rho)}")


def liouvillian_apply(config: HilbertConfig, rho: np.ndarray) -> np.ndarray:
    """dρ/dt = -i[H, ρ] + Σ r(2JρJ† - J†Jρ - ρJ†J)"""
    _check_shape(config, rho)
    ops = _operators(config)
    h = ops.hamiltonian
    drho = -1j * (h @ rho - rho @ h)
    for rate, jump, jump_dag, number in ops.channels:
        drho += rate * (2.0 * jump @ rho @ jump_dag - number @ rho - rho @ number)
    return drho


def liouvillian_matrix(config: HilbertConfig) -> np.ndarray:
    """Супероператор в построчной векторизации: vec(AXB) = (A ⊗ Bᵀ) vec(X)"""
    ops = _operators(config)
    eye = np.eye(config.dim)
    h = ops.hamiltonian
    matrix = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for rate, jump, jump_dag, number in ops.channels:
        matrix += rate * (2.0 * np.kron(jump, jump_dag.T) - np.kron(number, eye) - np.kron(eye, number.T))
    return matrix


def top_fock_population(config: HilbertConfig, rho: np.ndarray) -> float:
    populations = np.real(np.diag(rho)).reshape(2 ** config.n_spins, config.fock_dim)
    return float(populations[:, -1].sum())


def _assert_cutoff(config: HilbertConfig, rho: np.ndarray) -> None:
    population = top_fock_population(config, rho)
    if population > TRUNCATION_TOL:
        raise TruncationError(
            f"Заселённость уровня {config.photon_cutoff} равна {population:.3e}; увеличьте photon_cutoff",
            population=population)


def expectation(config: HilbertConfig, rho: np.ndarray, spec: str) -> complex:
    """Tr(Oρ) для произведения операторов в порядке записи"""
    _check_shape(config, rho)
    tokens = spec.split() if spec.strip() else ['id']
    for token in tokens:
        if not _TOKEN.match(token):
            raise ContractViolation(f"Неизвестный оператор '{token}' в '{spec}'")
    ops = _operators(config)
    product = rho
    for token in reversed(tokens):
        product = ops.token(token) @ product
    return complex(np.trace(product))


def evolve_density(config: HilbertConfig, rho0: np.ndarray, t_grid: Sequence[float],
                   rtol: float = 1e-10, atol: float = 1e-12) -> List[np.ndarray]:
    """Матрицы плотности в моменты t_grid"""
    _check_shape(config, rho0)
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size == 0 or np.any(np.diff(t_grid) < 0):
        raise ContractViolation("Сетка времени должна быть непустой и возрастающей")
    dim = config.dim

    def fun(t, v):
        return liouvillian_apply(config, v.reshape(dim, dim)).ravel()

    solution = solve_ivp(fun, (0.0, float(t_grid[-1])), np.asarray(rho0, dtype=complex).ravel(),
                         method='DOP853', t_eval=t_grid, rtol=rtol, atol=atol)
    if solution.status < 0:
        raise ContractViolation(f"Интегрирование уравнения Линдблада не удалось: {solution.message}")

    states = []
    for column in solution.y.T:
        rho = column.reshape(dim, dim)
        drift = np.max(np.abs(rho - rho.conj().T))
        if drift > 1e-8:
            logger.warning(f"Отклонение от эрмитовости {drift:.2e} до коррекции")
        rho = 0.5 * (rho + rho.conj().T)
        rho = rho / np.trace(rho).real
        _assert_cutoff(config, rho)
        states.append(rho)
    return states


def steady_state_density(config: HilbertConfig) -> np.ndarray:
    """Стационарная матрица плотности как нуль-вектор супероператора"""
    basis = null_space(liouvillian_matrix(config), rcond=1e-12)
    if basis.shape[1] != 1:
        logger.warning(f"Размерность ядра лиувиллиана {basis.shape[1]}, берётся первый вектор")
    rho = basis[:, 0].reshape(config.dim, config.dim)
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho).real
    _assert_cutoff(config, rho)
    return rho


def symmetrize_clusters(config: HilbertConfig, rho: np.ndarray, clusters: Sequence[Sequence[int]]) -> np.ndarray:
    """Среднее по перестановкам спинов внутри каждого кластера"""
    n, fock = config.n_spins, config.fock_dim
    tensor = rho.reshape([2] * n + [fock] + [2] * n + [fock])
    perms = [list(range(n))]
    for cluster in clusters:
        expanded = []
        for base in perms:
            for order in permutations(cluster):
                perm = list(base)
                for src, dst in zip(cluster, order):
                    perm[src] = base[dst]
                expanded.append(perm)
        perms = expanded
    total = np.zeros_like(tensor)
    for perm in perms:
        axes = perm + [n] + [n + 1 + p for p in perm] + [2 * n + 1]
        total = total + np.transpose(tensor, axes)
    return (total / len(perms)).reshape(config.dim, config.dim)


def random_density(config: HilbertConfig, rng: np.random.Generator,
                   clusters: Optional[Sequence[Sequence[int]]] = None,
                   fock_max: Optional[int] = None) -> np.ndarray:
    """Случайная полноранговая матрица плотности на нижних фоковских уровнях.

    Носитель ограничен уровнями 0..fock_max (по умолчанию cutoff - 6), чтобы
    произведения до шести операторов резонатора не задевали обрезку.
    """
    fock_max = max(1, config.photon_cutoff - 6) if fock_max is None else fock_max
    spins = 2 ** config.n_spins
    support = spins * (fock_max + 1)
    raw = rng.normal(size=(support, support)) + 1j * rng.normal(size=(support, support))
    small = raw @ raw.conj().T
    full = np.zeros((spins, config.fock_dim, spins, config.fock_dim), dtype=complex)
    full[:, :fock_max + 1, :, :fock_max + 1] = small.reshape(spins, fock_max + 1, spins, fock_max + 1)
    rho = full.reshape(config.dim, config.dim)
    if clusters is not None:
        rho = symmetrize_clusters(config, rho, clusters)
    return rho / np.trace(rho).real


def _default_clusters(config: HilbertConfig) -> List[List[int]]:
    return [[j] for j in range(config.n_spins)]


def cluster_ensemble(config: HilbertConfig, clusters: Sequence[Sequence[int]]) -> Tuple[ClusterEnsemble, List[List[int]]]:
    """Кластерный ансамбль для разбиения спинов; кластеры упорядочиваются по отстройке"""
    members = sorted(j for cluster in clusters for j in cluster)
    if members != list(range(config.n_spins)):
        raise ContractViolation(f"Кластеры должны разбивать спины 0..{config.n_spins - 1}: {clusters}")
    ordered = sorted((list(cluster) for cluster in clusters), key=lambda c: config.deltas[c[0]])
    for cluster in ordered:
        if len({(config.deltas[j], config.couplings[j]) for j in cluster}) != 1:
            raise ContractViolation(f"Спины кластера {cluster} имеют разные отстройки или константы связи")
    ensemble = ClusterEnsemble(delta=[config.deltas[c[0]] for c in ordered],
                               g=[config.couplings[c[0]] for c in ordered],
                               weight=[len(c) for c in ordered])
    return ensemble, ordered


class ExactMoments(MomentSource):
    """Моменты, вычисленные по матрице плотности (замыкание не применяется)"""

    def __init__(self, config: HilbertConfig, rho: np.ndarray, clusters: Sequence[Sequence[int]]):
        _check_shape(config, rho)
        self.config = config
        self.rho = rho
        self.clusters = [list(c) for c in clusters]
        self._moments = None

    def single_rep(self, mu: int) -> int:
        return self.clusters[mu][0]

    def pair_rep(self, mu: int, nu: int) -> Optional[Tuple[int, int]]:
        """Два разных спина: первый из кластера μ, второй из кластера ν"""
        k = self.clusters[mu][0]
        j = next((s for s in self.clusters[nu] if s != k), None)
        return None if j is None else (k, j)

    def value(self, template: str, **sites) -> complex:
        return expectation(self.config, self.rho, template.format(**sites))

    def family_array(self, template: str, arity: int):
        l = len(self.clusters)
        if arity == 0:
            return self.value(template)
        if arity == 1:
            return np.array([self.value(template, k=self.single_rep(mu)) for mu in range(l)])
        out = np.zeros((l, l), dtype=complex)
        for mu in range(l):
            for nu in range(l):
                rep = self.pair_rep(mu, nu)
                if rep is not None:
                    out[mu, nu] = self.value(template, k=rep[0], j=rep[1])
        return out

    def moments(self) -> Dict[str, np.ndarray]:
        if self._moments is None:
            self._moments = {family.tag: self.family_array(family.operators, family.arity)
                             for family in families_for(CumulantOrder.CE3)}
        return self._moments

    def complete(self, moments, order):
        return self.moments()

    def fourth_order(self, moments):
        return {key: self.family_array(template, arity) for key, (template, arity) in FOURTH_ORDER_TERMS.items()}

    def spin_triple_sums(self, moments):
        l = len(self.clusters)
        couplings = self.config.couplings
        sums = {}
        for key, template in SPIN_TRIPLE_TERMS.items():
            out = np.zeros((l, l), dtype=complex)
            for mu in range(l):
                for nu in range(l):
                    rep = self.pair_rep(mu, nu)
                    if rep is None:
                        continue
                    k, j = rep
                    out[mu, nu] = sum(couplings[s] * self.value(template, k=k, j=j, m=s)
                                      for s in range(self.config.n_spins) if s not in rep)
            sums[key] = out
        return sums


@dataclass
class ResidualReport:
    frame: pd.DataFrame
    skipped: List[str] = field(default_factory=list)

    @property
    def max_residual(self) -> float:
        return float(self.frame['residual'].max()) if not self.frame.empty else 0.0


def _entries(storage: str, l: int):
    if storage == SCALAR:
        return [(-1, -1)]
    if storage == VECTOR:
        return [(mu, -1) for mu in range(l)]
    if storage == ORDERED:
        return [(mu, nu) for mu in range(l) for nu in range(l)]
    return [(mu, nu) for mu in range(l) for nu in range(mu, l)]


def verify_eom(config: HilbertConfig, rho: np.ndarray, order,
               clusters: Optional[Sequence[Sequence[int]]] = None) -> ResidualReport:
    """Сравнение правой части уравнений с точной производной моментов.

    Все моменты, включая старшие, берутся из ρ. Относительная невязка
    |rhs - exact| / max(|exact|, 1).
    """
    order = CumulantOrder.parse(order)
    clusters = _default_clusters(config) if clusters is None else clusters
    ensemble, clusters = cluster_ensemble(config, clusters)
    layout = StateLayout(order, ensemble.size)
    equations = MomentEquations(layout, config.params, ensemble)

    exact_state = ExactMoments(config, rho, clusters)
    exact_rate = ExactMoments(config, liouvillian_apply(config, rho), clusters)
    derived = equations.derivatives(exact_state.moments(), source=exact_state)
    reference = exact_rate.moments()

    records, skipped = [], []
    for family in layout.families:
        for mu, nu in _entries(family.storage, ensemble.size):
            if family.arity == 2 and exact_state.pair_rep(mu, nu) is None:
                skipped.append(f"{family.tag}[{mu},{nu}]: в кластере нет второго спина")
                continue
            if family.arity == 0:
                lhs, rhs_value = reference[family.tag], derived[family.tag]
            elif family.arity == 1:
                lhs, rhs_value = reference[family.tag][mu], derived[family.tag][mu]
            else:
                lhs, rhs_value = reference[family.tag][mu, nu], derived[family.tag][mu, nu]
            residual = abs(rhs_value - lhs) / max(abs(lhs), 1.0)
            records.append({'family': family.tag, 'mu': mu, 'nu': nu, 'exact_abs': abs(lhs),
                            'residual': residual})
    frame = pd.DataFrame.from_records(records, columns=['family', 'mu', 'nu', 'exact_abs', 'residual'])
    if skipped:
        logger.info(f"Пропущено {len(skipped)} парных переменных без второго спина")
    return ResidualReport(frame=frame, skipped=skipped)


def closure_accuracy(params: PhysicalParams, g: float, n_spins: int = 2, photon_cutoff: int = 8,
                     integrator=None) -> Dict[str, float]:
    """Стационарные |⟨a⟩|² CE1/CE2/CE3 против точного решения для однородных спинов"""
    from services.integrate import IntegratorConfig, find_stationary

    config = HilbertConfig(n_spins=n_spins, params=params, deltas=(0.0,) * n_spins,
                           couplings=(g,) * n_spins, photon_cutoff=photon_cutoff)
    exact = abs(expectation(config, steady_state_density(config), 'a')) ** 2
    result = {'exact': exact}
    integrator = integrator if integrator is not None else IntegratorConfig()
    ensemble = homogeneous_ensemble(n_spins, g)
    for order in CumulantOrder:
        layout = StateLayout(order, 1)
        state, outcome = find_stationary(MomentEquations(layout, params, ensemble),
                                         initial_state(layout, -1.0), integrator)
        x = observables(layout, state)["abs_a_sq"]
        result[order.value] = x
        result[f'err_{order.value}'] = abs(x - exact) / exact if exact > 0 else abs(x)
        logger.info(f"{order.value}: |a|^2={x:.6g} ({outcome.kind.value}), exact={exact:.6g}")
    return result
