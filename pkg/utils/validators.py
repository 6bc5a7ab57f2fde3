from numbers import Real
from typing import Any, Dict, Optional, Tuple

RUN_CONFIG_KEYS = {'params', 'ensemble', 'order', 'integrator', 'sweep', 'output_dir', 'workers', 'use_cache'}
PARAMS_KEYS = {'kappa_mhz', 'gamma_h_mhz', 'gamma_p_mhz', 'delta_c_mhz'}
HOMOGENEOUS_KEYS = {'kind', 'n', 'cooperativity', 'g_mhz'}
GAUSSIAN_KEYS = {'kind', 'n', 'cooperativity', 'g_mhz', 'gamma_mhz', 'clusters', 'span'}
INTEGRATOR_KEYS = {'rtol', 'atol', 'max_time', 'ss_rel_tol', 'window', 'phys_tol', 'method', 'max_step',
                   'cycle_tol', 'polish'}
SWEEP_KEYS = {'cooperativities', 'gammas_mhz', 'eta_ratios', 'n_values', 'eta_points', 'eta_max_ratio',
              'n_range', 'points_per_decade', 'confirm_points', 'delta_eps', 'sz0_grid', 'times_us',
              'reference', 'seed', 'spins', 'cluster_sizes', 'photon_cutoff', 'oracle_states', 'orders',
              'eta_mhz'}
ORDERS = ('ce1', 'ce2', 'ce3')


def _is_number(value: Any) -> bool:
    return isinstance(value, Real) and not isinstance(value, bool)


def _unknown_keys(data: Dict[str, Any], allowed: set, section: str) -> Optional[str]:
    unknown = sorted(set(data) - allowed)
    if unknown:
        return f"Неизвестные ключи в разделе {section}: {', '.join(unknown)}"
    return None


def _number_list(data: Dict[str, Any], key: str, positive: bool = True) -> Optional[str]:
    values = data[key]
    if not isinstance(values, list) or not values:
        return f"{key} должен быть непустым списком"
    for value in values:
        if not _is_number(value):
            return f"{key}: элемент {value!r} не является числом"
        if positive and value <= 0:
            return f"{key}: значения должны быть положительными"
    return None


def validate_params(data: Dict[str, Any]) -> Tuple[bool, Optional[str]]:
    """
    Проверка физических параметров (в МГц)

    Args:
        data: Раздел params

    Returns:
        Tuple[bool, Optional[str]]: (Успех, Сообщение об ошибке)
    """
    if not isinstance(data, dict):
        return False, "Раздел params должен быть объектом"
    error = _unknown_keys(data, PARAMS_KEYS, 'params')
    if error:
        return False, error
    for key, value in data.items():
        if not _is_number(value):
            return False, f"params.{key} должен быть числом"
    for key in ('kappa_mhz', 'gamma_h_mhz'):
        if key in data and data[key] <= 0:
            return False, f"params.{key} должен быть положительным"
    if data.get('gamma_p_mhz', 0) < 0:
        return False, "params.gamma_p_mhz не может быть отрицательным"
    return True, None


def validate_ensemble(data: Dict[str, Any]) -> Tuple[bool, Optional[str]]:
    """
    Проверка описания ансамбля: homogeneous (n, cooperativity или g_mhz)
    или gaussian (n, gamma_mhz, clusters, span, cooperativity или g_mhz)
    """
    if not isinstance(data, dict):
        return False, "Раздел ensemble должен быть объектом"
    kind = data.get('kind', 'homogeneous')
    if kind not in ('homogeneous', 'gaussian'):
        return False, f"Недопустимый тип ансамбля: {kind}. Допустимые типы: homogeneous, gaussian"
    error = _unknown_keys(data, HOMOGENEOUS_KEYS if kind == 'homogeneous' else GAUSSIAN_KEYS, 'ensemble')
    if error:
        return False, error

    if 'n' in data and (not _is_number(data['n']) or data['n'] <= 0):
        return False, "ensemble.n должен быть положительным числом"
    if ('cooperativity' in data) == ('g_mhz' in data):
        return False, "Укажите ровно одно из ensemble.cooperativity и ensemble.g_mhz"
    coupling_key = 'cooperativity' if 'cooperativity' in data else 'g_mhz'
    if not _is_number(data[coupling_key]) or data[coupling_key] < 0:
        return False, f"ensemble.{coupling_key} должен быть неотрицательным числом"

    if kind == 'gaussian':
        if 'gamma_mhz' in data and (not _is_number(data['gamma_mhz']) or data['gamma_mhz'] <= 0):
            return False, "ensemble.gamma_mhz должен быть положительным"
        clusters = data.get('clusters')
        if clusters is not None and (not isinstance(clusters, int) or clusters < 3 or clusters % 2 == 0):
            return False, "ensemble.clusters должно быть нечётным целым не меньше 3"
        if 'span' in data and (not _is_number(data['span']) or data['span'] <= 0):
            return False, "ensemble.span должен быть положительным"
    return True, None


def validate_integrator(data: Dict[str, Any]) -> Tuple[bool, Optional[str]]:
    if not isinstance(data, dict):
        return False, "Раздел integrator должен быть объектом"
    error = _unknown_keys(data, INTEGRATOR_KEYS, 'integrator')
    if error:
        return False, error
    for key, value in data.items():
        if key == 'method':
            if value not in ('DOP853', 'RK45'):
                return False, f"Недопустимый метод: {value}. Допустимые методы: DOP853, RK45"
        elif key == 'polish':
            if not isinstance(value, bool):
                return False, "integrator.polish должен быть true или false"
        elif key in ('max_time', 'max_step') and value is None:
            continue
        elif not _is_number(value) or value < 0 or (value == 0 and key != 'phys_tol'):
            return False, f"integrator.{key} должен быть положительным числом"
    return True, None


def validate_sweep(data: Dict[str, Any]) -> Tuple[bool, Optional[str]]:
    if not isinstance(data, dict):
        return False, "Раздел sweep должен быть объектом"
    error = _unknown_keys(data, SWEEP_KEYS, 'sweep')
    if error:
        return False, error

    for key in ('cooperativities', 'gammas_mhz', 'eta_ratios', 'n_values', 'times_us'):
        if key in data:
            error = _number_list(data, key, positive=(key != 'times_us'))
            if error:
                return False, error
    if 'times_us' in data:
        times = data['times_us']
        if any(t < 0 for t in times) or any(b < a for a, b in zip(times, times[1:])):
            return False, "times_us должен быть неотрицательным и неубывающим"
    if 'sz0_grid' in data:
        error = _number_list(data, 'sz0_grid', positive=False)
        if error:
            return False, error
        if any(v < -1 or v > -0.5 for v in data['sz0_grid']):
            return False, "sz0_grid: значения должны лежать в [-1, -0.5]"
    if 'n_range' in data:
        n_range = data['n_range']
        if not isinstance(n_range, list) or len(n_range) != 2 or not all(_is_number(v) for v in n_range) \
                or not 1 <= n_range[0] < n_range[1]:
            return False, "n_range должен быть парой [n_min, n_max] с 1 ≤ n_min < n_max"
    for key in ('eta_points', 'points_per_decade', 'oracle_states', 'spins', 'photon_cutoff'):
        if key in data and (not isinstance(data[key], int) or isinstance(data[key], bool) or data[key] < 1):
            return False, f"{key} должен быть положительным целым"
    if 'confirm_points' in data and (not isinstance(data['confirm_points'], int) or data['confirm_points'] < 2):
        return False, "confirm_points должен быть целым не меньше 2"
    for key in ('delta_eps', 'eta_max_ratio'):
        if key in data and (not _is_number(data[key]) or data[key] <= 0):
            return False, f"{key} должен быть положительным"
    if 'eta_mhz' in data and (not _is_number(data['eta_mhz']) or data['eta_mhz'] < 0):
        return False, "eta_mhz должен быть неотрицательным"
    if 'reference' in data and data['reference'] not in ('plus', 'minus'):
        return False, "reference должен быть plus или minus"
    if 'seed' in data and data['seed'] not in ('unexcited', 'upper'):
        return False, "seed должен быть unexcited или upper"
    if 'orders' in data:
        orders = data['orders']
        if not isinstance(orders, list) or not orders or any(o not in ORDERS for o in orders):
            return False, f"orders должен быть непустым списком из {', '.join(ORDERS)}"
    if 'cluster_sizes' in data:
        sizes = data['cluster_sizes']
        if not isinstance(sizes, list) or not sizes or any(not isinstance(s, int) or s < 1 for s in sizes):
            return False, "cluster_sizes должен быть непустым списком положительных целых"
    return True, None


def validate_run_config(data: Dict[str, Any]) -> Tuple[bool, Optional[str]]:
    """
    Проверка файла конфигурации прогона целиком

    Args:
        data: Словарь, загруженный из JSON

    Returns:
        Tuple[bool, Optional[str]]: (Успех, Сообщение об ошибке)
    """
    if not isinstance(data, dict):
        return False, "Конфигурация должна быть JSON-объектом"
    error = _unknown_keys(data, RUN_CONFIG_KEYS, 'верхнего уровня')
    if error:
        return False, error

    sections = (('params', validate_params), ('ensemble', validate_ensemble),
                ('integrator', validate_integrator), ('sweep', validate_sweep))
    for name, validator in sections:
        if name in data:
            valid, error = validator(data[name])
            if not valid:
                return False, f"Ошибка в разделе {name}: {error}"

    if 'order' in data and data['order'] not in ORDERS:
        return False, f"Недопустимый порядок: {data['order']}. Допустимые: {', '.join(ORDERS)}"
    if 'workers' in data and (not isinstance(data['workers'], int) or isinstance(data['workers'], bool)
                              or data['workers'] < 1):
        return False, "workers должен быть положительным целым"
    if 'output_dir' in data and not isinstance(data['output_dir'], str):
        return False, "output_dir должен быть строкой"
    if 'use_cache' in data and not isinstance(data['use_cache'], bool):
        return False, "use_cache должен быть true или false"
    return True, None
