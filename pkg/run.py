import argparse
import logging
import sys
import traceback

from config import LOG_LEVEL
from handlers import boundary, dynamics, oracle, steady
from handlers.common import EXIT_CONFIG, apply_overrides, build_context, load_run_config, run_handler
from services.exceptions import ConfigError

# Настройка логирования
logging.basicConfig(
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    level=getattr(logging, LOG_LEVEL, logging.INFO)
)
logger = logging.getLogger(__name__)

HANDLERS = {
    'steady': steady.steady,
    'evolve': dynamics.evolve,
    'scan': dynamics.scan,
    'normalized': dynamics.normalized,
    'boundary': boundary.boundary,
    'oracle-verify': oracle.oracle_verify,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='run.py',
                                     description="Резонатор со спиновым ансамблем: кумулянтные разложения CE1-CE3")
    commands = parser.add_subparsers(dest='command', required=True)

    for name in HANDLERS:
        command = commands.add_parser(name)
        command.add_argument('--config', help="JSON-файл конфигурации прогона")
        command.add_argument('--out', help="Каталог результатов")
        command.add_argument('--workers', type=int, help="Число процессов")
        command.add_argument('--order', choices=['ce1', 'ce2', 'ce3'])
        command.add_argument('--svg', action='store_true', help="SVG-график для каждого CSV")
        if name == 'oracle-verify':
            command.add_argument('--spins', type=int, choices=[1, 2, 3, 4])
            command.add_argument('--steady', action='store_true',
                                 help="Дополнительно сравнить стационары CE1-CE3 с точным решением")

    command = commands.add_parser('inventory')
    command.add_argument('--order', choices=['ce1', 'ce2', 'ce3'], default='ce3')
    command.add_argument('--clusters', type=int, default=1)
    command.add_argument('--out', help="Каталог для CSV с перечнем переменных")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == 'inventory':
        if args.clusters < 1:
            logger.error(f"--clusters должно быть положительным: {args.clusters}")
            return EXIT_CONFIG
        return oracle.inventory(args.order, args.clusters, args.out)

    try:
        data = apply_overrides(load_run_config(args.config), out=args.out, workers=args.workers, order=args.order)
        ctx = build_context(data, svg=args.svg)
    except ConfigError as e:
        logger.error(f"Ошибка конфигурации: {e}")
        return EXIT_CONFIG
    if args.command == 'oracle-verify':
        ctx.extra.update(spins=args.spins, steady=args.steady)

    try:
        return run_handler(HANDLERS[args.command], ctx)
    except Exception as e:
        logger.error(f"Необработанная ошибка: {e}")
        logger.error(traceback.format_exc())
        return 1


if __name__ == '__main__':
    sys.exit(main())
