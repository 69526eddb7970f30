#!/usr/bin/env python3
"""
Оценка лучших параметров из чекпоинта на части разбиения.
"""

import argparse
import sys
from pathlib import Path
from typing import List, Optional

project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from federation.experiment import evaluate_checkpoint
from scripts.run_config import setup_logging
from utils.checkpoint import load_checkpoint
from utils.errors import CheckpointError, ConfigurationError, ContractViolation, KGParseError
from utils.metrics import DIRECTIONS
from utils.metrics_log import MetricsLog
from utils.split_dataset import load_federated_dataset


def build_parser(parser: Optional[argparse.ArgumentParser] = None) -> argparse.ArgumentParser:
    parser = parser or argparse.ArgumentParser(description="Оценка чекпоинта")
    parser.add_argument('--checkpoint', required=True, help='best.ckpt')
    parser.add_argument('--manifest', default=None, help='Манифест разбиения (по умолчанию из чекпоинта)')
    parser.add_argument('--split', choices=['train', 'valid', 'test'], default='test')
    parser.add_argument('--directions', choices=DIRECTIONS, default=None,
                        help='Направления запросов (по умолчанию из чекпоинта)')
    parser.add_argument('--log', default=None, help='Дописать метрики в журнал TSV')
    parser.add_argument('--verbose', '-v', action='store_true')
    return parser


def print_record(record, split: str, verbose: bool = False) -> None:
    chart = "📊 " if verbose else ""
    print(f"{chart}Метрики на {split}:")
    print(f"{'client':<8} {'MRR':>8} {'H@1':>8} {'H@5':>8} {'H@10':>8} {'queries':>8}")
    rows = [(str(c), m) for c, m in sorted(record.per_client.items())] + [("avg", record.average)]
    for label, m in rows:
        print(f"{label:<8} {m.mrr:>8.4f} {m.hits1:>8.4f} {m.hits5:>8.4f} {m.hits10:>8.4f} {m.count:>8}")


def run(args: argparse.Namespace) -> int:
    setup_logging(args.verbose)
    try:
        config = load_checkpoint(args.checkpoint).get("config")
        if not isinstance(config, dict):
            raise CheckpointError("В чекпоинте нет секции config")
        manifest = args.manifest or (config.get("data") or {}).get("manifest")
        if not manifest:
            raise ConfigurationError("Не задан манифест разбиения (--manifest)")
        directions = args.directions or config.get("directions", "both")

        dataset = load_federated_dataset(manifest)
        record = evaluate_checkpoint(args.checkpoint, dataset, args.split, directions)
    except (ConfigurationError, CheckpointError, ContractViolation, KGParseError, OSError) as e:
        print(f"❌ Ошибка: {e}")
        return 1

    print_record(record, args.split, args.verbose)
    if args.log:
        MetricsLog(args.log, append=True).write_evaluation(record.round, args.split, record.per_client,
                                                           record.average)
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    return run(build_parser().parse_args(argv))


if __name__ == "__main__":
    sys.exit(main())
