#!/usr/bin/env python3
"""
Обучение в постановке single, entire или fed.

Пишет в output_dir: effective_config.env, metrics.tsv, best.ckpt, last.ckpt.
--resume last.ckpt продолжает прерванный запуск с того же места.
"""

import argparse
import sys
from pathlib import Path
from typing import List, Optional

project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from federation.experiment import run_experiment
from scripts.run_config import (collect_overrides, config_parser, dump_config, load_dataset, load_run_config,
                                setup_logging, write_effective_config)
from utils.errors import CheckpointError, ConfigurationError, ContractViolation, KGParseError, UnknownLabelError


def build_parser(parser: Optional[argparse.ArgumentParser] = None) -> argparse.ArgumentParser:
    parser = parser or config_parser("Обучение эмбеддингов графа знаний (single / entire / fed)")
    parser.add_argument('--resume', default=None, help='Продолжить из last.ckpt')
    return parser


def print_summary(result, verbose: bool = False) -> None:
    best = result.result.best
    trophy = "🏆 " if verbose else ""
    print("\n" + "=" * 60)
    print(f"{'client':<8} {'round':>6} {'valid MRR':>10} {'test MRR':>10} {'H@1':>8} {'H@10':>8}")
    for c, metrics in sorted(result.test.per_client.items()):
        print(f"{c:<8} {best.rounds[c]:>6} {best.metrics[c].mrr:>10.4f} {metrics.mrr:>10.4f} "
              f"{metrics.hits1:>8.4f} {metrics.hits10:>8.4f}")
    avg = result.test.average
    print(f"{'avg':<8} {'':>6} {best.average.mrr:>10.4f} {avg.mrr:>10.4f} {avg.hits1:>8.4f} {avg.hits10:>8.4f}")
    print("=" * 60)
    print(f"{trophy}Лучшая средняя valid MRR: {best.average.mrr:.4f}, test MRR: {avg.mrr:.4f}")


def run(args: argparse.Namespace) -> int:
    setup_logging(args.verbose)
    try:
        cfg = load_run_config(args.config, collect_overrides(args))
        dataset = load_dataset(cfg)
        config_path = write_effective_config(cfg)
        if args.verbose:
            print(f"🔧 Эффективная конфигурация ({config_path}):")
            print(dump_config(cfg), end="")
            print(f"🚀 Запуск {cfg.setting} / {cfg.model.value} на {dataset.num_clients} клиентах")

        result = run_experiment(cfg, dataset, cfg.output_dir, resume=args.resume, progress=args.verbose)
    except (ConfigurationError, CheckpointError, ContractViolation, KGParseError, UnknownLabelError,
            FloatingPointError, OSError) as e:
        print(f"❌ Ошибка: {e}")
        return 1

    print_summary(result, args.verbose)
    if args.verbose:
        print(f"💾 Результаты сохранены в {cfg.output_dir}")
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    return run(build_parser().parse_args(argv))


if __name__ == "__main__":
    sys.exit(main())
