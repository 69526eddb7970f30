#!/usr/bin/env python3
"""
Перебор F или E x B с подсчётом раундов до порога valid Hits@10.

Без data.manifest используется синтетический граф (--synthetic-*).
Результат пишется в <output_dir>/sweep.tsv.
"""

import argparse
import sys
from pathlib import Path
from typing import List, Optional

project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from federation.sweep import run_sweep, write_sweep
from scripts.run_config import (collect_overrides, config_parser, load_dataset, load_run_config, setup_logging,
                                write_effective_config)
from utils.errors import ConfigurationError, ContractViolation, KGParseError
from utils.synthetic_kg import synthetic_federated_dataset

SWEEP_NAME = "sweep.tsv"


def build_parser(parser: Optional[argparse.ArgumentParser] = None) -> argparse.ArgumentParser:
    parser = parser or config_parser("Перебор параметров федеративного обучения")
    parser.add_argument('--kind', choices=['fraction', 'computation'], default='fraction',
                        help='fraction: F; computation: E x B')
    parser.add_argument('--seeds', type=int, nargs='+', default=[0, 1, 2, 3, 4])
    parser.add_argument('--threshold', type=float, default=0.5, help='Порог valid Hits@10')
    parser.add_argument('--synthetic-clients', type=int, default=3)
    parser.add_argument('--synthetic-entities', type=int, default=200)
    parser.add_argument('--synthetic-triples', type=int, default=2000)
    return parser


def run(args: argparse.Namespace) -> int:
    setup_logging(args.verbose)
    try:
        cfg = load_run_config(args.config, collect_overrides(args))
        if cfg.data.manifest:
            dataset = load_dataset(cfg)
        else:
            dataset = synthetic_federated_dataset(args.synthetic_clients, args.synthetic_entities,
                                                  num_triples=args.synthetic_triples, seed=cfg.seed)
        write_effective_config(cfg)
        summary = run_sweep(cfg, dataset, args.kind, args.seeds, args.threshold)
    except (ConfigurationError, ContractViolation, KGParseError, FloatingPointError, OSError) as e:
        print(f"❌ Ошибка: {e}")
        return 1

    path = Path(cfg.output_dir) / SWEEP_NAME
    write_sweep(summary, path)
    print(f"{'F':>6} {'E':>4} {'B':>6} {'rounds':>8}")
    for (fraction, epochs, batch), mean in summary.mean_rounds(cfg.rounds.max_rounds).items():
        print(f"{fraction:>6.2f} {epochs:>4} {batch:>6} {mean:>8.1f}")
    if args.verbose:
        print(f"💾 Результаты перебора: {path}")
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    return run(build_parser().parse_args(argv))


if __name__ == "__main__":
    sys.exit(main())
