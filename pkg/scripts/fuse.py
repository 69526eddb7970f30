#!/usr/bin/env python3
"""
Слияние моделей single и fed для каждого клиента.

Пишет в output_dir fused.ckpt и fusion_metrics.tsv; в журнале поле split
имеет вид <часть>-<вариант>, например test-fused.
"""

import argparse
import sys
from pathlib import Path
from typing import List, Optional

project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from federation.experiment import fusion_sections, run_fusion
from scripts.run_config import (collect_overrides, config_parser, load_dataset, load_run_config, setup_logging,
                                write_effective_config)
from utils.checkpoint import load_checkpoint, save_checkpoint
from utils.errors import CheckpointError, ConfigurationError, ContractViolation, KGParseError
from utils.metrics_log import MetricsLog

FUSED_CHECKPOINT = "fused.ckpt"
FUSION_LOG = "fusion_metrics.tsv"


def build_parser(parser: Optional[argparse.ArgumentParser] = None) -> argparse.ArgumentParser:
    parser = parser or config_parser("Слияние моделей single и fed")
    parser.add_argument('--single', required=True, help='best.ckpt постановки single')
    parser.add_argument('--fed', required=True, help='best.ckpt постановки fed')
    return parser


def run(args: argparse.Namespace) -> int:
    setup_logging(args.verbose)
    try:
        cfg = load_run_config(args.config, collect_overrides(args))
        dataset = load_dataset(cfg)
        single_sections = load_checkpoint(args.single)
        fed_sections = load_checkpoint(args.fed)
        write_effective_config(cfg)

        report = run_fusion(cfg.seed, cfg.fusion, dataset, single_sections, fed_sections, cfg.directions)
    except (ConfigurationError, CheckpointError, ContractViolation, KGParseError, OSError) as e:
        print(f"❌ Ошибка: {e}")
        return 1

    output_dir = Path(cfg.output_dir)
    save_checkpoint(output_dir / FUSED_CHECKPOINT, fusion_sections(cfg.snapshot(), dataset, report))
    log = MetricsLog(output_dir / FUSION_LOG)
    for variant, by_split in report.records.items():
        for split, record in by_split.items():
            log.write_evaluation(record.round, f"{split}-{variant}", record.per_client, record.average)

    print(f"{'client':<8} {'single':>10} {'fed':>10} {'fused':>10} {'W':>20} {'b':>8}")
    for c, fusion in sorted(report.models.items()):
        row = [report.records[v]["test"].per_client[c].mrr for v in ("single", "fed", "fused")]
        weight = f"[{fusion.weight[0]:.3f}, {fusion.weight[1]:.3f}]"
        print(f"{c:<8} {row[0]:>10.4f} {row[1]:>10.4f} {row[2]:>10.4f} {weight:>20} {fusion.bias:>8.3f}")
    averages = [report.records[v]["test"].average.mrr for v in ("single", "fed", "fused")]
    print(f"{'avg':<8} {averages[0]:>10.4f} {averages[1]:>10.4f} {averages[2]:>10.4f}")
    if args.verbose:
        print(f"💾 Результаты слияния сохранены в {output_dir}")
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    return run(build_parser().parse_args(argv))


if __name__ == "__main__":
    sys.exit(main())
