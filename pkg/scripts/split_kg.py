#!/usr/bin/env python3
"""
Разбиение графа знаний на федеративных клиентов.

Пишет client_<c>/{train,valid,test}.txt, manifest.tsv и stats.txt
со статистикой по клиентам.
"""

import argparse
import sys
from pathlib import Path
from typing import List, Optional

project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from scripts.run_config import setup_logging
from utils.errors import ConfigurationError, KGParseError, UnknownLabelError
from utils.kg_data import load_triples
from utils.metadata_utils import DatasetValidator, mean_pairwise_overlap, save_stats_report
from utils.split_dataset import DEFAULT_RATIOS, federate_split, write_federated_dataset


def build_parser(parser: Optional[argparse.ArgumentParser] = None) -> argparse.ArgumentParser:
    parser = parser or argparse.ArgumentParser(description="Разбиение графа знаний на клиентов")
    parser.add_argument('--input', '-i', required=True, help='TSV файл триплетов head<TAB>relation<TAB>tail')
    parser.add_argument('--clients', '-n', type=int, default=3, help='Количество клиентов C')
    parser.add_argument('--seed', '-s', type=int, default=0)
    parser.add_argument('--ratios', type=float, nargs=3, default=list(DEFAULT_RATIOS),
                        metavar=('TRAIN', 'VALID', 'TEST'))
    parser.add_argument('--output-dir', '-o', required=True)
    parser.add_argument('--verbose', '-v', action='store_true')
    return parser


def run(args: argparse.Namespace) -> int:
    setup_logging(args.verbose)
    try:
        store, vocab = load_triples(args.input)
        if args.verbose:
            print(f"📂 Загружено {len(store)} триплетов, {vocab.num_entities} сущностей, "
                  f"{vocab.num_relations} отношений")

        dataset = federate_split(store, vocab, args.clients, args.ratios, args.seed)
        if not DatasetValidator.validate(dataset, len(store)):
            print("❌ Ошибка: разбиение не прошло проверку")
            return 1

        manifest = write_federated_dataset(dataset, args.output_dir)
        report = save_stats_report(dataset, str(Path(args.output_dir) / "stats.txt"))
    except (ConfigurationError, KGParseError, UnknownLabelError, OSError) as e:
        print(f"❌ Ошибка: {e}")
        return 1

    print(report, end="")
    if args.verbose:
        print(f"🔗 Доля общих сущностей между клиентами: {mean_pairwise_overlap(dataset):.3f}")
        print(f"💾 Манифест: {manifest}")
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    return run(build_parser().parse_args(argv))


if __name__ == "__main__":
    sys.exit(main())
