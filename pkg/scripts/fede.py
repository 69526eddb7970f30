#!/usr/bin/env python3
"""
Единая точка входа: fede <команда> [флаги].

Команды:
    split  - разбиение графа на клиентов
    train  - обучение single / entire / fed
    fuse   - слияние моделей single и fed
    eval   - оценка чекпоинта
    sweep  - перебор F или E x B

Пример:
$ fede split -i kg.tsv -n 3 -o data/fb3
$ fede train --data.manifest data/fb3/manifest.tsv --setting fed --rounds.fraction 0.6
"""

import argparse
import sys
from pathlib import Path
from typing import List, Optional

project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from scripts import evaluate, fuse, split_kg, sweep, train
from scripts.run_config import add_common_flags

COMMANDS = {
    "split": (split_kg, "Разбиение графа знаний на клиентов", False),
    "train": (train, "Обучение эмбеддингов", True),
    "fuse": (fuse, "Слияние моделей single и fed", True),
    "eval": (evaluate, "Оценка чекпоинта", False),
    "sweep": (sweep, "Перебор параметров федеративного обучения", True),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fede", description="Федеративное обучение эмбеддингов графа знаний")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, (module, help_text, with_config) in COMMANDS.items():
        sub = subparsers.add_parser(name, help=help_text, description=help_text)
        if with_config:
            add_common_flags(sub)
        module.build_parser(sub)
        sub.set_defaults(handler=module.run)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.handler(args)


if __name__ == "__main__":
    sys.exit(main())
