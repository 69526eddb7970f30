"""
Перебор параметров федеративного обучения: доля клиентов F или
локальные эпохи E и размер батча B. Для каждой точки сетки и каждого
seed считается число раундов до порога средней valid Hits@10.
"""

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from federation.experiment import ExperimentConfig, run_experiment
from utils.errors import ConfigurationError
from utils.metrics import rounds_to_threshold
from utils.split_dataset import FederatedDataset

logger = logging.getLogger(__name__)

FRACTION_GRID = (0.2, 0.6, 1.0)
EPOCH_GRID = (1, 3, 5)
BATCH_GRID = (64, 256, 512)
SWEEP_FIELDS = ["kind", "fraction", "local_epochs", "batch_size", "seed", "rounds_to_threshold",
                "best_valid_mrr", "test_mrr"]


@dataclass
class SweepPoint:
    """Одна точка сетки: переопределения секции rounds"""
    fraction: float
    local_epochs: int
    batch_size: int


@dataclass
class SweepRow:
    point: SweepPoint
    seed: int
    rounds: Optional[int]
    best_valid_mrr: float
    test_mrr: float


@dataclass
class SweepSummary:
    """Среднее число раундов до порога по seed для каждой точки"""
    kind: str
    rows: List[SweepRow] = field(default_factory=list)

    def mean_rounds(self, max_rounds: int) -> Dict[tuple, float]:
        """Недостигнутый порог считается как max_rounds."""
        grouped: Dict[tuple, List[int]] = {}
        for row in self.rows:
            key = (row.point.fraction, row.point.local_epochs, row.point.batch_size)
            grouped.setdefault(key, []).append(max_rounds if row.rounds is None else row.rounds)
        return {key: float(np.mean(values)) for key, values in grouped.items()}


def sweep_grid(kind: str, base: ExperimentConfig) -> List[SweepPoint]:
    """
    Точки сетки.

    Args:
        kind: 'fraction' (F из FRACTION_GRID) или 'computation' (E x B)
        base: Базовая конфигурация, из неё берутся неперебираемые значения

    Returns:
        Список SweepPoint
    """
    rounds = base.rounds
    if kind == "fraction":
        return [SweepPoint(f, rounds.local_epochs, rounds.batch_size) for f in FRACTION_GRID]
    if kind == "computation":
        return [SweepPoint(rounds.fraction, e, b) for e in EPOCH_GRID for b in BATCH_GRID]
    raise ConfigurationError(f"Неизвестный вид перебора: {kind}")


def point_config(base: ExperimentConfig, point: SweepPoint, seed: int) -> ExperimentConfig:
    data = base.snapshot()
    data["setting"] = "fed"
    data["seed"] = seed
    data["rounds"].update(fraction=point.fraction, local_epochs=point.local_epochs, batch_size=point.batch_size)
    return type(base).parse_obj(data)


def run_sweep(base: ExperimentConfig, dataset: FederatedDataset, kind: str, seeds: Sequence[int],
              threshold: float = 0.5) -> SweepSummary:
    """Федеративное обучение в каждой точке сетки для каждого seed."""
    summary = SweepSummary(kind)
    for point in sweep_grid(kind, base):
        for seed in seeds:
            cfg = point_config(base, point, seed)
            experiment = run_experiment(cfg, dataset)
            reached = rounds_to_threshold(experiment.result.average_history(), threshold)
            summary.rows.append(SweepRow(point, seed, reached, experiment.result.best.average.mrr,
                                         experiment.test.average.mrr))
            logger.info(f"F={point.fraction} E={point.local_epochs} B={point.batch_size} seed={seed}: "
                        f"раундов до порога {reached}")
    return summary


def write_sweep(summary: SweepSummary, path: Union[str, Path]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.DictWriter(f, fieldnames=SWEEP_FIELDS, delimiter='\t', lineterminator='\n')
        writer.writeheader()
        for row in summary.rows:
            writer.writerow({
                "kind": summary.kind,
                "fraction": row.point.fraction,
                "local_epochs": row.point.local_epochs,
                "batch_size": row.point.batch_size,
                "seed": row.seed,
                "rounds_to_threshold": "" if row.rounds is None else row.rounds,
                "best_valid_mrr": f"{row.best_valid_mrr:.10f}",
                "test_mrr": f"{row.test_mrr:.10f}",
            })
