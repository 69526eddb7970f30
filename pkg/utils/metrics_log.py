"""
Журнал метрик в формате TSV.

Заголовок: round client split mrr hits1 hits5 hits10
Одна строка на клиента в точке оценки плюс строка client=avg со средним,
взвешенным по числу запросов. Вещественные значения - 10 знаков после точки.
"""

import csv
from pathlib import Path
from typing import Dict, List, Mapping, Union

from utils.metrics import Metrics

FIELDS = ["round", "client", "split", "mrr", "hits1", "hits5", "hits10"]
AVERAGE_LABEL = "avg"


def _row(round_number: int, client: str, split: str, metrics: Metrics) -> Dict[str, str]:
    return {
        "round": str(round_number),
        "client": str(client),
        "split": split,
        "mrr": f"{metrics.mrr:.10f}",
        "hits1": f"{metrics.hits1:.10f}",
        "hits5": f"{metrics.hits5:.10f}",
        "hits10": f"{metrics.hits10:.10f}",
    }


class MetricsLog:
    """Дописываемый журнал метрик; append=False начинает файл заново."""

    def __init__(self, path: Union[str, Path], append: bool = False):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        if not append or not self.path.exists():
            with open(self.path, 'w', encoding='utf-8', newline='') as f:
                csv.DictWriter(f, fieldnames=FIELDS, delimiter='\t', lineterminator='\n').writeheader()

    def append(self, round_number: int, client: str, split: str, metrics: Metrics) -> None:
        with open(self.path, 'a', encoding='utf-8', newline='') as f:
            writer = csv.DictWriter(f, fieldnames=FIELDS, delimiter='\t', lineterminator='\n')
            writer.writerow(_row(round_number, client, split, metrics))

    def write_evaluation(self, round_number: int, split: str, per_client: Mapping[object, Metrics],
                         average: Metrics) -> None:
        """Записи всех клиентов точки оценки и их среднее."""
        for client, metrics in per_client.items():
            self.append(round_number, str(client), split, metrics)
        self.append(round_number, AVERAGE_LABEL, split, average)

    def truncate_after(self, round_number: int) -> None:
        """Удаляет записи позже указанного раунда (при продолжении обучения из чекпоинта)."""
        rows = [r for r in read_metrics_log(self.path) if int(r["round"]) <= round_number and r["split"] != "test"]
        with open(self.path, 'w', encoding='utf-8', newline='') as f:
            writer = csv.DictWriter(f, fieldnames=FIELDS, delimiter='\t', lineterminator='\n')
            writer.writeheader()
            writer.writerows(rows)


def read_metrics_log(path: Union[str, Path]) -> List[Dict[str, str]]:
    with open(path, 'r', encoding='utf-8', newline='') as f:
        return list(csv.DictReader(f, delimiter='\t'))
