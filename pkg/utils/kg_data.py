"""
Модуль для загрузки и кодирования графов знаний.

Основные принципы:
- Триплет хранится как тройка целых индексов (head, relation, tail)
- Словарь присваивает идентификаторы в порядке первого появления метки
- Дубликаты триплетов отбрасываются с предупреждением
"""

import logging
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, NamedTuple, Optional, Set, Tuple, Union

import numpy as np

from utils.errors import KGParseError, UnknownLabelError

logger = logging.getLogger(__name__)


class Triple(NamedTuple):
    """Факт графа знаний в виде индексов словаря."""
    head: int
    relation: int
    tail: int


class Vocabulary:
    """Словарь сущностей и отношений: метка <-> плотный индекс."""

    def __init__(self, entities: Optional[Iterable[str]] = None,
                 relations: Optional[Iterable[str]] = None, frozen: bool = False):
        self.entities: List[str] = []
        self.relations: List[str] = []
        self.entity_index: Dict[str, int] = {}
        self.relation_index: Dict[str, int] = {}
        self.frozen = False

        for label in entities or []:
            self.add_entity(label)
        for label in relations or []:
            self.add_relation(label)
        self.frozen = frozen

    @property
    def num_entities(self) -> int:
        return len(self.entities)

    @property
    def num_relations(self) -> int:
        return len(self.relations)

    def freeze(self) -> "Vocabulary":
        """Запрещает добавление новых меток."""
        self.frozen = True
        return self

    def add_entity(self, label: str) -> int:
        idx = self.entity_index.get(label)
        if idx is None:
            if self.frozen:
                raise UnknownLabelError(label, "entity")
            idx = len(self.entities)
            self.entities.append(label)
            self.entity_index[label] = idx
        return idx

    def add_relation(self, label: str) -> int:
        idx = self.relation_index.get(label)
        if idx is None:
            if self.frozen:
                raise UnknownLabelError(label, "relation")
            idx = len(self.relations)
            self.relations.append(label)
            self.relation_index[label] = idx
        return idx

    def entity_id(self, label: str) -> int:
        try:
            return self.entity_index[label]
        except KeyError:
            raise UnknownLabelError(label, "entity") from None

    def relation_id(self, label: str) -> int:
        try:
            return self.relation_index[label]
        except KeyError:
            raise UnknownLabelError(label, "relation") from None

    def copy(self) -> "Vocabulary":
        return Vocabulary(self.entities, self.relations, frozen=self.frozen)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Vocabulary):
            return NotImplemented
        return self.entities == other.entities and self.relations == other.relations

    def __repr__(self) -> str:
        return f"Vocabulary(entities={self.num_entities}, relations={self.num_relations})"


class TripleStore:
    """
    Набор триплетов без дубликатов плюс фильтр-индекс
    (head, relation) -> хвосты и (tail, relation) -> головы.
    """

    def __init__(self, triples: Union[np.ndarray, Iterable[Tuple[int, int, int]], None] = None,
                 source: str = "<memory>"):
        if triples is None:
            triples = []
        elif not isinstance(triples, np.ndarray):
            triples = list(triples)
        array = np.asarray(triples, dtype=np.int64).reshape(-1, 3)

        if len(array):
            _, first_index = np.unique(array, axis=0, return_index=True)
            if len(first_index) < len(array):
                logger.warning(f"{source}: отброшено {len(array) - len(first_index)} дубликатов триплетов")
                array = array[np.sort(first_index)]

        self.array: np.ndarray = np.ascontiguousarray(array)
        self.array.setflags(write=False)

        self.tails_of: Dict[Tuple[int, int], Set[int]] = {}
        self.heads_of: Dict[Tuple[int, int], Set[int]] = {}
        for h, r, t in self.array.tolist():
            self.tails_of.setdefault((h, r), set()).add(t)
            self.heads_of.setdefault((t, r), set()).add(h)

    def __len__(self) -> int:
        return len(self.array)

    def __iter__(self) -> Iterator[Triple]:
        for h, r, t in self.array.tolist():
            yield Triple(h, r, t)

    def __contains__(self, triple: Tuple[int, int, int]) -> bool:
        h, r, t = triple
        return t in self.tails_of.get((h, r), ())

    @property
    def triples(self) -> List[Triple]:
        return list(self)

    @property
    def heads(self) -> np.ndarray:
        return self.array[:, 0]

    @property
    def relations(self) -> np.ndarray:
        return self.array[:, 1]

    @property
    def tails(self) -> np.ndarray:
        return self.array[:, 2]

    def known_tails(self, head: int, relation: int) -> Set[int]:
        return self.tails_of.get((head, relation), set())

    def known_heads(self, tail: int, relation: int) -> Set[int]:
        return self.heads_of.get((tail, relation), set())

    def entity_ids(self) -> np.ndarray:
        """Уникальные индексы сущностей, встречающихся в триплетах."""
        return np.unique(np.concatenate([self.heads, self.tails])) if len(self) else np.zeros(0, dtype=np.int64)

    def relation_ids(self) -> np.ndarray:
        return np.unique(self.relations)

    @classmethod
    def union(cls, *stores: "TripleStore") -> "TripleStore":
        """Объединение нескольких наборов (например train ∪ valid ∪ test)."""
        parts = [s.array for s in stores if len(s)]
        if not parts:
            return cls()
        return cls(np.concatenate(parts), source="union")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TripleStore):
            return NotImplemented
        return np.array_equal(self.array, other.array)

    def __repr__(self) -> str:
        return f"TripleStore({len(self)} triples)"


def load_triples(path: Union[str, Path], vocab: Optional[Vocabulary] = None) -> Tuple[TripleStore, Vocabulary]:
    """
    Загружает триплеты из TSV файла "head<TAB>relation<TAB>tail".

    Args:
        path: Путь к файлу (UTF-8, один триплет на строку)
        vocab: Словарь для кодирования. Если заморожен, неизвестные метки
               вызывают UnknownLabelError; иначе словарь расширяется

    Returns:
        (TripleStore, Vocabulary)
    """
    vocab = vocab if vocab is not None else Vocabulary()
    rows: List[Tuple[int, int, int]] = []

    with open(path, 'r', encoding='utf-8') as f:
        for line_number, line in enumerate(f, 1):
            line = line.rstrip('\n').rstrip('\r')
            if not line:
                continue
            fields = line.split('\t')
            if len(fields) != 3:
                raise KGParseError(str(path), line_number, f"ожидалось 3 поля, получено {len(fields)}")

            head, relation, tail = fields
            try:
                rows.append((vocab.add_entity(head), vocab.add_relation(relation), vocab.add_entity(tail)))
            except UnknownLabelError as e:
                raise UnknownLabelError(e.label, e.kind, line_number) from None

    store = TripleStore(rows, source=str(path))
    logger.info(f"Загружено {len(store)} триплетов из {path}")
    return store, vocab


def save_triples(store: TripleStore, vocab: Vocabulary, path: Union[str, Path]) -> None:
    """Сохраняет триплеты в TSV с метками в исходном порядке."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        for h, r, t in store.array.tolist():
            f.write(f"{vocab.entities[h]}\t{vocab.relations[r]}\t{vocab.entities[t]}\n")
