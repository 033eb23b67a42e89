"""
Dataset manifests, stratified train/val/test splitting and batch iteration.

Shuffles use SplitMix64 (Steele, Lea & Flood 2014) with a Fisher-Yates pass,
so a split can be reproduced byte-for-byte by any language given the seed.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Mapping, Optional, Sequence, TypeVar

from .errors import LunglineError

MASK64 = (1 << 64) - 1
CLASS_NAMES_3 = ("COVID-19", "Normal", "Viral Pneumonia")

T = TypeVar("T")


class ManifestError(LunglineError, ValueError):
    pass


class CapacityError(LunglineError, ValueError):
    def __init__(self, deficits: Mapping[str, tuple[int, int]]):
        detail = ", ".join(f"{c} (need {need}, have {have})" for c, (need, have) in deficits.items())
        super().__init__(f"split targets exceed available records: {detail}")
        self.deficits = dict(deficits)


class SplitMix64:
    """
    SplitMix64 generator.

    >>> g = SplitMix64(1234567)
    >>> g.next_u64()
    6457827717110365317
    """

    GAMMA = 0x9E3779B97F4A7C15

    def __init__(self, seed: int):
        self.state = int(seed) & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + self.GAMMA) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def below(self, bound: int) -> int:
        """Uniform integer in [0, bound) by rejection (no modulo bias)."""
        if bound < 1:
            raise ValueError("bound must be positive")
        limit = (1 << 64) - ((1 << 64) % bound)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % bound

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates, walking from the last index down."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]


def permutation(n: int, seed: int) -> list[int]:
    order = list(range(n))
    SplitMix64(seed).shuffle(order)
    return order


@dataclass(frozen=True)
class Record:
    path: str
    label: int


@dataclass(frozen=True)
class DatasetManifest:
    records: tuple[Record, ...]
    class_names: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        object.__setattr__(self, "class_names", tuple(self.class_names))
        k = len(self.class_names)
        seen = set()
        for r in self.records:
            if not 0 <= r.label < k:
                raise ManifestError(f"{r.path}: label {r.label} outside [0, {k})")
            if r.path in seen:
                raise ManifestError(f"duplicate path {r.path!r}")
            seen.add(r.path)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def labels(self) -> list[int]:
        return [r.label for r in self.records]

    def class_counts(self) -> dict[str, int]:
        counts = dict.fromkeys(self.class_names, 0)
        for r in self.records:
            counts[self.class_names[r.label]] += 1
        return counts


def read_manifest(path, class_names: Optional[Sequence[str]] = None) -> DatasetManifest:
    """
    Read a ``path,label`` CSV whose labels are class names.

    Without `class_names`, classes are the sorted distinct labels.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames[:2]] != ["path", "label"]:
            raise ManifestError(f"{path}: expected header 'path,label', got {reader.fieldnames}")
        rows = [(row["path"], row["label"]) for row in reader]
    if class_names is None:
        class_names = sorted({label for _, label in rows})
    index = {name: i for i, name in enumerate(class_names)}
    records = []
    for lineno, (p, label) in enumerate(rows, start=2):
        if label not in index:
            raise ManifestError(f"{path}:{lineno}: unknown class {label!r}")
        records.append(Record(p, index[label]))
    return DatasetManifest(tuple(records), tuple(class_names))


def write_manifest(manifest: DatasetManifest, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["path", "label"])
        for r in manifest.records:
            writer.writerow([r.path, manifest.class_names[r.label]])


@dataclass(frozen=True)
class SplitSpec:
    """Per-class ``(train, val, test)`` target counts."""

    counts: Mapping[str, tuple[int, int, int]]
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "counts", {k: tuple(int(x) for x in v) for k, v in self.counts.items()})
        for name, c in self.counts.items():
            if len(c) != 3 or any(x < 0 for x in c):
                raise ValueError(f"{name}: counts must be three non-negative integers, got {c}")

    def totals(self) -> tuple[int, int, int]:
        return tuple(sum(c[i] for c in self.counts.values()) for i in range(3))


TABLE1_SPLIT = SplitSpec({
    "COVID-19": (1000, 100, 100),
    "Normal": (1100, 100, 141),
    "Viral Pneumonia": (1100, 100, 145),
})
TABLE2_SPLIT = SplitSpec({
    "COVID-19": (1000, 100, 100),
    "Normal": (1100, 100, 141),
})
TABLE3_SPLIT = SplitSpec({
    "COVID-19": (1000, 100, 100),
    "Viral Pneumonia": (1100, 100, 145),
})
KAGGLE_COUNTS = {"COVID-19": 1200, "Normal": 1341, "Viral Pneumonia": 1345}


def split_dataset(manifest: DatasetManifest, spec: SplitSpec) -> dict[str, DatasetManifest]:
    """
    Stratified split with exact per-class counts.

    Each class's records (in manifest order) are shuffled by one SplitMix64
    stream seeded with ``spec.seed``, visiting classes in the order they appear
    in ``spec.counts``; the first ``train`` go to train, the next ``val`` to
    val, the next ``test`` to test. Every split keeps manifest order. The
    returned manifests only know the classes named in `spec`.
    """
    by_class: dict[str, list[int]] = {name: [] for name in manifest.class_names}
    for i, r in enumerate(manifest.records):
        by_class[manifest.class_names[r.label]].append(i)

    deficits = {}
    for name, c in spec.counts.items():
        have = len(by_class.get(name, []))
        if sum(c) > have:
            deficits[name] = (sum(c), have)
    if deficits:
        raise CapacityError(deficits)

    rng = SplitMix64(spec.seed)
    chosen: dict[str, list[int]] = {"train": [], "val": [], "test": []}
    for name, (n_train, n_val, n_test) in spec.counts.items():
        members = list(by_class[name])
        rng.shuffle(members)
        chosen["train"] += members[:n_train]
        chosen["val"] += members[n_train:n_train + n_val]
        chosen["test"] += members[n_train + n_val:n_train + n_val + n_test]

    class_names = tuple(spec.counts)
    relabel = {manifest.class_names.index(name): i for i, name in enumerate(class_names)}
    out = {}
    for part, idx in chosen.items():
        out[part] = DatasetManifest(
            tuple(Record(manifest.records[i].path, relabel[manifest.records[i].label]) for i in sorted(idx)),
            class_names,
        )
    return out


def batches(items: Sequence[T], batch_size: int, shuffle: bool = False, seed: int = 0) -> Iterator[list[T]]:
    """
    Yield ``ceil(len(items) / batch_size)`` batches; only the last may be short.

    `items` may be a DatasetManifest (yields lists of Records) or any sequence.
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    if isinstance(items, DatasetManifest):
        items = items.records
    order = permutation(len(items), seed) if shuffle else range(len(items))
    order = list(order)
    for start in range(0, len(order), batch_size):
        yield [items[i] for i in order[start:start + batch_size]]


def num_batches(n: int, batch_size: int) -> int:
    return math.ceil(n / batch_size)
