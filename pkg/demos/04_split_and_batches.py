"""
Stratified splits and mini-batches
==================================

Exact per-class counts are drawn with a seeded SplitMix64 shuffle, so the
same manifest and seed always give the same files.
"""

from lungline.data import (KAGGLE_COUNTS, TABLE1_SPLIT, DatasetManifest, Record,
                           batches, num_batches, split_dataset)

names = tuple(KAGGLE_COUNTS)
manifest = DatasetManifest(
    tuple(Record(f"{n}/{i:04d}.png", k) for k, n in enumerate(names) for i in range(KAGGLE_COUNTS[n])),
    names,
)
print("available", manifest.class_counts())

parts = split_dataset(manifest, TABLE1_SPLIT)
for name, part in parts.items():
    print(f"{name:<6}{len(part):>6}  {part.class_counts()}")

train = parts["train"]
print("batches of 32:", num_batches(len(train), 32))
first = next(batches(train, 32, shuffle=True, seed=1))
print("first shuffled batch starts with", [r.path for r in first[:3]])
