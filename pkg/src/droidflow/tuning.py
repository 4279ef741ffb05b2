"""Dataset splitting and the one-factor-at-a-time hyperparameter sweep.

The test split holds the newest tenth of each class (falling back to a
seeded random split when timestamps are missing), and tuning runs on
stratified 1/8 subsets of the training and validation sets, sweeping one
hyperparameter at a time with every other knob held at its current best.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .metrics import MetricReport
from .nn.model import Hyperparams

SEARCH_SPACE = {
    "seq_len": (50, 75, 100, 125, 150, 175, 200),
    "hidden_layers": (1, 2, 3, 4),
    "lstm_units": (64, 128, 256, 512),
    "label_dim": (9, 11, 13, 15),
    "iterations": (6, 8, 10, 12),
    "epochs": (15, 20, 25, 30),
    "batch_size": (4, 8, 16, 32),
}
SWEEP_ORDER = tuple(SEARCH_SPACE)
DEFAULT_SUBSET_FRACTION = 1 / 8


def _default_label(item):
    meta = getattr(item, "metadata", None)
    if meta is None and isinstance(item, dict):
        meta = item.get("metadata", item)
    label = meta.get("label")
    if label in ("malicious", 1, True):
        return 1
    if label in ("benign", 0, False):
        return 0
    raise ValueError(f"item without usable label: {item!r}")


def _default_timestamp(item):
    meta = getattr(item, "metadata", None)
    if meta is None and isinstance(item, dict):
        meta = item.get("metadata", item)
    return meta.get("timestamp")


def split_dataset(items, ratios=(8, 1, 1), seed: int = 0,
                  label_of=_default_label, timestamp_of=_default_timestamp):
    """(train, val, test) split, per class.

    With timestamps on every item, the newest test share of each class is
    held out and the remainder splits randomly at the train:val ratio.
    Missing timestamps degrade to a fully random (but seeded) split with a
    warning.
    """
    r_train, r_val, r_test = ratios
    total = r_train + r_val + r_test
    rng = np.random.default_rng(seed)
    by_class = {}
    for idx, item in enumerate(items):
        by_class.setdefault(label_of(item), []).append((idx, item))

    have_timestamps = all(
        timestamp_of(item) is not None for _, item in _flatten(by_class)
    )
    if not have_timestamps:
        warnings.warn(
            "timestamps missing: holding out a random test split instead of the newest share",
            stacklevel=2,
        )

    train, val, test = [], [], []
    for label in sorted(by_class):
        members = by_class[label]
        n = len(members)
        n_test = round(n * r_test / total)
        if have_timestamps:
            newest_first = sorted(members, key=lambda p: (timestamp_of(p[1]), -p[0]),
                                  reverse=True)
            test_part = newest_first[:n_test]
            rest = newest_first[n_test:]
        else:
            order = rng.permutation(n)
            test_part = [members[i] for i in order[:n_test]]
            rest = [members[i] for i in order[n_test:]]
        rest = [rest[i] for i in rng.permutation(len(rest))]
        n_val = round(len(rest) * r_val / (r_train + r_val))
        val_part = rest[:n_val]
        train_part = rest[n_val:]
        test.extend(test_part)
        val.extend(val_part)
        train.extend(train_part)

    def restore(part):
        return [item for _, item in sorted(part, key=lambda p: p[0])]

    return restore(train), restore(val), restore(test)


def _flatten(by_class):
    for members in by_class.values():
        yield from members


def stratified_subset(items, fraction: float, seed: int = 0, label_of=_default_label):
    """Per-class random subset of about `fraction`, at least one per class."""
    rng = np.random.default_rng(seed)
    by_class = {}
    for idx, item in enumerate(items):
        by_class.setdefault(label_of(item), []).append((idx, item))
    chosen = []
    for label in sorted(by_class):
        members = by_class[label]
        k = max(1, round(len(members) * fraction))
        order = rng.permutation(len(members))
        chosen.extend(members[i] for i in order[:k])
    return [item for _, item in sorted(chosen, key=lambda p: p[0])]


@dataclass(frozen=True)
class GridPoint:
    hyper: Hyperparams
    report: MetricReport


@dataclass
class GridSearchResult:
    points: list            # every evaluated GridPoint, in sweep order
    best: GridPoint         # max F1 over all points (first on ties)
    tuned: Hyperparams      # final value of each swept factor
    revalidated: list       # (GridPoint, full-set MetricReport) pairs


def grid_search(train, val, evaluate, space=None, defaults: Hyperparams = Hyperparams(),
                subset_fraction: float = DEFAULT_SUBSET_FRACTION, seed: int = 0,
                revalidate_top: int = 0, label_of=_default_label) -> GridSearchResult:
    """One-factor-at-a-time sweep on stratified subsets.

    evaluate(hp, train_items, val_items) -> MetricReport does the actual
    training run. Factors sweep in declaration order; after each factor the
    best value (max F1, earliest on ties) is locked in. With
    revalidate_top > 0, the top points re-evaluate on the full sets.
    """
    space = dict(SEARCH_SPACE if space is None else space)
    train_sub = stratified_subset(train, subset_fraction, seed, label_of)
    val_sub = stratified_subset(val, subset_fraction, seed + 1, label_of)

    current = defaults
    points = []
    for factor in (f for f in SWEEP_ORDER if f in space):
        factor_points = []
        for value in space[factor]:
            hp = current.replace(**{factor: value})
            report = evaluate(hp, train_sub, val_sub)
            point = GridPoint(hp, report)
            points.append(point)
            factor_points.append(point)
        winner = max(factor_points, key=lambda p: p.report.f1)
        current = current.replace(**{factor: getattr(winner.hyper, factor)})

    best = max(points, key=lambda p: p.report.f1)
    revalidated = []
    if revalidate_top > 0:
        top = sorted(points, key=lambda p: -p.report.f1)[:revalidate_top]
        for point in top:
            revalidated.append((point, evaluate(point.hyper, train, val)))
    return GridSearchResult(points, best, current, revalidated)


GRID_CSV_HEADER = (
    "seq_len,hidden_layers,lstm_units,label_dim,iterations,epochs,batch_size,"
    "accuracy,precision,recall,f1,fpr,fnr,roc_auc,prc_auc"
)


def grid_to_csv(result: GridSearchResult) -> str:
    lines = [GRID_CSV_HEADER]
    for p in result.points:
        h, r = p.hyper, p.report
        lines.append(
            f"{h.seq_len},{h.hidden_layers},{h.lstm_units},{h.label_dim},"
            f"{h.iterations},{h.epochs},{h.batch_size},"
            f"{r.accuracy:.6f},{r.precision:.6f},{r.recall:.6f},{r.f1:.6f},"
            f"{r.fpr:.6f},{r.fnr:.6f},{r.roc_auc:.6f},{r.prc_auc:.6f}"
        )
    return "\n".join(lines) + "\n"
