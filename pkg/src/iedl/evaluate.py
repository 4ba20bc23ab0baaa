"""Ranking metrics and uncertainty evaluation protocols.

Metrics use explicit tie conventions: AUROC is the Mann-Whitney statistic
with half credit for tied score pairs, and AUPR is average precision with
tied scores grouped into one threshold block.  The energy distance treats
each sample as an empirical distribution, averaging within-sample
distances over distinct index pairs only, and clamps the squared distance
at zero before the root.

Protocols score a trained model and come back as :class:`TaskReport`
rows ``(task, score, metric, value, seed)`` ready for CSV export.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import seeds
from .data import add_noise
from .net import predict_scores

__all__ = [
    "auroc",
    "aupr",
    "energy_distance",
    "min_max_normalize",
    "TaskReport",
    "confidence_eval",
    "ood_detect",
    "noisy_detect",
    "write_report_csv",
    "write_aggregate_csv",
]


def _check_binary(scores, labels, name):
    s = np.asarray(scores, dtype=np.float64)
    lab = np.asarray(labels)
    if s.ndim != 1 or s.shape != lab.shape:
        raise ValueError(f"{name}: scores and labels must be matching 1-D arrays")
    if not np.all(np.isfinite(s)):
        raise ValueError(f"{name}: scores must be finite")
    pos = lab.astype(bool)
    if not pos.any() or pos.all():
        raise ValueError(f"{name}: needs both positive and negative examples")
    return s, pos


def _average_ranks(values):
    """1-based ranks with ties sharing their average rank."""
    _, inverse, counts = np.unique(values, return_inverse=True, return_counts=True)
    end = np.cumsum(counts)
    avg = end - (counts - 1) / 2.0
    return avg[inverse]


def auroc(scores, labels):
    """Probability a positive outranks a negative, ties counting half."""
    s, pos = _check_binary(scores, labels, "auroc")
    ranks = _average_ranks(s)
    n_pos = int(pos.sum())
    n_neg = s.size - n_pos
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def aupr(scores, labels):
    """Average precision, sweeping thresholds over tied-score blocks."""
    s, pos = _check_binary(scores, labels, "aupr")
    _, inverse, counts = np.unique(s, return_inverse=True, return_counts=True)
    tp_per_block = np.bincount(inverse, weights=pos.astype(np.float64))
    # np.unique sorts ascending; sweep from the highest score down
    tp = tp_per_block[::-1]
    block = counts[::-1].astype(np.float64)
    cum_tp = np.cumsum(tp)
    cum_n = np.cumsum(block)
    precision = cum_tp / cum_n
    return float((precision * tp).sum() / pos.sum())


def _mean_abs_within(values):
    """Mean |x_i - x_j| over i != j, via a sorted prefix trick."""
    n = values.size
    if n < 2:
        return 0.0
    xs = np.sort(values)
    weights = 2.0 * np.arange(n) - (n - 1)
    return float(2.0 * (xs * weights).sum() / (n * (n - 1)))


def _mean_abs_cross(a, b):
    """Mean |a_i - b_j| over all pairs, O((n+m) log(n+m))."""
    xs = np.sort(a)
    prefix = np.concatenate(([0.0], np.cumsum(xs)))
    total = prefix[-1]
    idx = np.searchsorted(xs, b, side="right")
    below = b * idx - prefix[idx]
    above = (total - prefix[idx]) - b * (xs.size - idx)
    return float((below + above).sum() / (xs.size * b.size))


def energy_distance(a, b):
    """Distance between two 1-D samples; zero iff distributions agree.

    sqrt(max(0, 2 E|X-Y| - E|X-X'| - E|Y-Y'|)) with within-sample means
    over distinct pairs, which can dip below zero on small samples.
    """
    x = np.asarray(a, dtype=np.float64).ravel()
    y = np.asarray(b, dtype=np.float64).ravel()
    if x.size == 0 or y.size == 0:
        raise ValueError("energy_distance: empty sample")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("energy_distance: non-finite values")
    squared = 2.0 * _mean_abs_cross(x, y) - _mean_abs_within(x) - _mean_abs_within(y)
    return float(np.sqrt(max(squared, 0.0)))


def min_max_normalize(values):
    """Affine map of a 1-D array onto [0, 1]; constant input maps to zeros."""
    v = np.asarray(values, dtype=np.float64)
    lo = v.min()
    span = v.max() - lo
    if span == 0.0:
        return np.zeros_like(v)
    return (v - lo) / span


@dataclass
class TaskReport:
    """Named metric values for one protocol run on one seed."""

    task: str
    seed: int
    values: dict = field(default_factory=dict)

    def put(self, score, metric, value):
        self.values[(score, metric)] = float(value)

    def get(self, score, metric):
        return self.values[(score, metric)]

    def rows(self):
        for (score, metric), value in sorted(self.values.items()):
            yield self.task, score, metric, value, self.seed


def confidence_eval(model, ds, seed=0):
    """Rank correct vs incorrect predictions by confidence.

    Positives are correctly classified examples; the rankers are the
    predicted-class probability and the predicted-class concentration.
    If every prediction lands on one side the ranking metrics are
    reported as nan.
    """
    scores = predict_scores(model, ds.features)
    correct = scores.pred_class == ds.labels
    report = TaskReport("confidence", seed)
    report.put("overall", "accuracy", correct.mean())
    degenerate = bool(correct.all()) or not bool(correct.any())
    for name, ranker in (("max_p", scores.max_p), ("max_alpha", scores.max_alpha)):
        if degenerate:
            report.put(name, "aupr", np.nan)
            report.put(name, "auroc", np.nan)
        else:
            report.put(name, "aupr", aupr(ranker, correct))
            report.put(name, "auroc", auroc(ranker, correct))
    return report


def _equalize(id_scores, ood_scores, seed):
    """Trim the larger side to the smaller by seeded subsampling."""
    n_id = id_scores.alpha0.size
    n_ood = ood_scores.alpha0.size
    if n_id == n_ood:
        return id_scores, ood_scores
    rng = seeds.make_rng(seed, seeds.SUBSAMPLE)
    n = min(n_id, n_ood)
    larger = id_scores if n_id > n_ood else ood_scores
    keep = np.sort(rng.choice(max(n_id, n_ood), size=n, replace=False))
    trimmed = type(larger)(**{k: v[keep] for k, v in vars(larger).items()})
    return (trimmed, ood_scores) if n_id > n_ood else (id_scores, trimmed)


def ood_detect(model, id_ds, ood_ds, seed=0, equalize=True, task="ood"):
    """Separate in-distribution from out-of-distribution examples.

    Positives are in-distribution.  Rankers: predicted-class probability,
    total concentration, and the negated differential entropy and mutual
    information (higher entropy means more OOD).  Also reports the energy
    distance between the two normalized differential-entropy samples;
    ``equalize`` subsamples the larger side first so both carry equal
    weight.
    """
    s_id = predict_scores(model, id_ds.features)
    s_ood = predict_scores(model, ood_ds.features)
    if equalize:
        s_id, s_ood = _equalize(s_id, s_ood, seed)
    labels = np.concatenate(
        [np.ones(s_id.alpha0.size, bool), np.zeros(s_ood.alpha0.size, bool)]
    )
    rankers = {
        "max_p": np.concatenate([s_id.max_p, s_ood.max_p]),
        "alpha0": np.concatenate([s_id.alpha0, s_ood.alpha0]),
        "diff_ent": -np.concatenate([s_id.diff_ent, s_ood.diff_ent]),
        "mi": -np.concatenate([s_id.mi, s_ood.mi]),
    }
    report = TaskReport(task, seed)
    for name, ranker in rankers.items():
        report.put(name, "aupr", aupr(ranker, labels))
        report.put(name, "auroc", auroc(ranker, labels))
    combined = np.concatenate([s_id.diff_ent, s_ood.diff_ent])
    normalized = min_max_normalize(combined)
    report.put(
        "diff_ent",
        "energy",
        energy_distance(normalized[labels], normalized[~labels]),
    )
    return report


def noisy_detect(model, ds, sigma=0.1, seed=0):
    """Separate clean examples from Gaussian-corrupted copies of them."""
    if sigma < 0.0:
        raise ValueError(f"noisy_detect: sigma must be >= 0, got {sigma}")
    noisy = add_noise(ds, sigma, seeds.make_rng(seed, seeds.NOISE))
    return ood_detect(model, ds, noisy, seed=seed, equalize=False, task="noisy")


def _format_value(value):
    return f"{value:.12g}"


def write_report_csv(path, reports):
    """Write ``task,score,metric,value,seed`` rows, deterministically ordered."""
    rows = []
    for report in reports:
        rows.extend(report.rows())
    rows.sort(key=lambda r: (r[0], r[4], r[1], r[2]))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("task,score,metric,value,seed\n")
        for task, score, metric, value, seed in rows:
            fh.write(f"{task},{score},{metric},{_format_value(value)},{seed}\n")


def write_aggregate_csv(path, reports):
    """Mean and sample std over seeds for each (task, score, metric)."""
    grouped = {}
    for report in reports:
        for task, score, metric, value, _ in report.rows():
            grouped.setdefault((task, score, metric), []).append(value)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("task,score,metric,mean,std,n\n")
        for (task, score, metric), values in sorted(grouped.items()):
            arr = np.asarray(values)
            std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
            fh.write(
                f"{task},{score},{metric},{_format_value(arr.mean())},"
                f"{_format_value(std)},{arr.size}\n"
            )
