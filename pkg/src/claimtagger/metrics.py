"""Evaluation metrics and comparison reports.

Precision/recall/F1 are micro-averaged over all sentences of a split with
claim as the positive class.  Agreement statistics follow the standard
two-rater (chance from marginal products) and many-rater (chance from
pooled category proportions) formulations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError

_SPLIT_ORDER = {"train": 0, "validation": 1, "val": 1, "test": 2}


@dataclass
class BinaryCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    @property
    def total(self):
        return self.tp + self.fp + self.fn + self.tn


@dataclass
class PRF1:
    precision: float
    recall: float
    f1: float
    counts: BinaryCounts
    degenerate: bool = False


def prf1(predictions, golds):
    """Precision, recall, and F1 with zero denominators flagged, not fatal."""
    predictions = list(predictions)
    golds = list(golds)
    if len(predictions) != len(golds):
        raise ContractError(f"{len(predictions)} predictions vs {len(golds)} golds")
    c = BinaryCounts()
    for p, g in zip(predictions, golds):
        if p and g:
            c.tp += 1
        elif p and not g:
            c.fp += 1
        elif g:
            c.fn += 1
        else:
            c.tn += 1
    degenerate = False
    if c.tp + c.fp == 0:
        precision, degenerate = 0.0, True
    else:
        precision = c.tp / (c.tp + c.fp)
    if c.tp + c.fn == 0:
        recall, degenerate = 0.0, True
    else:
        recall = c.tp / (c.tp + c.fn)
    if precision + recall == 0:
        f1, degenerate = 0.0, True
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return PRF1(precision=precision, recall=recall, f1=f1, counts=c, degenerate=degenerate)


def cohen_kappa(labels_a, labels_b):
    """Two-rater chance-corrected agreement over categorical sequences."""
    a = list(labels_a)
    b = list(labels_b)
    if not a or len(a) != len(b):
        raise ContractError("cohen_kappa needs two equal-length nonempty sequences")
    n = len(a)
    observed = sum(1 for x, y in zip(a, b) if x == y) / n
    categories = set(a) | set(b)
    expected = 0.0
    for cat in categories:
        pa = sum(1 for x in a if x == cat) / n
        pb = sum(1 for y in b if y == cat) / n
        expected += pa * pb
    if 1.0 - expected < 1e-15:
        # both raters constant on the same category; agreement is total
        return 1.0
    return (observed - expected) / (1.0 - expected)


def fleiss_kappa(ratings):
    """Many-rater agreement from an items x categories count matrix.

    Every row must sum to the same rater count n >= 2.
    """
    counts = np.asarray(ratings, dtype=np.float64)
    if counts.ndim != 2 or counts.shape[0] < 1:
        raise ContractError("ratings must be an items x categories matrix")
    row_sums = counts.sum(axis=1)
    n = row_sums[0]
    if n < 2 or not np.all(row_sums == n):
        raise ContractError("every item needs the same rater count n >= 2")
    per_item = ((counts * counts).sum(axis=1) - n) / (n * (n - 1))
    p_bar = per_item.mean()
    proportions = counts.sum(axis=0) / counts.sum()
    p_expected = float(proportions @ proportions)
    if 1.0 - p_expected < 1e-15:
        return 1.0
    return float((p_bar - p_expected) / (1.0 - p_expected))


@dataclass
class EvalReport:
    metrics: PRF1
    exact_match_fraction: float
    n_abstracts: int
    problem_abstracts: list = field(default_factory=list)  # (id, misclassified count)


def evaluate_model(predict_fn, labeled):
    """Sentence-level metrics plus abstract-level exact-match accounting.

    ``predict_fn`` maps an Abstract to a per-sentence boolean list.
    Abstracts with more than one misclassified sentence are listed for
    error review.
    """
    all_preds = []
    all_golds = []
    exact = 0
    problems = []
    for la in labeled:
        preds = [bool(p) for p in predict_fn(la.abstract)]
        golds = [bool(g) for g in la.claim_labels]
        if len(preds) != len(golds):
            raise ContractError(
                f"abstract {la.abstract.id!r}: {len(preds)} predictions for {len(golds)} sentences")
        all_preds.extend(preds)
        all_golds.extend(golds)
        wrong = sum(1 for p, g in zip(preds, golds) if p != g)
        if wrong == 0:
            exact += 1
        elif wrong > 1:
            problems.append((la.abstract.id, wrong))
    fraction = exact / len(labeled) if labeled else 0.0
    return EvalReport(metrics=prf1(all_preds, all_golds),
                      exact_match_fraction=fraction,
                      n_abstracts=len(labeled),
                      problem_abstracts=problems)


@dataclass
class ComparisonRow:
    model: str
    split: str
    precision: float
    recall: float
    f1: float


@dataclass
class ComparisonReport:
    rows: list[ComparisonRow]
    seed: int
    dataset_hash: str
    config_hash: str

    def sorted_rows(self):
        return sorted(self.rows,
                      key=lambda r: (r.model, _SPLIT_ORDER.get(r.split.lower(), 99), r.split))

    def render_text(self):
        header = f"{'Model':<34} {'Split':<12} {'Precision':>9} {'Recall':>9} {'F1':>9}"
        lines = [
            f"# seed={self.seed} dataset={self.dataset_hash} config={self.config_hash}",
            header,
            "-" * len(header),
        ]
        for r in self.sorted_rows():
            lines.append(f"{r.model:<34} {r.split:<12} "
                         f"{r.precision:>9.3f} {r.recall:>9.3f} {r.f1:>9.3f}")
        return "\n".join(lines) + "\n"

    def render_jsonl(self):
        meta = {"seed": self.seed, "dataset_hash": self.dataset_hash,
                "config_hash": self.config_hash}
        lines = [json.dumps({"meta": meta}, sort_keys=True)]
        for r in self.sorted_rows():
            lines.append(json.dumps({
                "model": r.model, "split": r.split,
                "precision": round(r.precision, 6),
                "recall": round(r.recall, 6),
                "f1": round(r.f1, 6),
            }, sort_keys=True))
        return "\n".join(lines) + "\n"


def build_comparison(rows, seed=0, dataset_hash="", config_hash=""):
    if not rows:
        raise ContractError("comparison needs at least one row")
    return ComparisonReport(rows=list(rows), seed=seed,
                            dataset_hash=dataset_hash, config_hash=config_hash)
