"""Corpus data model: discourse-labeled and claim-annotated abstracts.

Two on-disk formats are supported (documented in docs/formats.md):

* Discourse corpus: blocks of ``###<id>`` followed by ``LABEL\\tsentence``
  lines, separated by blank lines.
* Claim corpus: UTF-8 JSON lines, one abstract per line, with per-annotator
  label vectors and optional gold labels.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field

from .errors import ContractError, FormatError, IntegrityError

CLAIM_LABELS = ("not_claim", "claim")


@dataclass
class Abstract:
    id: str
    title: str
    sentences: list[str]

    def __post_init__(self):
        if not self.sentences:
            raise ContractError(f"abstract {self.id!r} has no sentences")


@dataclass
class AnnotationRecord:
    abstract_id: str
    annotator_id: str
    labels: list[bool]
    timestamp: str = ""


@dataclass
class LabeledAbstract:
    """An abstract plus exactly one kind of per-sentence labels."""

    abstract: Abstract
    claim_labels: list[bool] | None = None
    discourse_labels: list[str] | None = None

    def __post_init__(self):
        has_claim = self.claim_labels is not None
        has_discourse = self.discourse_labels is not None
        if has_claim == has_discourse:
            raise ContractError("exactly one of claim_labels/discourse_labels must be set")
        labels = self.claim_labels if has_claim else self.discourse_labels
        if len(labels) != len(self.abstract.sentences):
            raise IntegrityError(
                f"abstract {self.abstract.id!r}: {len(labels)} labels for "
                f"{len(self.abstract.sentences)} sentences")


@dataclass
class ClaimDocument:
    """A claim-corpus entry: abstract, raw annotator records, optional gold."""

    abstract: Abstract
    annotations: list[AnnotationRecord] = field(default_factory=list)
    gold_labels: list[bool] | None = None


@dataclass
class DiscourseCorpus:
    abstracts: list[LabeledAbstract]
    labels: tuple[str, ...]
    skipped_empty: int = 0


@dataclass
class SplitSpec:
    seed: int
    train_frac: float = 0.50
    val_frac: float = 0.25

    def __post_init__(self):
        if self.train_frac < 0 or self.val_frac < 0 or self.train_frac + self.val_frac > 1:
            raise ContractError("split fractions must be non-negative and sum to at most 1")


def parse_discourse_corpus(path):
    """Parse the tab-separated block format into a DiscourseCorpus."""
    abstracts = []
    labels = set()
    skipped = 0
    current_id = None
    current = []

    def flush(line_no):
        nonlocal current_id, skipped
        if current_id is None:
            return
        if not current:
            skipped += 1
        else:
            abstract = Abstract(id=current_id, title="", sentences=[s for _, s in current])
            abstracts.append(LabeledAbstract(abstract=abstract,
                                             discourse_labels=[l for l, _ in current]))
        current_id = None
        current.clear()

    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                flush(line_no)
                continue
            if line.startswith("###"):
                flush(line_no)
                current_id = line[3:].strip()
                if not current_id:
                    raise FormatError("empty abstract id after ###", line=line_no)
                continue
            if current_id is None:
                raise FormatError("sentence line outside an abstract block", line=line_no)
            if "\t" not in line:
                raise FormatError("expected LABEL<TAB>sentence", line=line_no)
            label, sentence = line.split("\t", 1)
            label = label.strip()
            if not label:
                raise FormatError("empty label", line=line_no)
            labels.add(label)
            current.append((label, sentence))
    flush(None)
    return DiscourseCorpus(abstracts=abstracts, labels=tuple(sorted(labels)), skipped_empty=skipped)


def serialize_discourse_corpus(abstracts):
    blocks = []
    for la in abstracts:
        lines = [f"###{la.abstract.id}"]
        for label, sentence in zip(la.discourse_labels, la.abstract.sentences):
            lines.append(f"{label}\t{sentence}")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


def parse_claim_corpus(path):
    """Parse JSON-lines claim records into ClaimDocuments, validating lengths."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    return parse_claim_lines(lines)


def parse_claim_lines(lines):
    docs = []
    seen_ids = set()
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid JSON: {exc}", line=line_no) from exc
        for key in ("id", "sentences"):
            if key not in record:
                raise FormatError(f"missing field {key!r}", line=line_no)
        abstract_id = str(record["id"])
        if abstract_id in seen_ids:
            raise IntegrityError(f"duplicate abstract id {abstract_id!r}")
        seen_ids.add(abstract_id)
        sentences = [str(s) for s in record["sentences"]]
        abstract = Abstract(id=abstract_id, title=str(record.get("title", "")), sentences=sentences)
        annotations = []
        seen_annotators = set()
        for ann in record.get("annotations", []):
            annotator = str(ann["annotator_id"])
            if annotator in seen_annotators:
                raise IntegrityError(
                    f"abstract {abstract_id!r}: duplicate annotator {annotator!r}")
            seen_annotators.add(annotator)
            labels = [bool(v) for v in ann["labels"]]
            if len(labels) != len(sentences):
                raise IntegrityError(
                    f"abstract {abstract_id!r}: annotator {annotator!r} has "
                    f"{len(labels)} labels for {len(sentences)} sentences")
            annotations.append(AnnotationRecord(abstract_id=abstract_id,
                                                annotator_id=annotator,
                                                labels=labels,
                                                timestamp=str(ann.get("timestamp", ""))))
        gold = record.get("gold_labels")
        if gold is not None:
            gold = [bool(v) for v in gold]
            if len(gold) != len(sentences):
                raise IntegrityError(
                    f"abstract {abstract_id!r}: {len(gold)} gold labels for "
                    f"{len(sentences)} sentences")
        docs.append(ClaimDocument(abstract=abstract, annotations=annotations, gold_labels=gold))
    return docs


def serialize_claim_corpus(docs):
    lines = []
    for doc in docs:
        record = {
            "v": 1,
            "id": doc.abstract.id,
            "title": doc.abstract.title,
            "sentences": list(doc.abstract.sentences),
            "annotations": [
                {
                    "annotator_id": ann.annotator_id,
                    "labels": [int(v) for v in ann.labels],
                    "timestamp": ann.timestamp,
                }
                for ann in doc.annotations
            ],
        }
        if doc.gold_labels is not None:
            record["gold_labels"] = [int(v) for v in doc.gold_labels]
        lines.append(json.dumps(record, sort_keys=True, ensure_ascii=False))
    return "\n".join(lines) + ("\n" if lines else "")


def majority_vote(records):
    """Per-sentence strict majority over annotator records.

    Ties (possible with an even annotator count) resolve to not-claim;
    use majority_vote_detailed to see which positions tied.
    """
    labels, _ = majority_vote_detailed(records)
    return labels


def majority_vote_detailed(records):
    if not records:
        raise ContractError("majority_vote requires at least one record")
    length = len(records[0].labels)
    for rec in records:
        if len(rec.labels) != length:
            raise ContractError("annotation records have mismatched lengths")
    n = len(records)
    labels = []
    ties = []
    for i in range(length):
        votes = sum(1 for rec in records if rec.labels[i])
        labels.append(votes * 2 > n)
        ties.append(votes * 2 == n)
    return labels, ties


def attach_gold(docs, min_annotators=1):
    """LabeledAbstracts using stored gold labels, else a majority vote."""
    labeled = []
    for doc in docs:
        if doc.gold_labels is not None:
            labels = list(doc.gold_labels)
        else:
            if len(doc.annotations) < min_annotators:
                continue
            labels = majority_vote(doc.annotations)
        labeled.append(LabeledAbstract(abstract=doc.abstract, claim_labels=labels))
    return labeled


def _doc_id(item):
    if isinstance(item, (LabeledAbstract, ClaimDocument)):
        return item.abstract.id
    if isinstance(item, Abstract):
        return item.id
    raise ContractError(f"cannot split items of type {type(item).__name__}")


def make_splits(items, spec):
    """Deterministic (train, val, test) partition at the abstract level.

    Items are ordered by id, shuffled with the seed, then cut at
    floor(train_frac*n) and floor(val_frac*n); the remainder is test.
    """
    if not items:
        raise ContractError("cannot split an empty corpus")
    ordered = sorted(items, key=_doc_id)
    rng = random.Random(spec.seed)
    rng.shuffle(ordered)
    n = len(ordered)
    n_train = int(spec.train_frac * n)
    n_val = int(spec.val_frac * n)
    train = ordered[:n_train]
    val = ordered[n_train:n_train + n_val]
    test = ordered[n_train + n_val:]
    return train, val, test


@dataclass
class CorpusStats:
    n_abstracts: int
    n_sentences: int
    n_claims: int
    last_sentence_fraction: float
    decile_counts: list[int]


def corpus_stats(labeled):
    """Counts plus the distribution of claim positions within abstracts.

    Relative position of sentence i (0-based) in an n-sentence abstract is
    (i + 1) / n, so last sentences land in the top decile.
    """
    n_abstracts = len(labeled)
    n_sentences = 0
    n_claims = 0
    last = 0
    deciles = [0] * 10
    for la in labeled:
        n = len(la.abstract.sentences)
        n_sentences += n
        for i, is_claim in enumerate(la.claim_labels):
            if not is_claim:
                continue
            n_claims += 1
            if i == n - 1:
                last += 1
            rel = (i + 1) / n
            deciles[min(9, int(rel * 10))] += 1
    fraction = last / n_claims if n_claims else 0.0
    return CorpusStats(n_abstracts=n_abstracts, n_sentences=n_sentences,
                       n_claims=n_claims, last_sentence_fraction=fraction,
                       decile_counts=deciles)


def relabel_conclusion_as_claim(discourse_corpus, conclusion_label=None):
    """Derive binary labels from a discourse corpus: conclusions become claims."""
    if conclusion_label is None:
        candidates = [l for l in discourse_corpus.labels if l.lower().startswith("conclusion")]
        if not candidates:
            raise ContractError(
                f"no conclusion-like label in vocabulary {discourse_corpus.labels}")
        conclusion_label = candidates[0]
    elif conclusion_label not in discourse_corpus.labels:
        raise ContractError(f"label {conclusion_label!r} not in vocabulary {discourse_corpus.labels}")
    out = []
    for la in discourse_corpus.abstracts:
        labels = [l == conclusion_label for l in la.discourse_labels]
        out.append(LabeledAbstract(abstract=la.abstract, claim_labels=labels))
    return out
