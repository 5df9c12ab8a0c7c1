"""Non-neural reference models: keyword/pattern rules, the last-sentence
heuristic, frequency-weighted sentence embeddings with first-component
removal, and L2-regularized logistic regression trained by gradient
descent."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import ContractError, FormatError
from .text import EmbeddingTable, Vocabulary, tokenize

logger = logging.getLogger(__name__)

PATTERN_GAP = 3  # max tokens a '*' may absorb

# lexical stand-ins for part-of-speech classes; data-driven via rules file
TOKEN_CLASSES = {
    "PRON1PL": {"we", "our", "us"},
    "REPORTVERB": {
        "propose", "proposed", "present", "presented", "show", "showed", "shown",
        "demonstrate", "demonstrated", "introduce", "introduced", "describe",
        "described", "find", "found", "conclude", "concluded", "suggest",
        "suggested", "reveal", "revealed", "establish", "established",
    },
    "COMPARATIVE": {"better", "superior", "greater", "higher", "improved", "faster",
                    "stronger", "safer", "more"},
    "OUTPERFORM": {"outperform", "outperforms", "outperformed"},
}


@dataclass
class Rule:
    kind: str  # "keyword" or "pattern"
    elements: list[str]
    source: str


@dataclass
class RuleSet:
    rules: list[Rule]

    def __post_init__(self):
        if not self.rules:
            raise ContractError("a rule set needs at least one rule")


def parse_rules(lines):
    rules = []
    for line_no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if ":" not in line:
            raise FormatError("expected 'keyword: ...' or 'pattern: ...'", line=line_no)
        kind, body = line.split(":", 1)
        kind = kind.strip().lower()
        elements = body.split()
        if kind == "keyword":
            if not elements:
                raise FormatError("empty keyword phrase", line=line_no)
            rules.append(Rule(kind="keyword", elements=[e.lower() for e in elements], source=line))
        elif kind == "pattern":
            if not elements:
                raise FormatError("empty pattern", line=line_no)
            for el in elements:
                if el != "*" and el.isupper() and el not in TOKEN_CLASSES:
                    raise FormatError(f"unknown token class {el!r}", line=line_no)
            rules.append(Rule(kind="pattern", elements=elements, source=line))
        else:
            raise FormatError(f"unknown rule kind {kind!r}", line=line_no)
    return RuleSet(rules)


def load_rules(path=None):
    """Rules from a file, or the packaged defaults when no path is given."""
    if path is None:
        text = resources.files("claimtagger.data").joinpath("default_rules.txt").read_text("utf-8")
        return parse_rules(text.splitlines())
    with open(path, "r", encoding="utf-8") as fh:
        return parse_rules(fh.read().splitlines())


def _element_matches(element, token):
    if element == "*":
        raise AssertionError("gaps are handled by the matcher")
    if element.isupper():
        return token in TOKEN_CLASSES[element]
    return token == element.lower()


def _pattern_matches(elements, tokens, start, ei=0):
    if ei == len(elements):
        return True
    if elements[ei] == "*":
        for gap in range(PATTERN_GAP + 1):
            if _pattern_matches(elements, tokens, start + gap, ei + 1):
                return True
            if start + gap >= len(tokens):
                break
        return False
    if start >= len(tokens):
        return False
    if _element_matches(elements[ei], tokens[start]):
        return _pattern_matches(elements, tokens, start + 1, ei + 1)
    return False


def rule_based_extract(tokens, rules):
    """True when any keyword phrase or pattern matches the token list."""
    tokens = [t.lower() for t in tokens]
    for rule in rules.rules:
        if rule.kind == "keyword":
            k = len(rule.elements)
            if any(tokens[i:i + k] == rule.elements for i in range(len(tokens) - k + 1)):
                return True
        else:
            if any(_pattern_matches(rule.elements, tokens, i) for i in range(len(tokens))):
                return True
    return False


def last_sentence_baseline(abstract):
    """Exactly the final sentence flagged as the claim."""
    n = len(abstract.sentences)
    if n < 1:
        raise ContractError("abstract has no sentences")
    return [False] * (n - 1) + [True]


# -- smooth inverse-frequency sentence embeddings ------------------------------------


@dataclass
class SifConfig:
    embeddings: EmbeddingTable
    vocab: Vocabulary
    a: float = 1e-3

    def __post_init__(self):
        if self.a <= 0:
            raise ContractError(f"smoothing constant must be positive, got {self.a}")


def sif_embed(tokens, cfg):
    """Weighted token-vector mean: weight(w) = a / (a + p(w)).

    Unknown tokens use the UNK row with p = 0, so their weight is 1.  An
    empty token list yields the zero vector (logged as a warning).
    """
    if not tokens:
        logger.warning("sif_embed called with an empty token list")
        return np.zeros(cfg.embeddings.dim)
    total = np.zeros(cfg.embeddings.dim)
    for token in tokens:
        p = cfg.vocab.probability(token)
        weight = cfg.a / (cfg.a + p)
        total += weight * cfg.embeddings.row(cfg.vocab.id(token))
    return total / len(tokens)


def remove_first_pc(train_vectors, tol=1e-9, max_iter=10_000):
    """Top right-singular direction of the raw (uncentered) stack of vectors.

    Power iteration on X^T X until successive directions differ by at most
    ``tol``.  Returns (u, remover) where remover(v) = v - u (u . v); the
    direction is fit on training vectors only and then applied everywhere.
    """
    X = np.asarray(train_vectors, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ContractError("need at least two training vectors")
    if not np.any(X):
        raise ContractError("cannot extract a principal component from all-zero vectors")
    gram = X.T @ X
    u = np.ones(X.shape[1]) / np.sqrt(X.shape[1])
    for _ in range(max_iter):
        nxt = gram @ u
        norm = np.linalg.norm(nxt)
        if norm == 0.0:
            # started orthogonal to the column space; nudge deterministically
            u = np.roll(u, 1) + 1e-3
            u /= np.linalg.norm(u)
            continue
        nxt /= norm
        if min(np.linalg.norm(nxt - u), np.linalg.norm(nxt + u)) <= tol:
            u = nxt
            break
        u = nxt

    def remover(v):
        v = np.asarray(v, dtype=np.float64)
        return v - u * (u @ v)

    return u, remover


# -- logistic regression ---------------------------------------------------------


@dataclass
class LogRegModel:
    w: np.ndarray
    b: float
    l2: float


def _sigmoid(z):
    return np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))),
                    np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))


def train_logreg(features, labels, l2=1e-3, epochs=500, lr=0.01):
    """Full-batch gradient descent on mean log-loss + (l2/2)||w||^2."""
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ContractError(f"feature matrix {X.shape} does not match {y.shape[0]} labels")
    if not np.all(np.isfinite(X)):
        raise ContractError("features must be finite")
    n, d = X.shape
    w = np.zeros(d)
    b = 0.0
    for _ in range(epochs):
        p = _sigmoid(X @ w + b)
        err = p - y
        grad_w = X.T @ err / n + l2 * w
        grad_b = float(err.mean())
        w -= lr * grad_w
        b -= lr * grad_b
    return LogRegModel(w=w, b=b, l2=l2)


def predict_logreg(model, feature):
    x = np.asarray(feature, dtype=np.float64)
    if x.shape != model.w.shape:
        raise ContractError(f"feature shape {x.shape} does not match weights {model.w.shape}")
    return float(_sigmoid(x @ model.w + model.b))


def logreg_loss(model, features, labels):
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    p = np.clip(_sigmoid(X @ model.w + model.b), 1e-12, 1 - 1e-12)
    ll = -(y * np.log(p) + (1 - y) * np.log(1 - p)).mean()
    return float(ll + 0.5 * model.l2 * (model.w @ model.w))


def features_with_discourse(sif_vector, discourse_model, sentence_token_ids, index):
    """Concatenate a sentence embedding with its discourse distribution.

    ``discourse_model`` needs a sentence_distributions(token_id_lists)
    method returning one probability row per sentence.
    """
    dists = discourse_model.sentence_distributions(sentence_token_ids)
    if not 0 <= index < len(dists):
        raise ContractError(f"sentence index {index} out of range")
    return np.concatenate([np.asarray(sif_vector, dtype=np.float64), dists[index]])


# -- end-to-end sentence-embedding claim classifier ---------------------------------


@dataclass
class SifClaimModel:
    cfg: SifConfig
    component: np.ndarray
    logreg: LogRegModel
    discourse_model: object = None


def _abstract_token_lists(abstract, vocab):
    lists = []
    for sentence in abstract.sentences:
        ids = vocab.ids(tokenize(sentence))
        lists.append(ids if ids else [Vocabulary.UNK])
    return lists


def _sif_features(model_or_cfg, abstract, component=None, discourse_model=None):
    cfg = model_or_cfg
    features = []
    token_lists = None
    if discourse_model is not None:
        token_lists = _abstract_token_lists(abstract, discourse_model.vocab)
        dists = discourse_model.sentence_distributions(token_lists)
    for i, sentence in enumerate(abstract.sentences):
        v = sif_embed(tokenize(sentence), cfg)
        if component is not None:
            v = v - component * (component @ v)
        if discourse_model is not None:
            v = np.concatenate([v, dists[i]])
        features.append(v)
    return np.asarray(features)


def train_sif_claim(train_labeled, cfg, discourse_model=None, l2=1e-3, epochs=500, lr=0.01):
    """Fit the embedding + logistic pipeline on claim-labeled abstracts.

    The principal component is estimated from the raw training sentence
    vectors (before any discourse features are appended) and reused,
    unchanged, at prediction time.
    """
    raw = []
    labels = []
    for la in train_labeled:
        for sentence, y in zip(la.abstract.sentences, la.claim_labels):
            raw.append(sif_embed(tokenize(sentence), cfg))
            labels.append(bool(y))
    component, _ = remove_first_pc(np.asarray(raw))
    features = np.concatenate([_sif_features(cfg, la.abstract, component, discourse_model)
                               for la in train_labeled])
    logreg = train_logreg(features, labels, l2=l2, epochs=epochs, lr=lr)
    return SifClaimModel(cfg=cfg, component=component, logreg=logreg,
                         discourse_model=discourse_model)


def predict_sif_claim(model, abstract):
    """Per-sentence claim probabilities and strict > 0.5 booleans."""
    features = _sif_features(model.cfg, abstract, model.component, model.discourse_model)
    probs = [predict_logreg(model.logreg, f) for f in features]
    return probs, [p > 0.5 for p in probs]
