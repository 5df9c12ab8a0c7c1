"""Hierarchical sentence tagger and its training regimes.

Words are embedded and encoded by a word-level Bi-LSTM; each sentence is
pooled to one vector, pushed through a small feedforward head to per-label
logits, and the sentence sequence is decoded either independently
(softmax) or jointly (linear-chain CRF).  Training regimes: discourse
pretraining, from-scratch claim training, conclusion-as-claim weak
labeling, and two-stage transfer (train a fresh head on a frozen encoder,
then unfreeze everything and fine-tune).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import crf as crf_mod
from .corpus import CLAIM_LABELS, relabel_conclusion_as_claim
from .errors import CheckpointError, ContractError
from .nn.autograd import (
    Parameter,
    Tensor,
    concat,
    dropout,
    embedding_lookup,
    log_softmax,
    matmul,
    mean_of,
    narrow,
    softmax_cross_entropy,
    softmax_probs,
    stack_rows,
    tanh,
    xavier_uniform,
)
from .nn.checkpoint import load_parameters, read_checkpoint, write_checkpoint
from .nn.lstm import bilstm_encode, init_lstm_cell
from .nn.optim import Adam, PlateauScheduler, clip_global_norm
from .text import Vocabulary, tokenize

ENCODER_PREFIXES = ("embedding", "word_fwd.", "word_bwd.")


@dataclass
class TaggerConfig:
    num_labels: int
    embedding_dim: int = 300
    word_hidden: int = 128
    ff_hidden: int = 128
    use_crf: bool = True
    dropout: float = 0.25
    batch_size: int = 64
    pool: str = "final"            # "final" or "mean" over word states
    emission_mode: str = "logits"  # "logits" or "log_softmax" fed to the CRF
    learn_crf_boundaries: bool = True
    seed: int = 13

    def __post_init__(self):
        if self.num_labels < 2:
            raise ContractError("need at least two labels")
        if min(self.embedding_dim, self.word_hidden, self.ff_hidden, self.batch_size) < 1:
            raise ContractError("dimensions and batch size must be positive")
        if self.pool not in ("final", "mean"):
            raise ContractError(f"unknown pool mode {self.pool!r}")
        if self.emission_mode not in ("logits", "log_softmax"):
            raise ContractError(f"unknown emission mode {self.emission_mode!r}")


@dataclass
class TrainConfig:
    lr: float = 0.001
    scheduler_factor: float = 0.5
    scheduler_patience: int = 2
    scheduler_tol: float = 1e-4
    min_lr: float = 1e-6
    max_epochs: int = 30
    early_stop_patience: int = 5
    clip_norm: float = 5.0
    seed: int = 13

    def __post_init__(self):
        if self.lr <= 0 or self.max_epochs < 1:
            raise ContractError("lr must be positive and max_epochs >= 1")


@dataclass
class TransferPlan:
    """Two fixed stages: frozen-encoder head training, then full fine-tuning."""

    stage1: TrainConfig = field(default_factory=TrainConfig)
    stage2: TrainConfig = field(default_factory=TrainConfig)
    embeddings_trainable_stage2: bool = True


class TaggerModel:
    """Bi-LSTM sentence tagger with an optional CRF over the sentence sequence."""

    def __init__(self, vocab, labels, config, embedding_matrix=None):
        if len(labels) != config.num_labels:
            raise ContractError(f"{len(labels)} labels for num_labels={config.num_labels}")
        self.vocab = vocab
        self.labels = tuple(str(l) for l in labels)
        self.config = config
        rng = np.random.default_rng(config.seed)
        if embedding_matrix is not None:
            matrix = np.asarray(embedding_matrix, dtype=np.float64)
            if matrix.shape != (len(vocab), config.embedding_dim):
                raise ContractError(
                    f"embedding matrix shape {matrix.shape} does not match "
                    f"({len(vocab)}, {config.embedding_dim})")
            matrix = matrix.copy()
        else:
            matrix = rng.uniform(-0.05, 0.05, size=(len(vocab), config.embedding_dim))
            matrix[Vocabulary.PAD] = 0.0
        self.embedding = Parameter(matrix, "embedding")
        self.word_fwd = init_lstm_cell(config.embedding_dim, config.word_hidden, "word_fwd", rng)
        self.word_bwd = init_lstm_cell(config.embedding_dim, config.word_hidden, "word_bwd", rng)
        sentence_dim = 2 * config.word_hidden
        self.ff_w1 = Parameter(xavier_uniform((config.ff_hidden, sentence_dim), rng), "ff.W1")
        self.ff_b1 = Parameter(np.zeros(config.ff_hidden), "ff.b1")
        self.ff_w2 = Parameter(xavier_uniform((config.num_labels, config.ff_hidden), rng), "ff.W2")
        self.ff_b2 = Parameter(np.zeros(config.num_labels), "ff.b2")
        self.crf = (crf_mod.CrfParams.create(config.num_labels, "crf",
                                             config.learn_crf_boundaries)
                    if config.use_crf else None)

    # -- parameter bookkeeping -------------------------------------------------

    def parameters(self):
        params = [self.embedding]
        params += self.word_fwd.parameters() + self.word_bwd.parameters()
        params += [self.ff_w1, self.ff_b1, self.ff_w2, self.ff_b2]
        if self.crf is not None:
            params += self.crf.parameters()
        return params

    def encoder_parameters(self):
        return [p for p in self.parameters()
                if p.name == "embedding" or p.name.startswith(("word_fwd.", "word_bwd."))]

    def head_parameters(self):
        return [p for p in self.parameters()
                if p.name.startswith(("ff.", "crf."))]

    def set_encoder_trainable(self, flag, embeddings=None):
        """Freeze or unfreeze the encoder; embeddings may be set separately."""
        for p in self.encoder_parameters():
            if p.name == "embedding" and embeddings is not None:
                p.trainable = embeddings
            else:
                p.trainable = flag

    def state_arrays(self):
        return {p.name: p.data.copy() for p in self.parameters()}

    def load_state_arrays(self, arrays):
        load_parameters(self.parameters(), arrays)

    # -- forward passes ----------------------------------------------------------

    def encode_abstract(self, sentence_token_ids, train=False, rng=None):
        """Per-sentence logits (T x K) for one abstract's token id lists."""
        if not sentence_token_ids:
            raise ContractError("abstract has no sentences")
        rows = []
        for ids in sentence_token_ids:
            if not ids:
                raise ContractError("empty sentence; map it to a single UNK id upstream")
            vectors = embedding_lookup(self.embedding, ids)
            inputs = [narrow(vectors, t, 1) for t in range(len(ids))]
            inputs = [_flatten_row(v) for v in inputs]
            states, h_fwd, h_bwd = bilstm_encode(inputs, self.word_fwd, self.word_bwd)
            if self.config.pool == "final":
                sentence = concat([h_fwd, h_bwd])
            else:
                sentence = mean_of(states)
            if train and self.config.dropout > 0:
                if rng is None:
                    raise ContractError("training forward pass needs an rng for dropout")
                sentence = dropout(sentence, self.config.dropout, rng)
            hidden = tanh(matmul(self.ff_w1, sentence) + self.ff_b1)
            logits = matmul(self.ff_w2, hidden) + self.ff_b2
            rows.append(logits)
        return stack_rows(rows)

    def _emissions(self, logits):
        if self.config.use_crf and self.config.emission_mode == "log_softmax":
            return log_softmax(logits)
        return logits

    def abstract_loss(self, sentence_token_ids, label_ids, train=False, rng=None):
        logits = self.encode_abstract(sentence_token_ids, train=train, rng=rng)
        if self.config.use_crf:
            return crf_mod.crf_nll(self._emissions(logits), label_ids, self.crf)
        losses = [softmax_cross_entropy(_flatten_row(narrow(logits, t, 1)), y)
                  for t, y in enumerate(label_ids)]
        total = losses[0]
        for extra in losses[1:]:
            total = total + extra
        return total

    def sentence_distributions(self, sentence_token_ids):
        """T x K per-sentence label probabilities (eval mode, no graph kept)."""
        logits = self.encode_abstract(sentence_token_ids, train=False)
        if self.config.use_crf:
            return crf_mod.marginals(self._emissions(logits).data, self.crf)
        return np.stack([softmax_probs(row) for row in logits.data])

    def predict_label_ids(self, sentence_token_ids):
        """Viterbi path under the CRF, otherwise per-sentence argmax."""
        logits = self.encode_abstract(sentence_token_ids, train=False)
        if self.config.use_crf:
            path, _ = crf_mod.viterbi_decode(self._emissions(logits).data, self.crf)
            return path
        return [int(np.argmax(row)) for row in logits.data]

    # -- persistence ------------------------------------------------------------

    def save(self, path):
        metadata = {
            "kind": "tagger",
            "labels": list(self.labels),
            "vocab_tokens": self.vocab.tokens,
            "config": {
                "num_labels": self.config.num_labels,
                "embedding_dim": self.config.embedding_dim,
                "word_hidden": self.config.word_hidden,
                "ff_hidden": self.config.ff_hidden,
                "use_crf": self.config.use_crf,
                "dropout": self.config.dropout,
                "batch_size": self.config.batch_size,
                "pool": self.config.pool,
                "emission_mode": self.config.emission_mode,
                "learn_crf_boundaries": self.config.learn_crf_boundaries,
                "seed": self.config.seed,
            },
        }
        write_checkpoint(path, self.state_arrays(), metadata)

    @classmethod
    def load(cls, path):
        tensors, metadata = read_checkpoint(path)
        if metadata.get("kind") != "tagger":
            raise CheckpointError(f"checkpoint kind {metadata.get('kind')!r} is not a tagger")
        config = TaggerConfig(**metadata["config"])
        vocab = Vocabulary(metadata["vocab_tokens"])
        model = cls(vocab, metadata["labels"], config)
        model.load_state_arrays(tensors)
        return model

    def load_encoder_from(self, tensors):
        """Restore encoder tensors from another model's checkpoint, head excluded."""
        head_names = {p.name for p in self.head_parameters()}
        encoder_tensors = {name: arr for name, arr in tensors.items()
                           if name.startswith(ENCODER_PREFIXES)}
        load_parameters(self.parameters(), encoder_tensors, skip=head_names)


def _flatten_row(t):
    """(1, D) -> (D,); narrow keeps 2-D shape but the cells want vectors."""
    out = Tensor(t.data.reshape(-1))
    out.requires_grad = t.requires_grad
    if out.requires_grad:
        out._parents = (t,)
        out._backward = lambda g: t._accumulate(g.reshape(t.data.shape))
    return out


# -- dataset encoding -------------------------------------------------------------


@dataclass
class EncodedAbstract:
    abstract_id: str
    token_ids: list[list[int]]
    label_ids: list[int]


def build_vocab_from_abstracts(labeled, min_count=1):
    return Vocabulary.build((tokenize(s) for la in labeled for s in la.abstract.sentences),
                            min_count=min_count)


def encode_dataset(labeled, vocab, label_index):
    """Tokenize sentences to id lists; empty sentences become a single UNK."""
    out = []
    for la in labeled:
        token_ids = []
        for sentence in la.abstract.sentences:
            ids = vocab.ids(tokenize(sentence))
            token_ids.append(ids if ids else [Vocabulary.UNK])
        if la.claim_labels is not None:
            label_ids = [int(v) for v in la.claim_labels]
        else:
            try:
                label_ids = [label_index[l] for l in la.discourse_labels]
            except KeyError as exc:
                raise ContractError(f"label {exc.args[0]!r} missing from label vocabulary") from exc
        out.append(EncodedAbstract(la.abstract.id, token_ids, label_ids))
    return out


# -- training loops ---------------------------------------------------------------


@dataclass
class EpochLog:
    epoch: int
    stage: int
    lr: float
    train_loss: float
    val_loss: float
    val_f1: float


def _claim_f1(model, dataset):
    tp = fp = fn = 0
    for item in dataset:
        pred = model.predict_label_ids(item.token_ids)
        for p, g in zip(pred, item.label_ids):
            if p == 1 and g == 1:
                tp += 1
            elif p == 1:
                fp += 1
            elif g == 1:
                fn += 1
    denom = 2 * tp + fp + fn
    return (2 * tp / denom) if denom else 0.0


def _accuracy(model, dataset):
    hit = total = 0
    for item in dataset:
        pred = model.predict_label_ids(item.token_ids)
        hit += sum(1 for p, g in zip(pred, item.label_ids) if p == g)
        total += len(item.label_ids)
    return hit / total if total else 0.0


def _val_quality(model, dataset):
    if model.config.num_labels == 2 and model.labels == CLAIM_LABELS:
        return _claim_f1(model, dataset)
    return _accuracy(model, dataset)


def _mean_loss(model, dataset):
    losses = [float(model.abstract_loss(it.token_ids, it.label_ids).data) for it in dataset]
    return float(np.mean(losses)) if losses else math.nan


def fit(model, train_set, val_set, train_config, stage=0, log=None, epoch_offset=0):
    """Train in place; keeps and restores the best-validation-loss weights.

    Returns the log (one entry per epoch).  Early stopping fires after
    ``early_stop_patience`` epochs without a val-loss improvement.
    """
    if not train_set:
        raise ContractError("training set is empty")
    log = log if log is not None else []
    rng = np.random.default_rng(train_config.seed)
    optimizer = Adam(model.parameters(), lr=train_config.lr)
    scheduler = PlateauScheduler(train_config.lr,
                                 factor=train_config.scheduler_factor,
                                 patience=train_config.scheduler_patience,
                                 tol=train_config.scheduler_tol,
                                 min_lr=train_config.min_lr)
    best_val = math.inf
    best_state = model.state_arrays()
    stale = 0
    order = list(range(len(train_set)))
    for epoch in range(1, train_config.max_epochs + 1):
        rng.shuffle(order)
        epoch_losses = []
        for batch_start in range(0, len(order), model.config.batch_size):
            batch = [train_set[i] for i in order[batch_start:batch_start + model.config.batch_size]]
            optimizer.zero_grad()
            losses = [model.abstract_loss(it.token_ids, it.label_ids, train=True, rng=rng)
                      for it in batch]
            loss = mean_of(losses)
            loss.backward()
            clip_global_norm(model.parameters(), train_config.clip_norm)
            optimizer.step()
            epoch_losses.append(float(loss.data))
        train_loss = float(np.mean(epoch_losses))
        val_loss = _mean_loss(model, val_set) if val_set else train_loss
        val_f1 = _val_quality(model, val_set) if val_set else _val_quality(model, train_set)
        optimizer.lr = scheduler.observe(val_loss)
        log.append(EpochLog(epoch=epoch_offset + epoch, stage=stage, lr=optimizer.lr,
                            train_loss=train_loss, val_loss=val_loss, val_f1=val_f1))
        if val_loss < best_val - train_config.scheduler_tol:
            best_val = val_loss
            best_state = model.state_arrays()
            stale = 0
        else:
            stale += 1
            if stale > train_config.early_stop_patience:
                break
    model.load_state_arrays(best_state)
    return log


def pretrain_discourse(train, val, config=None, train_config=None, vocab=None,
                       embedding_matrix=None, labels=None):
    """Train a discourse tagger from labeled abstracts; returns (model, log)."""
    if not train:
        raise ContractError("empty discourse corpus")
    train_config = train_config or TrainConfig()
    if labels is None:
        labels = tuple(sorted({l for la in train for l in la.discourse_labels}))
    if config is None:
        config = TaggerConfig(num_labels=len(labels))
    elif config.num_labels != len(labels):
        raise ContractError(f"config expects {config.num_labels} labels, data has {len(labels)}")
    vocab = vocab or build_vocab_from_abstracts(train)
    label_index = {l: i for i, l in enumerate(labels)}
    model = TaggerModel(vocab, labels, config, embedding_matrix=embedding_matrix)
    train_set = encode_dataset(train, vocab, label_index)
    val_set = encode_dataset(val, vocab, label_index)
    log = fit(model, train_set, val_set, train_config)
    return model, log


def train_scratch(train, val, config=None, train_config=None, vocab=None,
                  embedding_matrix=None):
    """Train a binary claim tagger with no pretraining."""
    if not train:
        raise ContractError("empty claim corpus")
    train_config = train_config or TrainConfig()
    config = config or TaggerConfig(num_labels=2)
    if config.num_labels != 2:
        raise ContractError("claim tagging is binary")
    vocab = vocab or build_vocab_from_abstracts(train)
    model = TaggerModel(vocab, CLAIM_LABELS, config, embedding_matrix=embedding_matrix)
    train_set = encode_dataset(train, vocab, {})
    val_set = encode_dataset(val, vocab, {})
    log = fit(model, train_set, val_set, train_config)
    return model, log


def train_conclusion_as_claim(discourse_corpus, val_corpus=None, config=None,
                              train_config=None, conclusion_label=None):
    """Weak supervision: conclusions relabeled as claims, then binary training."""
    train = relabel_conclusion_as_claim(discourse_corpus, conclusion_label)
    if val_corpus is not None:
        val_labeled = relabel_conclusion_as_claim(val_corpus, conclusion_label)
    else:
        val_labeled = []
    return train_scratch(train, val_labeled, config=config, train_config=train_config)


def claim_model_from(pretrained):
    """Clone a pretrained model's encoder into a fresh binary claim tagger.

    The feedforward head and CRF are newly initialized at K=2; vocabulary,
    embeddings, and both LSTM directions are copied.
    """
    config = replace(pretrained.config, num_labels=2)
    model = TaggerModel(pretrained.vocab, CLAIM_LABELS, config)
    for src, dst in zip(pretrained.encoder_parameters(), model.encoder_parameters()):
        if src.name != dst.name:
            raise ContractError(f"encoder mismatch: {src.name} vs {dst.name}")
        dst.data = src.data.copy()
    return model


def transfer_claim(pretrained, train, val, plan=None):
    """Two-stage transfer to claim tagging; returns (model, log).

    Stage 1 freezes the copied encoder and trains the new head to its best
    validation loss; stage 2 unfreezes everything and fine-tunes.  The log
    keeps per-epoch entries with the stage number, so the boundary is the
    last stage-1 epoch.
    """
    plan = plan or TransferPlan()
    model = claim_model_from(pretrained)
    label_index = {}
    train_set = encode_dataset(train, model.vocab, label_index)
    val_set = encode_dataset(val, model.vocab, label_index)

    model.set_encoder_trainable(False)
    log = fit(model, train_set, val_set, plan.stage1, stage=1)

    model.set_encoder_trainable(True, embeddings=plan.embeddings_trainable_stage2)
    fit(model, train_set, val_set, plan.stage2, stage=2, log=log,
        epoch_offset=log[-1].epoch if log else 0)
    return model, log


# -- prediction -------------------------------------------------------------------


@dataclass
class SentencePrediction:
    index: int
    text: str
    probabilities: np.ndarray
    label: str
    claim: bool | None
    claim_prob: float | None


def predict(model, abstract):
    """Per-sentence predictions for one abstract (eval mode).

    Binary claim models report claim booleans from the Viterbi path (CRF)
    or a strict p > 0.5 threshold (softmax); other models report the
    decoded label with claim fields left as None.
    """
    token_ids = []
    for sentence in abstract.sentences:
        ids = model.vocab.ids(tokenize(sentence))
        token_ids.append(ids if ids else [Vocabulary.UNK])
    dists = model.sentence_distributions(token_ids)
    label_ids = model.predict_label_ids(token_ids)
    is_claim_model = model.labels == CLAIM_LABELS
    out = []
    for i, sentence in enumerate(abstract.sentences):
        claim = None
        claim_prob = None
        if is_claim_model:
            claim_prob = float(dists[i, 1])
            claim = bool(label_ids[i] == 1) if model.config.use_crf else claim_prob > 0.5
        out.append(SentencePrediction(index=i, text=sentence,
                                      probabilities=dists[i],
                                      label=model.labels[label_ids[i]],
                                      claim=claim, claim_prob=claim_prob))
    return out
