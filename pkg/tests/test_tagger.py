import hashlib

import numpy as np
import pytest

from claimtagger.corpus import CLAIM_LABELS, Abstract, DiscourseCorpus, LabeledAbstract
from claimtagger.errors import CheckpointError, ContractError
from claimtagger.nn import Tensor, read_checkpoint
from claimtagger.tagger import (
    TaggerConfig,
    TaggerModel,
    TrainConfig,
    TransferPlan,
    build_vocab_from_abstracts,
    claim_model_from,
    encode_dataset,
    predict,
    pretrain_discourse,
    train_conclusion_as_claim,
    train_scratch,
    transfer_claim,
)
from claimtagger.text import Vocabulary

from oracles import finite_difference_grads, relative_error
from synth import make_marker_claim_corpus, make_role_discourse_corpus, rng_for

TINY = dict(embedding_dim=8, word_hidden=8, ff_hidden=8, batch_size=8)


def tiny_config(num_labels=2, **overrides):
    kwargs = dict(TINY, num_labels=num_labels, dropout=0.0, seed=5)
    kwargs.update(overrides)
    return TaggerConfig(**kwargs)


def small_vocab(tokens=("alpha", "beta", "gamma", "hallmark", ".")):
    return Vocabulary(list(tokens))


def model_checksum(params):
    h = hashlib.sha256()
    for p in sorted(params, key=lambda p: p.name):
        h.update(p.name.encode())
        h.update(p.data.tobytes())
    return h.hexdigest()


class TestEncodeAbstract:
    def test_single_sentence_shape(self):
        model = TaggerModel(small_vocab(), CLAIM_LABELS, tiny_config())
        logits = model.encode_abstract([[2, 3, 4]])
        assert logits.shape == (1, 2)

    def test_abstracts_encode_independently(self):
        model = TaggerModel(small_vocab(), CLAIM_LABELS, tiny_config())
        a = [[2, 3], [4, 2]]
        b = [[3, 3, 3]]
        before = model.encode_abstract(a).data.copy()
        model.encode_abstract(b)
        np.testing.assert_array_equal(model.encode_abstract(a).data, before)

    def test_empty_sentence_rejected(self):
        model = TaggerModel(small_vocab(), CLAIM_LABELS, tiny_config())
        with pytest.raises(ContractError):
            model.encode_abstract([[]])

    def test_out_of_range_token_rejected(self):
        model = TaggerModel(small_vocab(), CLAIM_LABELS, tiny_config())
        with pytest.raises(ContractError):
            model.encode_abstract([[999]])

    def test_logit_gradients_match_finite_differences(self):
        model = TaggerModel(small_vocab(), CLAIM_LABELS,
                            tiny_config(embedding_dim=4, word_hidden=3, ff_hidden=3))
        token_ids = [[2, 3], [4]]
        weights = np.random.default_rng(0).normal(size=(2, 2))

        def forward():
            logits = model.encode_abstract(token_ids)
            return float((logits * Tensor(weights)).sum().data)

        logits = model.encode_abstract(token_ids)
        loss = (logits * Tensor(weights)).sum()
        loss.backward()
        params = model.parameters()
        checked = [p for p in params if p.name in
                   ("embedding", "word_fwd.W", "word_bwd.U", "ff.W1", "ff.W2")]
        numeric = finite_difference_grads(forward, [p.data for p in checked])
        for p, num in zip(checked, numeric):
            analytic = p.grad if p.grad is not None else np.zeros_like(p.data)
            assert relative_error(analytic, num) < 1e-4, p.name


class TestPredictContracts:
    def test_softmax_tie_is_not_claim(self):
        config = tiny_config(use_crf=False)
        model = TaggerModel(small_vocab(), CLAIM_LABELS, config)
        # force logits to zero: zero head output layer
        model.ff_w2.data[:] = 0.0
        model.ff_b2.data[:] = 0.0
        preds = predict(model, Abstract(id="a", title="", sentences=["alpha beta ."]))
        assert preds[0].claim_prob == pytest.approx(0.5)
        assert preds[0].claim is False  # strict > 0.5

    def test_crf_booleans_equal_viterbi(self):
        model = TaggerModel(small_vocab(), CLAIM_LABELS, tiny_config(use_crf=True))
        abstract = Abstract(id="a", title="", sentences=["alpha beta .", "hallmark ."])
        token_ids = [[model.vocab.id(t) for t in ("alpha", "beta", ".")],
                     [model.vocab.id(t) for t in ("hallmark", ".")]]
        path = model.predict_label_ids(token_ids)
        preds = predict(model, abstract)
        assert [p.claim for p in preds] == [bool(y) for y in path]

    def test_probabilities_sum_to_one(self):
        model = TaggerModel(small_vocab(), CLAIM_LABELS, tiny_config(use_crf=True))
        preds = predict(model, Abstract(id="a", title="", sentences=["alpha .", "beta ."]))
        for p in preds:
            assert p.probabilities.sum() == pytest.approx(1.0, abs=1e-9)

    def test_eval_mode_deterministic_despite_dropout_config(self):
        model = TaggerModel(small_vocab(), CLAIM_LABELS, tiny_config(dropout=0.5))
        abstract = Abstract(id="a", title="", sentences=["alpha beta gamma ."])
        first = predict(model, abstract)
        second = predict(model, abstract)
        np.testing.assert_array_equal(first[0].probabilities, second[0].probabilities)

    def test_log_softmax_emission_mode(self):
        # the alternative wiring feeds normalized per-sentence scores to the CRF
        model = TaggerModel(small_vocab(), CLAIM_LABELS,
                            tiny_config(use_crf=True, emission_mode="log_softmax"))
        token_ids = [[2, 3], [4, 2]]
        dists = model.sentence_distributions(token_ids)
        np.testing.assert_allclose(dists.sum(axis=1), 1.0, atol=1e-9)
        loss = model.abstract_loss(token_ids, [0, 1])
        assert np.isfinite(loss.data)
        loss.backward()
        assert model.ff_w2.grad is not None


class TestTrainingRegimes:
    def test_separable_corpus_reaches_high_accuracy(self):
        rng = rng_for(1)
        train = make_marker_claim_corpus(24, rng)
        val = make_marker_claim_corpus(8, rng, start_id=100)
        model, log = train_scratch(train, val, tiny_config(use_crf=False),
                                   TrainConfig(lr=0.01, max_epochs=30, seed=1,
                                               early_stop_patience=30))
        assert max(entry.val_f1 for entry in log) >= 0.95

    def test_same_seed_gives_identical_loss_curves(self):
        rng = rng_for(2)
        train = make_marker_claim_corpus(8, rng)
        val = make_marker_claim_corpus(4, rng, start_id=100)
        cfg = tiny_config(dropout=0.2)
        tc = TrainConfig(lr=0.01, max_epochs=4, seed=7)
        _, log_a = train_scratch(train, val, cfg, tc)
        _, log_b = train_scratch(train, val, cfg, tc)
        assert [e.train_loss for e in log_a] == [e.train_loss for e in log_b]
        assert [e.val_loss for e in log_a] == [e.val_loss for e in log_b]

    def test_training_loss_mostly_decreases_on_separable_data(self):
        rng = rng_for(3)
        train = make_marker_claim_corpus(16, rng)
        model, log = train_scratch(train, [], tiny_config(use_crf=False),
                                   TrainConfig(lr=0.01, max_epochs=40, seed=3,
                                               early_stop_patience=40))
        losses = [e.train_loss for e in log]
        upticks = sum(1 for prev, cur in zip(losses, losses[1:]) if cur > prev)
        assert upticks <= 0.10 * len(losses)
        assert losses[-1] < losses[0] / 10

    def test_crf_transitions_learn_ordering(self):
        # canonical role order means CONCLUSIONS never precedes METHODS
        rng = rng_for(4)
        corpus = make_role_discourse_corpus(24, rng)
        val = make_role_discourse_corpus(6, rng, start_id=100)
        model, _ = pretrain_discourse(corpus.abstracts, val.abstracts,
                                      tiny_config(num_labels=5),
                                      TrainConfig(lr=0.01, max_epochs=12, seed=4),
                                      labels=corpus.labels)
        labels = list(model.labels)
        a = model.crf.transitions.data
        concl, meth, res = (labels.index("CONCLUSIONS"), labels.index("METHODS"),
                            labels.index("RESULTS"))
        assert a[concl, meth] < a[meth, res]

    def test_conclusion_as_claim_relabels_and_trains(self):
        rng = rng_for(5)
        corpus = make_role_discourse_corpus(12, rng)
        val = make_role_discourse_corpus(4, rng, start_id=50)
        model, log = train_conclusion_as_claim(corpus, val, tiny_config(),
                                               TrainConfig(lr=0.01, max_epochs=8, seed=5))
        assert model.labels == CLAIM_LABELS
        assert len(log) >= 1


class TestTransfer:
    def _pretrained(self, seed=6):
        rng = rng_for(seed)
        corpus = make_role_discourse_corpus(16, rng)
        val = make_role_discourse_corpus(4, rng, start_id=50)
        model, _ = pretrain_discourse(corpus.abstracts, val.abstracts,
                                      tiny_config(num_labels=5),
                                      TrainConfig(lr=0.01, max_epochs=5, seed=seed),
                                      labels=corpus.labels)
        return model

    def test_stage1_freezes_encoder_stage2_unfreezes(self):
        pretrained = self._pretrained()
        rng = rng_for(7)
        train = make_marker_claim_corpus(8, rng)
        val = make_marker_claim_corpus(4, rng, start_id=100)

        model = claim_model_from(pretrained)
        pre_checksum = model_checksum(model.encoder_parameters())

        from claimtagger.tagger import fit
        train_set = encode_dataset(train, model.vocab, {})
        val_set = encode_dataset(val, model.vocab, {})
        model.set_encoder_trainable(False)
        fit(model, train_set, val_set, TrainConfig(lr=0.01, max_epochs=3, seed=7), stage=1)
        assert model_checksum(model.encoder_parameters()) == pre_checksum

        model.set_encoder_trainable(True)
        fit(model, train_set, val_set, TrainConfig(lr=0.01, max_epochs=3, seed=7), stage=2)
        assert model_checksum(model.encoder_parameters()) != pre_checksum

    def test_transfer_log_records_stage_boundary(self):
        pretrained = self._pretrained()
        rng = rng_for(8)
        train = make_marker_claim_corpus(8, rng)
        val = make_marker_claim_corpus(4, rng, start_id=100)
        plan = TransferPlan(stage1=TrainConfig(lr=0.01, max_epochs=3, seed=8),
                            stage2=TrainConfig(lr=0.005, max_epochs=3, seed=8))
        model, log = transfer_claim(pretrained, train, val, plan)
        stages = [e.stage for e in log]
        assert set(stages) == {1, 2}
        assert stages == sorted(stages)
        epochs = [e.epoch for e in log]
        assert epochs == sorted(epochs)
        assert len(set(epochs)) == len(epochs)

    def test_head_is_fresh_and_binary(self):
        pretrained = self._pretrained()
        model = claim_model_from(pretrained)
        assert model.config.num_labels == 2
        assert model.labels == CLAIM_LABELS
        assert model.crf.num_labels == 2
        for src, dst in zip(pretrained.encoder_parameters(), model.encoder_parameters()):
            np.testing.assert_array_equal(src.data, dst.data)


class TestCheckpointing:
    def test_save_load_round_trip(self, tmp_path):
        model = TaggerModel(small_vocab(), CLAIM_LABELS, tiny_config())
        path = tmp_path / "model.ckpt"
        model.save(path)
        restored = TaggerModel.load(path)
        assert restored.labels == model.labels
        assert restored.config == model.config
        assert len(restored.vocab) == len(model.vocab)
        for a, b in zip(model.parameters(), restored.parameters()):
            assert a.data.tobytes() == b.data.tobytes()
        abstract = Abstract(id="a", title="", sentences=["alpha hallmark ."])
        np.testing.assert_array_equal(predict(model, abstract)[0].probabilities,
                                      predict(restored, abstract)[0].probabilities)

    def test_encoder_restore_excludes_head(self, tmp_path):
        discourse = TaggerModel(small_vocab(), ["A", "B", "C", "D", "E"],
                                tiny_config(num_labels=5))
        path = tmp_path / "disc.ckpt"
        discourse.save(path)
        tensors, _ = read_checkpoint(path)

        claim = TaggerModel(small_vocab(), CLAIM_LABELS, tiny_config())
        head_before = model_checksum(claim.head_parameters())
        claim.load_encoder_from(tensors)
        assert model_checksum(claim.head_parameters()) == head_before
        for p in claim.encoder_parameters():
            np.testing.assert_array_equal(p.data, tensors[p.name])

    def test_hidden_dim_mismatch_names_tensor(self, tmp_path):
        model = TaggerModel(small_vocab(), CLAIM_LABELS, tiny_config(word_hidden=8))
        path = tmp_path / "m.ckpt"
        model.save(path)
        tensors, _ = read_checkpoint(path)
        other = TaggerModel(small_vocab(), CLAIM_LABELS, tiny_config(word_hidden=16))
        with pytest.raises(CheckpointError) as excinfo:
            other.load_state_arrays(tensors)
        assert "word_fwd.W" in str(excinfo.value) or "shape" in str(excinfo.value)
