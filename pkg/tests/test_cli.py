import json

import pytest

from claimtagger import cli
from claimtagger.corpus import (
    Abstract,
    AnnotationRecord,
    ClaimDocument,
    serialize_claim_corpus,
)

from synth import make_marker_claim_corpus, rng_for


@pytest.fixture()
def claim_corpus_file(tmp_path):
    rng = rng_for(21)
    labeled = make_marker_claim_corpus(12, rng)
    docs = []
    for la in labeled:
        annotations = [AnnotationRecord(abstract_id=la.abstract.id, annotator_id=a,
                                        labels=la.claim_labels, timestamp="t0")
                       for a in ("x", "y", "z")]
        docs.append(ClaimDocument(abstract=la.abstract, annotations=annotations,
                                  gold_labels=None))
    path = tmp_path / "claims.jsonl"
    path.write_text(serialize_claim_corpus(docs), encoding="utf-8")
    return path


def test_unknown_flag_exits_2(capsys):
    assert cli.run(["eval", "--frobnicate"]) == 2
    assert "usage" in capsys.readouterr().err


def test_missing_subcommand_exits_2():
    assert cli.run([]) == 2


def test_predict_happy_path(tmp_path, toy_claim_checkpoint):
    text_file = tmp_path / "abs.txt"
    text_file.write_text("alpha beta gamma. delta hallmark epsilon.", encoding="utf-8")
    out = tmp_path / "preds.jsonl"
    rc = cli.run(["predict", "--checkpoint", str(toy_claim_checkpoint),
                  "--text-file", str(text_file), "--out", str(out)])
    assert rc == 0
    records = [json.loads(line) for line in out.read_text().splitlines()]
    assert len(records) == 2
    assert records[0]["abstract_id"] == "abs"
    assert {"abstract_id", "index", "text", "claim_prob", "claim", "discourse_dist"} \
        <= set(records[0])
    assert records[1]["claim"] is True
    assert (tmp_path / "preds.jsonl.manifest.json").exists()


def test_predict_missing_checkpoint_fails_cleanly(tmp_path):
    text_file = tmp_path / "abs.txt"
    text_file.write_text("Some text.", encoding="utf-8")
    rc = cli.run(["predict", "--checkpoint", str(tmp_path / "nope.ckpt"),
                  "--text-file", str(text_file)])
    assert rc == 1


def test_eval_last_sentence_deterministic(tmp_path, claim_corpus_file):
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    corpus_bytes = claim_corpus_file.read_bytes()
    for out in (out_a, out_b):
        rc = cli.run(["eval", "--model", "last-sentence", "--corpus", str(claim_corpus_file),
                      "--split", "test", "--seed", "7", "--out", str(out)])
        assert rc == 0
    assert (out_a / "report.txt").read_bytes() == (out_b / "report.txt").read_bytes()
    assert (out_a / "report.jsonl").read_bytes() == (out_b / "report.jsonl").read_bytes()
    manifest = json.loads((out_a / "manifest.json").read_text())
    assert manifest["command"] == "eval"
    assert manifest["seed"] == 7
    assert manifest["inputs"]
    assert claim_corpus_file.read_bytes() == corpus_bytes  # inputs never mutated


def test_eval_rule_based_runs(tmp_path, claim_corpus_file):
    rc = cli.run(["eval", "--model", "rule-based", "--corpus", str(claim_corpus_file),
                  "--split", "val", "--out", str(tmp_path / "r")])
    assert rc == 0
    report = (tmp_path / "r" / "report.txt").read_text()
    assert "rule-based" in report


def test_eval_checkpoint_model(tmp_path, claim_corpus_file, toy_claim_checkpoint):
    rc = cli.run(["eval", "--model", "checkpoint", "--checkpoint", str(toy_claim_checkpoint),
                  "--corpus", str(claim_corpus_file), "--split", "test",
                  "--out", str(tmp_path / "c")])
    assert rc == 0
    lines = (tmp_path / "c" / "report.jsonl").read_text().splitlines()
    row = json.loads(lines[1])
    assert row["f1"] >= 0.9  # same marker rule the toy model was trained on


def test_eval_sif_requires_embeddings(claim_corpus_file):
    rc = cli.run(["eval", "--model", "sif", "--corpus", str(claim_corpus_file)])
    assert rc == 1


def test_stats_prints_counts(claim_corpus_file, capsys):
    rc = cli.run(["stats", "--corpus", str(claim_corpus_file)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "abstracts:" in out
    assert "12" in out
    assert "last-sentence claims:" in out


def test_stats_empty_corpus(tmp_path, capsys):
    empty = tmp_path / "empty.jsonl"
    empty.write_text("", encoding="utf-8")
    rc = cli.run(["stats", "--corpus", str(empty)])
    assert rc == 0
    assert "abstracts:             0" in capsys.readouterr().out


def test_vote_writes_gold(tmp_path, claim_corpus_file):
    out = tmp_path / "gold.jsonl"
    rc = cli.run(["vote", "--corpus", str(claim_corpus_file), "--out", str(out)])
    assert rc == 0
    from claimtagger.corpus import majority_vote, parse_claim_corpus

    docs = parse_claim_corpus(out)
    assert all(d.gold_labels == majority_vote(d.annotations) for d in docs)


def test_transfer_requires_pretrained(claim_corpus_file, tmp_path, capsys):
    rc = cli.run(["transfer", "--corpus", str(claim_corpus_file),
                  "--out", str(tmp_path / "t")])
    assert rc == 2
    assert "--pretrained" in capsys.readouterr().err


def test_train_and_eval_round_trip(tmp_path, claim_corpus_file):
    out = tmp_path / "run"
    rc = cli.run(["train", "--corpus", str(claim_corpus_file), "--out", str(out),
                  "--embedding-dim", "8", "--word-hidden", "8", "--ff-hidden", "8",
                  "--batch-size", "8", "--dropout", "0.0",
                  "--lr", "0.01", "--epochs", "3", "--seed", "3"])
    assert rc == 0
    assert (out / "model.ckpt").exists()
    log_lines = (out / "training_log.jsonl").read_text().splitlines()
    entry = json.loads(log_lines[0])
    assert {"epoch", "stage", "lr", "train_loss", "val_loss", "val_f1"} == set(entry)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "train"
