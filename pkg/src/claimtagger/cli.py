"""Command-line entry point.

Subcommands: pretrain, transfer, train, eval, predict, serve, stats, vote.
Every run that writes artifacts also writes a manifest (command, config,
seed, input hashes) so outputs can be reproduced byte for byte.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from pathlib import Path


from . import baselines, corpus, metrics, tagger, text
from .errors import ClaimTaggerError

logger = logging.getLogger("claimtagger")


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _manifest(args, input_paths):
    config = {k: v for k, v in vars(args).items()
              if k != "func" and not isinstance(v, (type(None),))}
    config = {k: (str(v) if isinstance(v, Path) else v) for k, v in config.items()}
    return {
        "command": args.command,
        "config": config,
        "seed": getattr(args, "seed", None),
        "inputs": {str(p): _sha256(p) for p in input_paths if p and Path(p).exists()},
    }


def _emit_manifest(manifest, out_dir=None, out_file=None):
    blob = json.dumps(manifest, sort_keys=True, indent=2) + "\n"
    if out_dir is not None:
        Path(out_dir, "manifest.json").write_text(blob, encoding="utf-8")
    elif out_file is not None:
        Path(str(out_file) + ".manifest.json").write_text(blob, encoding="utf-8")
    logger.info("manifest %s", json.dumps(manifest, sort_keys=True))


def _add_model_options(p):
    p.add_argument("--embedding-dim", type=int, default=300)
    p.add_argument("--word-hidden", type=int, default=128)
    p.add_argument("--ff-hidden", type=int, default=128)
    p.add_argument("--dropout", type=float, default=0.25)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--no-crf", action="store_true", help="per-sentence softmax instead of a CRF")
    p.add_argument("--pool", choices=["final", "mean"], default="final")
    p.add_argument("--min-count", type=int, default=1, help="vocabulary frequency threshold")


def _add_train_options(p):
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--patience", type=int, default=5, help="early-stop patience (epochs)")
    p.add_argument("--seed", type=int, default=13)


def _tagger_config(args, num_labels):
    return tagger.TaggerConfig(
        num_labels=num_labels,
        embedding_dim=args.embedding_dim,
        word_hidden=args.word_hidden,
        ff_hidden=args.ff_hidden,
        use_crf=not args.no_crf,
        dropout=args.dropout,
        batch_size=args.batch_size,
        pool=args.pool,
        seed=args.seed,
    )


def _train_config(args, lr=None):
    return tagger.TrainConfig(
        lr=lr if lr is not None else args.lr,
        max_epochs=args.epochs,
        early_stop_patience=args.patience,
        seed=args.seed,
    )


def _write_training_outputs(out_dir, model, log, manifest):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model.save(out_dir / "model.ckpt")
    with open(out_dir / "training_log.jsonl", "w", encoding="utf-8") as fh:
        for entry in log:
            fh.write(json.dumps({
                "epoch": entry.epoch, "stage": entry.stage, "lr": entry.lr,
                "train_loss": entry.train_loss, "val_loss": entry.val_loss,
                "val_f1": entry.val_f1,
            }, sort_keys=True) + "\n")
    _emit_manifest(manifest, out_dir=out_dir)
    logger.info("wrote %s", out_dir / "model.ckpt")


def _load_embedding_matrix(args, vocab):
    if getattr(args, "embeddings", None):
        table = text.load_embeddings(args.embeddings, vocab, seed=args.seed)
        if table.dim != args.embedding_dim:
            raise ClaimTaggerError(
                f"embedding file has dim {table.dim}, expected {args.embedding_dim} "
                "(set --embedding-dim to match)")
        logger.info("embedding coverage %.1f%%", 100 * table.coverage)
        return table.matrix
    return None


def cmd_pretrain(args):
    disc = corpus.parse_discourse_corpus(args.corpus)
    if not disc.abstracts:
        raise ClaimTaggerError("discourse corpus is empty")
    spec = corpus.SplitSpec(seed=args.seed)
    train, val, _ = corpus.make_splits(disc.abstracts, spec)
    vocab = tagger.build_vocab_from_abstracts(train, min_count=args.min_count)
    config = _tagger_config(args, num_labels=len(disc.labels))
    model, log = tagger.pretrain_discourse(
        train, val, config, _train_config(args), vocab=vocab,
        embedding_matrix=_load_embedding_matrix(args, vocab), labels=disc.labels)
    _write_training_outputs(args.out, model, log,
                            _manifest(args, [args.corpus, getattr(args, "embeddings", None)]))
    return 0


def cmd_transfer(args):
    pretrained = tagger.TaggerModel.load(args.pretrained)
    docs = corpus.parse_claim_corpus(args.corpus)
    labeled = corpus.attach_gold(docs)
    train, val, _ = corpus.make_splits(labeled, corpus.SplitSpec(seed=args.seed))
    plan = tagger.TransferPlan(
        stage1=_train_config(args, lr=args.lr),
        stage2=_train_config(args, lr=args.stage2_lr if args.stage2_lr else args.lr),
    )
    model, log = tagger.transfer_claim(pretrained, train, val, plan)
    _write_training_outputs(args.out, model, log,
                            _manifest(args, [args.corpus, args.pretrained]))
    return 0


def cmd_train(args):
    if args.mode == "conclusion":
        disc = corpus.parse_discourse_corpus(args.corpus)
        train_corpus, val_corpus, _ = corpus.make_splits(disc.abstracts,
                                                         corpus.SplitSpec(seed=args.seed))
        train_disc = corpus.DiscourseCorpus(train_corpus, disc.labels)
        val_disc = corpus.DiscourseCorpus(val_corpus, disc.labels)
        model, log = tagger.train_conclusion_as_claim(
            train_disc, val_disc, _tagger_config(args, 2), _train_config(args))
    else:
        docs = corpus.parse_claim_corpus(args.corpus)
        labeled = corpus.attach_gold(docs)
        train, val, _ = corpus.make_splits(labeled, corpus.SplitSpec(seed=args.seed))
        vocab = tagger.build_vocab_from_abstracts(train, min_count=args.min_count)
        model, log = tagger.train_scratch(
            train, val, _tagger_config(args, 2), _train_config(args), vocab=vocab,
            embedding_matrix=_load_embedding_matrix(args, vocab))
    _write_training_outputs(args.out, model, log, _manifest(args, [args.corpus]))
    return 0


def _baseline_predict_fn(args, train_labeled):
    """Build the evaluation predictor for the requested model name."""
    name = args.model
    if name == "last-sentence":
        return baselines.last_sentence_baseline, "last-sentence"
    if name == "rule-based":
        rules = baselines.load_rules(args.rules)
        return (lambda a: [baselines.rule_based_extract(text.tokenize(s), rules)
                           for s in a.sentences]), "rule-based"
    if name in ("sif", "sif-discourse"):
        if not args.embeddings:
            raise ClaimTaggerError(f"--embeddings is required for model {name!r}")
        vocab = tagger.build_vocab_from_abstracts(train_labeled)
        if args.frequencies:
            vocab = text.Vocabulary(vocab.tokens, text.load_frequency_file(args.frequencies))
        table = text.load_embeddings(args.embeddings, vocab, seed=args.seed)
        cfg = baselines.SifConfig(embeddings=table, vocab=vocab)
        discourse_model = None
        if name == "sif-discourse":
            if not args.discourse_checkpoint:
                raise ClaimTaggerError("--discourse-checkpoint is required for sif-discourse")
            discourse_model = tagger.TaggerModel.load(args.discourse_checkpoint)
        sif_model = baselines.train_sif_claim(train_labeled, cfg,
                                              discourse_model=discourse_model)
        return (lambda a: baselines.predict_sif_claim(sif_model, a)[1]), name
    if name == "checkpoint":
        if not args.checkpoint:
            raise ClaimTaggerError("--checkpoint is required for model 'checkpoint'")
        model = tagger.TaggerModel.load(args.checkpoint)
        return (lambda a: [bool(p.claim) for p in tagger.predict(model, a)]), \
            Path(args.checkpoint).stem
    raise ClaimTaggerError(f"unknown model {name!r}")


def cmd_eval(args):
    docs = corpus.parse_claim_corpus(args.corpus)
    labeled = corpus.attach_gold(docs)
    train, val, test = corpus.make_splits(labeled, corpus.SplitSpec(seed=args.seed))
    split = {"train": train, "val": val, "validation": val, "test": test}[args.split]
    predict_fn, model_name = _baseline_predict_fn(args, train)
    report = metrics.evaluate_model(predict_fn, split)
    config_hash = hashlib.sha256(
        json.dumps({"model": args.model, "seed": args.seed, "split": args.split},
                   sort_keys=True).encode()).hexdigest()[:12]
    comparison = metrics.build_comparison(
        [metrics.ComparisonRow(model=model_name, split=args.split,
                               precision=report.metrics.precision,
                               recall=report.metrics.recall,
                               f1=report.metrics.f1)],
        seed=args.seed, dataset_hash=_sha256(args.corpus)[:12], config_hash=config_hash)
    text_report = comparison.render_text() + (
        f"exact-match abstracts: {report.exact_match_fraction:.3f} "
        f"({report.n_abstracts} abstracts)\n")
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.txt").write_text(text_report, encoding="utf-8")
        (out_dir / "report.jsonl").write_text(comparison.render_jsonl(), encoding="utf-8")
        _emit_manifest(_manifest(args, [args.corpus]), out_dir=out_dir)
    sys.stdout.write(text_report)
    return 0


def cmd_predict(args):
    model = tagger.TaggerModel.load(args.checkpoint)
    discourse_model = (tagger.TaggerModel.load(args.discourse_checkpoint)
                       if args.discourse_checkpoint else None)
    raw = Path(args.text_file).read_text(encoding="utf-8")
    spans = text.split_sentences(raw)
    if not spans:
        raise ClaimTaggerError(f"no sentences found in {args.text_file}")
    abstract = corpus.Abstract(id=Path(args.text_file).stem, title=args.title or "",
                               sentences=[s.text for s in spans])
    preds = tagger.predict(model, abstract)
    discourse_rows = None
    if discourse_model is not None:
        discourse_rows = [
            {label: float(p) for label, p in zip(discourse_model.labels, row.probabilities)}
            for row in tagger.predict(discourse_model, abstract)
        ]
    lines = []
    for i, pred in enumerate(preds):
        lines.append(json.dumps({
            "abstract_id": abstract.id,
            "index": pred.index,
            "text": pred.text,
            "claim_prob": pred.claim_prob,
            "claim": pred.claim,
            "discourse_dist": discourse_rows[i] if discourse_rows else None,
        }, sort_keys=True))
    output = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(output, encoding="utf-8")
        _emit_manifest(_manifest(args, [args.text_file, args.checkpoint]), out_file=args.out)
    else:
        sys.stdout.write(output)
    return 0


def cmd_stats(args):
    docs = corpus.parse_claim_corpus(args.corpus)
    labeled = corpus.attach_gold(docs)
    stats = corpus.corpus_stats(labeled)
    print(f"abstracts:             {stats.n_abstracts}")
    print(f"sentences:             {stats.n_sentences}")
    print(f"claim sentences:       {stats.n_claims}")
    print(f"last-sentence claims:  {stats.last_sentence_fraction:.3f}")
    print("claim position deciles (relative position in abstract):")
    peak = max(stats.decile_counts) or 1
    for i, count in enumerate(stats.decile_counts):
        bar = "#" * round(40 * count / peak)
        print(f"  {i / 10:.1f}-{(i + 1) / 10:.1f}  {count:>6}  {bar}")
    _emit_manifest(_manifest(args, [args.corpus]))
    return 0


def cmd_vote(args):
    docs = corpus.parse_claim_corpus(args.corpus)
    out_docs = []
    for doc in docs:
        gold = corpus.majority_vote(doc.annotations) if doc.annotations else doc.gold_labels
        out_docs.append(corpus.ClaimDocument(abstract=doc.abstract,
                                             annotations=doc.annotations,
                                             gold_labels=gold))
    Path(args.out).write_text(corpus.serialize_claim_corpus(out_docs), encoding="utf-8")
    _emit_manifest(_manifest(args, [args.corpus]), out_file=args.out)
    return 0


def cmd_serve(args):
    from . import service

    app = service.create_app(model_path=args.checkpoint,
                             task_path=args.tasks,
                             store_path=args.store,
                             discourse_model_path=args.discourse_checkpoint,
                             body_limit=args.body_limit)
    if args.ui:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=args.ui, html=True), name="ui")
    service.serve(app, host=args.host, port=args.port)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="claimtagger",
        description="Claim extraction for scientific abstracts: training, "
                    "evaluation, prediction, and annotation tooling.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pretrain", help="train a discourse tagger on a structured corpus")
    p.add_argument("--corpus", required=True, help="discourse corpus (###id / LABEL<TAB>sentence)")
    p.add_argument("--embeddings", help="text embedding file (token v1 ... vD per line)")
    p.add_argument("--out", required=True, help="output directory")
    _add_model_options(p)
    _add_train_options(p)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("transfer", help="fine-tune a pretrained tagger on claim data")
    p.add_argument("--pretrained", required=True, help="pretrained checkpoint (mandatory)")
    p.add_argument("--corpus", required=True, help="claim corpus (JSON lines)")
    p.add_argument("--out", required=True)
    p.add_argument("--stage2-lr", type=float, default=None,
                   help="fine-tuning learning rate (defaults to --lr)")
    _add_train_options(p)
    p.set_defaults(func=cmd_transfer)

    p = sub.add_parser("train", help="train a claim tagger without transfer")
    p.add_argument("--corpus", required=True)
    p.add_argument("--mode", choices=["scratch", "conclusion"], default="scratch",
                   help="'conclusion' relabels a discourse corpus: conclusions become claims")
    p.add_argument("--embeddings")
    p.add_argument("--out", required=True)
    _add_model_options(p)
    _add_train_options(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a model or baseline on a corpus split")
    p.add_argument("--model", required=True,
                   choices=["last-sentence", "rule-based", "sif", "sif-discourse", "checkpoint"])
    p.add_argument("--corpus", required=True)
    p.add_argument("--split", choices=["train", "val", "validation", "test"], default="test")
    p.add_argument("--seed", type=int, default=13)
    p.add_argument("--checkpoint")
    p.add_argument("--discourse-checkpoint")
    p.add_argument("--embeddings")
    p.add_argument("--frequencies",
                   help="external word-frequency file ('token count' lines) for sif weights")
    p.add_argument("--rules", help="rule file (defaults to the packaged rules)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="tag the sentences of one abstract")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--text-file", required=True)
    p.add_argument("--title", default="")
    p.add_argument("--discourse-checkpoint")
    p.add_argument("--out")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("stats", help="corpus statistics and claim-position histogram")
    p.add_argument("--corpus", required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("vote", help="write majority-vote gold labels into a claim corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_vote)

    p = sub.add_parser("serve", help="run the prediction and annotation HTTP service")
    env = os.environ.get
    p.add_argument("--checkpoint", default=env("CLAIMTAGGER_CHECKPOINT"),
                   help="claim model checkpoint (env CLAIMTAGGER_CHECKPOINT)")
    p.add_argument("--discourse-checkpoint", default=env("CLAIMTAGGER_DISCOURSE_CHECKPOINT"))
    p.add_argument("--tasks", default=env("CLAIMTAGGER_TASKS"),
                   help="annotation task file, JSON lines (env CLAIMTAGGER_TASKS)")
    p.add_argument("--store", default=env("CLAIMTAGGER_STORE"),
                   help="append-only submission log path (env CLAIMTAGGER_STORE)")
    p.add_argument("--host", default=env("CLAIMTAGGER_HOST", "127.0.0.1"))
    p.add_argument("--port", type=int, default=int(env("CLAIMTAGGER_PORT", "8000")))
    p.add_argument("--body-limit", type=int,
                   default=int(env("CLAIMTAGGER_BODY_LIMIT", "1000000")))
    p.add_argument("--ui", default=env("CLAIMTAGGER_UI"),
                   help="directory of static UI files to serve at / (env CLAIMTAGGER_UI)")
    p.set_defaults(func=cmd_serve)

    return parser


def run(argv):
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(name)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.func(args)
    except (ClaimTaggerError, OSError) as exc:
        logger.error("%s", exc)
        return 1


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
