"""Command-line pipeline: prep -> lda train/infer -> embed -> train -> eval.

Every stage reads and writes files, so external embedding producers can slot
in between stages. Artifact-producing commands drop a `.manifest.json` next
to their output. Exit codes: 0 success, 1 usage error, 2 data error.

The seed for a command is taken from --seed when given, else from the
VERITOPIC_SEED environment variable, else 0.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__, classifier, embeddings, evaluation, lda, manifest
from .corpus import (
    Corpus,
    Label,
    Split,
    build_vocabulary,
    default_stopwords,
    encode_corpus,
    load_dataset,
    load_stopwords,
    preprocess_corpus,
    read_corpus_file,
    write_corpus_file,
)
from .errors import DataError, VeritopicError


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the contract here is exit 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _resolve_seed(flag_value: int | None) -> int:
    if flag_value is not None:
        return flag_value
    env = os.environ.get("VERITOPIC_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise DataError(f"VERITOPIC_SEED must be an integer, got {env!r}")
    return 0


def _stopwords(path: str | None) -> frozenset[str]:
    return load_stopwords(path) if path else default_stopwords()


def _load_labeled(path: str) -> Corpus:
    corpus = load_dataset(path, Split.UNSPLIT)
    for doc in corpus.documents:
        if doc.label is None:
            raise DataError(f"{path}: document {doc.id!r} has no label")
    return corpus


def _read_embeddings(path: str, as_tsv: bool) -> embeddings.EmbeddingMatrix:
    if as_tsv:
        return embeddings.read_embedding_tsv(path)
    return embeddings.read_embedding_file(path)


def _fused_for(
    emb_path: str, topics_path: str, gold_path: str, as_tsv: bool
) -> tuple[list, list[Label], Corpus]:
    corpus = _load_labeled(gold_path)
    matrix = _read_embeddings(emb_path, as_tsv)
    thetas = lda.read_theta_tsv(topics_path)
    ids = [doc.id for doc in corpus.documents]
    fused = embeddings.fuse(matrix, thetas, ids)
    labels = [doc.label for doc in corpus.documents]
    return fused, labels, corpus


def _cmd_prep(args) -> int:
    stop = _stopwords(args.stopwords)
    corpus = load_dataset(args.input, Split(args.split))
    corpus = preprocess_corpus(corpus, stop)
    if args.vocab_from:
        vocab = read_corpus_file(args.vocab_from).vocab
    else:
        vocab = build_vocabulary(corpus, min_df=args.min_df)
    encoded = encode_corpus(corpus, vocab)
    write_corpus_file(encoded, args.out)
    inputs = {"input": args.input}
    if args.stopwords:
        inputs["stopwords"] = args.stopwords
    if args.vocab_from:
        inputs["vocab_from"] = args.vocab_from
    manifest.write_manifest(
        args.out, "prep",
        {"split": args.split, "min_df": args.min_df, "out": args.out},
        inputs, seed=None,
    )
    counts = corpus.class_counts()
    print(
        f"prep: {len(corpus)} documents ({counts['real']} real, {counts['fake']} fake, "
        f"{counts['unlabeled']} unlabeled), vocabulary size {vocab.size} -> {args.out}"
    )
    return 0


def _cmd_lda_train(args) -> int:
    seed = _resolve_seed(args.seed)
    encoded = read_corpus_file(args.corpus)
    config = lda.LdaConfig(
        k=args.topics,
        alpha=args.alpha,
        beta=args.beta,
        iterations=args.iters,
        burn_in=args.burn_in,
        seed=seed,
        infer_iterations=args.infer_iters,
    )

    def on_sweep(sweep: int, state: lda.GibbsState) -> None:
        if args.log_every and (sweep + 1) % args.log_every == 0:
            ll = lda.log_likelihood(state, config)
            print(f"sweep {sweep + 1}/{config.iterations}  joint log-likelihood {ll:.2f}")

    model = lda.train(encoded, config, on_sweep=on_sweep)
    lda.write_model_file(model, args.out)
    manifest.write_manifest(
        args.out, "lda train",
        {
            "topics": args.topics, "alpha": args.alpha, "beta": args.beta,
            "iters": args.iters, "burn_in": args.burn_in,
            "infer_iters": args.infer_iters, "out": args.out,
        },
        {"corpus": args.corpus}, seed=seed,
    )
    print(f"lda train: K={config.k} V={model.vocab_size} -> {args.out}")
    return 0


def _cmd_lda_infer(args) -> int:
    model = lda.read_model_file(args.model)
    encoded = read_corpus_file(args.corpus)
    distributions = lda.infer_corpus(model, encoded)
    lda.write_theta_tsv(distributions, args.out)
    manifest.write_manifest(
        args.out, "lda infer", {"out": args.out},
        {"model": args.model, "corpus": args.corpus}, seed=model.config.seed,
    )
    print(f"lda infer: {len(distributions)} documents x {model.config.k} topics -> {args.out}")
    return 0


def _cmd_embed_baseline(args) -> int:
    encoded = read_corpus_file(args.corpus)
    matrix = embeddings.baseline_encode(encoded, dim=args.dim)
    embeddings.write_embedding_file(matrix, args.out)
    manifest.write_manifest(
        args.out, "embed baseline", {"dim": args.dim, "out": args.out},
        {"corpus": args.corpus}, seed=None,
    )
    print(f"embed baseline: {len(matrix)} vectors, dim {matrix.dim} -> {args.out}")
    return 0


def _cmd_embed_validate(args) -> int:
    matrix = _read_embeddings(args.emb, args.tsv)
    print(f"embed validate: OK, {len(matrix)} records, dim {matrix.dim}")
    return 0


def _cmd_train(args) -> int:
    seed = _resolve_seed(args.seed)
    fused, labels, _ = _fused_for(args.emb, args.topics, args.gold, args.tsv)
    config = classifier.TrainConfig(
        learning_rate=args.lr,
        adam_epsilon=args.eps,
        adam_beta1=args.beta1,
        adam_beta2=args.beta2,
        epochs=args.epochs,
        batch_size=args.batch_size,
        seed=seed,
        early_stop_patience=args.early_stop_patience,
    )
    kwargs = {}
    if args.val_emb or args.val_topics or args.val_gold:
        if not (args.val_emb and args.val_topics and args.val_gold):
            raise DataError("--val-emb, --val-topics and --val-gold must be given together")
        val_fused, val_labels, _ = _fused_for(args.val_emb, args.val_topics, args.val_gold, args.tsv)
        kwargs = {"val_features": val_fused, "val_labels": val_labels}
    model, log = classifier.train_classifier(
        fused, labels, config, hidden_dim=args.hidden, **kwargs
    )
    classifier.write_classifier_file(model, config, args.out)
    inputs = {"emb": args.emb, "topics": args.topics, "gold": args.gold}
    if kwargs:
        inputs.update({"val_emb": args.val_emb, "val_topics": args.val_topics, "val_gold": args.val_gold})
    manifest.write_manifest(
        args.out, "train",
        {
            "lr": args.lr, "eps": args.eps, "beta1": args.beta1, "beta2": args.beta2,
            "epochs": args.epochs, "batch_size": args.batch_size, "hidden": args.hidden,
            "early_stop_patience": args.early_stop_patience, "out": args.out,
        },
        inputs, seed=seed,
    )
    for entry in log:
        line = f"epoch {entry['epoch'] + 1}/{config.epochs}  loss {entry['mean_loss']:.4f}"
        if "val_weighted_f1" in entry:
            line += f"  val weighted F1 {entry['val_weighted_f1']:.4f}"
        print(line)
    print(f"train: input dim {model.input_dim}, hidden {model.hidden_dim} -> {args.out}")
    return 0


def _cmd_eval(args) -> int:
    gold_corpus = _load_labeled(args.gold)
    gold = [doc.label for doc in gold_corpus.documents]
    ids = [doc.id for doc in gold_corpus.documents]
    inputs = {"gold": args.gold}
    if args.pred_in:
        by_id = {p.doc_id: p for p in classifier.read_predictions_tsv(args.pred_in)}
        missing = [i for i in ids if i not in by_id]
        if missing:
            raise DataError(f"predictions missing for {missing[0]!r}")
        predictions = [by_id[i] for i in ids]
        inputs["pred_in"] = args.pred_in
    else:
        if not (args.model and args.emb and args.topics):
            raise DataError("eval needs either --pred-in or all of --model/--emb/--topics")
        model, _ = classifier.read_classifier_file(args.model)
        fused, _, _ = _fused_for(args.emb, args.topics, args.gold, args.tsv)
        predictions = classifier.predict(model, fused)
        inputs.update({"model": args.model, "emb": args.emb, "topics": args.topics})
    matrix = evaluation.confusion_matrix(gold, [p.label for p in predictions])
    report = evaluation.weighted_prf(matrix)
    payload = evaluation.report_to_dict(report)
    Path(args.report).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    if args.pred:
        classifier.write_predictions_tsv(predictions, args.pred)
    manifest.write_manifest(args.report, "eval", {"report": args.report}, inputs, seed=None)
    print(evaluation.format_confusion(matrix))
    print(
        f"precision {report.precision:.4f}  recall {report.recall:.4f}  "
        f"weighted F1 {report.f1:.4f}  accuracy {report.accuracy:.4f}"
    )
    print(f"eval: report -> {args.report}")
    return 0


def _cmd_ensemble(args) -> int:
    a = classifier.read_predictions_tsv(args.a)
    b = classifier.read_predictions_tsv(args.b)
    combined = evaluation.ensemble_predictions(a, b)
    classifier.write_predictions_tsv(combined, args.out)
    manifest.write_manifest(
        args.out, "ensemble", {"out": args.out}, {"a": args.a, "b": args.b}, seed=None
    )
    print(f"ensemble: {len(combined)} predictions -> {args.out}")
    return 0


def _cmd_analyze_errors(args) -> int:
    stop = _stopwords(args.stopwords)
    gold_corpus = preprocess_corpus(_load_labeled(args.gold), stop)
    gold = [doc.label for doc in gold_corpus.documents]
    by_id = {p.doc_id: p for p in classifier.read_predictions_tsv(args.pred)}
    missing = [doc.id for doc in gold_corpus.documents if doc.id not in by_id]
    if missing:
        raise DataError(f"predictions missing for {missing[0]!r}")
    predictions = [by_id[doc.id] for doc in gold_corpus.documents]

    reference_docs = []
    for path in [args.train, args.validation]:
        if path:
            reference_docs.extend(preprocess_corpus(_load_labeled(path), stop).documents)
    if not reference_docs:
        raise DataError("analyze errors needs --train (and optionally --validation) for keyword counts")
    reference = Corpus(reference_docs, Split.UNSPLIT)

    keywords = [k for k in (args.keywords.split(",") if args.keywords else []) if k]
    report = evaluation.build_error_report(
        gold, predictions, gold_corpus, reference, extra_keywords=keywords
    )
    payload = evaluation.error_report_to_dict(report)
    Path(args.report).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    inputs = {"pred": args.pred, "gold": args.gold}
    if args.train:
        inputs["train"] = args.train
    if args.validation:
        inputs["validation"] = args.validation
    if args.stopwords:
        inputs["stopwords"] = args.stopwords
    manifest.write_manifest(args.report, "analyze errors", {"report": args.report}, inputs, seed=None)
    print(f"analyze errors: {len(report.misclassified)} misclassified -> {args.report}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="veritopic", description=__doc__)
    parser.add_argument("--version", action="version", version=f"veritopic {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("prep", help="CSV -> preprocessed, encoded corpus (VCP1)")
    p.add_argument("--input", required=True, help="dataset CSV with header id,tweet,label")
    p.add_argument("--split", default="unsplit", choices=[s.value for s in Split])
    p.add_argument("--stopwords", help="stopword file, one token per line (default: built-in)")
    p.add_argument("--min-df", type=int, default=1, help="minimum document frequency (default 1)")
    p.add_argument("--vocab-from", help="reuse the vocabulary of an existing VCP1 file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_prep)

    p_lda = sub.add_parser("lda", help="topic model commands")
    lda_sub = p_lda.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    p = lda_sub.add_parser("train", help="train LDA by collapsed Gibbs sampling")
    p.add_argument("--corpus", required=True, help="VCP1 corpus")
    p.add_argument("--topics", type=int, default=10)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--beta", type=float, default=0.01)
    p.add_argument("--iters", type=int, default=500)
    p.add_argument("--burn-in", type=int, default=300)
    p.add_argument("--infer-iters", type=int, default=50)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--log-every", type=int, default=50, help="sweeps between progress lines (0 = quiet)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_lda_train)

    p = lda_sub.add_parser("infer", help="document-topic distributions for a corpus")
    p.add_argument("--model", required=True, help="VLDA model file")
    p.add_argument("--corpus", required=True, help="VCP1 corpus (same vocabulary as the model)")
    p.add_argument("--out", required=True, help="output TSV: doc_id, p_0..p_{K-1}")
    p.set_defaults(func=_cmd_lda_infer)

    p_embed = sub.add_parser("embed", help="embedding commands")
    embed_sub = p_embed.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    p = embed_sub.add_parser("baseline", help="hashed TF-IDF document vectors (CEB1)")
    p.add_argument("--corpus", required=True)
    p.add_argument("--dim", type=int, default=512)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_embed_baseline)

    p = embed_sub.add_parser("validate", help="check a CEB1 (or debug TSV) embedding file")
    p.add_argument("--emb", required=True)
    p.add_argument("--tsv", action="store_true", help="input is the debug TSV form")
    p.set_defaults(func=_cmd_embed_validate)

    p = sub.add_parser("train", help="train the softmax head on fused features")
    p.add_argument("--emb", required=True, help="CEB1 embeddings for the training documents")
    p.add_argument("--topics", required=True, help="topic TSV from `lda infer`")
    p.add_argument("--gold", required=True, help="labeled CSV aligned with the embeddings")
    p.add_argument("--val-emb")
    p.add_argument("--val-topics")
    p.add_argument("--val-gold")
    p.add_argument("--tsv", action="store_true", help="embedding inputs are debug TSV")
    p.add_argument("--lr", type=float, default=2e-5)
    p.add_argument("--eps", type=float, default=1e-8)
    p.add_argument("--beta1", type=float, default=0.9)
    p.add_argument("--beta2", type=float, default=0.999)
    p.add_argument("--epochs", type=int, default=15)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--hidden", type=int, default=128)
    p.add_argument("--early-stop-patience", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate predictions against gold labels")
    p.add_argument("--model", help="VMLP checkpoint")
    p.add_argument("--emb")
    p.add_argument("--topics")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred-in", help="evaluate an existing predictions TSV instead of a model")
    p.add_argument("--pred", help="also write predictions TSV here")
    p.add_argument("--tsv", action="store_true", help="embedding input is debug TSV")
    p.add_argument("--report", required=True, help="output JSON report")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("ensemble", help="average two prediction files")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_ensemble)

    p_analyze = sub.add_parser("analyze", help="analysis commands")
    analyze_sub = p_analyze.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    p = analyze_sub.add_parser("errors", help="misclassification report with keyword skew")
    p.add_argument("--pred", required=True, help="predictions TSV")
    p.add_argument("--gold", required=True, help="labeled CSV the predictions are for")
    p.add_argument("--train", help="labeled CSV for keyword counts")
    p.add_argument("--validation", help="labeled CSV for keyword counts")
    p.add_argument("--stopwords")
    p.add_argument("--keywords", help="comma-separated extra keywords for the table")
    p.add_argument("--report", required=True, help="output JSON report")
    p.set_defaults(func=_cmd_analyze_errors)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except VeritopicError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
