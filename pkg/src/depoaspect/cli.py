"""Command-line surface over the deposition-aspect pipeline.

Exit codes: 0 success, 1 usage error, 2 data/processing error.  All file
outputs are written to a temporary path and atomically renamed, so a
failing subcommand never leaves partial artifacts.  Every stochastic
stage is seeded; omitting --seed uses the fixed default 42.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import canon, datasets, evaluation, experiment, models, ontology, transcript
from .embeddings import VectorFileError, load_sentence_vectors, load_word_vectors

DEFAULT_SEED = 42

_DATA_ERRORS = (
    transcript.TranscriptError,
    VectorFileError,
    datasets.DatasetError,
    canon.ComposeError,
    canon.UntransformableError,
    models.ModelError,
    models.SnapshotError,
    models.DivergedError,
    experiment.ExperimentError,
    ontology.UnknownLabelError,
    ontology.UnknownRoleError,
    evaluation.EvalError,
    OSError,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _atomic_write(path: str, content: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(content)
    os.replace(tmp, path)


def _emit(args, path_attr: str, content: str) -> None:
    """Write an artifact to its file, or to stdout under --stdout."""
    if getattr(args, "stdout", False):
        sys.stdout.write(content)
        if not content.endswith("\n"):
            sys.stdout.write("\n")
        return
    path = getattr(args, path_attr, None)
    if path is None:
        raise UsageError(f"--{path_attr.replace('_', '-')} is required without --stdout")
    _atomic_write(path, content)


def _pairs_jsonl(depositions) -> str:
    lines = []
    for dep in depositions:
        for pair in dep.pairs:
            lines.append(json.dumps(transcript.pair_record(dep.id, pair, dep.deponent_role)))
    return "\n".join(lines) + ("\n" if lines else "")


def _cmd_parse(args) -> int:
    with open(args.infile, encoding="utf-8") as fh:
        raw = fh.read()
    config = transcript.ParseConfig(
        keep_unanswered=args.keep_unanswered,
        strip_line_numbers=not args.keep_line_numbers,
    )
    dep = transcript.parse_transcript(
        raw, config, deposition_id=args.id or os.path.splitext(os.path.basename(args.infile))[0],
        deponent_role=args.role,
    )
    _emit(args, "out", _pairs_jsonl([dep]))
    stats = transcript.qa_stats(dep)
    print(
        f"parsed {stats['pair_count']} QA pairs "
        f"({stats['discarded_count']} spans discarded)",
        file=sys.stderr,
    )
    return 0


def _cmd_canon(args) -> int:
    depositions = transcript.read_pairs_jsonl(args.infile)
    lines = []
    fallbacks = 0
    for dep in depositions:
        for pair in dep.pairs:
            try:
                ds = canon.to_declarative(pair)
            except canon.UntransformableError:
                ds = canon.DeclarativeText((canon.fallback_concat(pair),), "machine")
                fallbacks += 1
            lines.append(
                json.dumps(
                    {
                        "deposition_id": dep.id,
                        "index": pair.index,
                        "ds": ds.joined,
                        "provenance": ds.provenance,
                    }
                )
            )
    _emit(args, "out", "\n".join(lines) + ("\n" if lines else ""))
    print(f"canonicalized {len(lines)} pairs ({fallbacks} fallbacks)", file=sys.stderr)
    return 0


def _cmd_synth(args) -> int:
    spec = datasets.SynthSpec(
        per_class_counts=args.per_class,
        vocab_per_class=args.vocab_per_class,
        overlap_fraction=args.overlap,
        signal_location=args.signal,
        depositions=args.depositions,
        seed=args.seed,
    )
    labeled = datasets.synth_corpus(spec)
    os.makedirs(args.out_dir, exist_ok=True)
    pair_lines = [
        json.dumps(
            {
                "deposition_id": ex.deposition_id,
                "index": ex.index,
                "question": ex.question,
                "answer": ex.answer,
                "role": ex.role,
            }
        )
        for ex in labeled.examples
    ]
    _atomic_write(os.path.join(args.out_dir, "pairs.jsonl"), "\n".join(pair_lines) + "\n")
    label_lines = [
        json.dumps(
            {"deposition_id": ex.deposition_id, "index": ex.index, "label": ex.label, "role": ex.role}
        )
        for ex in labeled.examples
    ]
    _atomic_write(os.path.join(args.out_dir, "labels.jsonl"), "\n".join(label_lines) + "\n")
    ds_lines = [
        json.dumps(
            {
                "deposition_id": ex.deposition_id,
                "index": ex.index,
                "ds": ex.ds_m.joined,
                "provenance": "machine",
            }
        )
        for ex in labeled.examples
    ]
    _atomic_write(os.path.join(args.out_dir, "ds_m.jsonl"), "\n".join(ds_lines) + "\n")
    print(f"wrote {len(labeled)} synthetic examples to {args.out_dir}", file=sys.stderr)
    return 0


def _cmd_split(args) -> int:
    depositions = transcript.read_pairs_jsonl(args.pairs)
    labels = datasets.read_labels_jsonl(args.labels)
    ds_m = canon.read_ds_jsonl(args.ds_m) if args.ds_m else None
    ds_c = canon.read_ds_jsonl(args.ds_c) if args.ds_c else None
    labeled = datasets.build_examples(depositions, labels, ds_m=ds_m, ds_c=ds_c)
    ratios = tuple(float(r) for r in args.ratios.split(","))
    spec = datasets.SplitSpec(
        ratios=ratios,
        stratified=not args.no_stratify,
        by_deposition=args.by_deposition,
        seed=args.seed,
    )
    parts = datasets.split(labeled, spec)
    os.makedirs(args.out_dir, exist_ok=True)
    for part, name in zip(parts, ("train", "val", "test")):
        tmp_path = os.path.join(args.out_dir, f"{name}.jsonl")
        datasets.write_examples_jsonl(part, tmp_path + ".tmp")
        os.replace(tmp_path + ".tmp", tmp_path)
    dist = datasets.class_distribution(labeled)
    print(
        f"split {dist['total']} examples into "
        f"{len(parts[0])}/{len(parts[1])}/{len(parts[2])}",
        file=sys.stderr,
    )
    return 0


def _family_inputs(family: str, labeled: datasets.LabeledSet, variant: canon.InputVariant):
    if family == models.FAMILY_EMB_HEAD:
        return [f"{ex.id}#{variant.value}" for ex in labeled.examples]
    return [ex.compose(variant) for ex in labeled.examples]


def _estimator_from_args(args) -> models._AspectClassifier:
    common = dict(
        dropout_rate=args.dropout,
        learning_rate=args.learning_rate,
        max_seq_len=args.max_seq_len,
        batch_size=args.batch_size,
        max_epochs=args.max_epochs,
        l2_coeff=args.l2,
        patience=args.patience,
        seed=args.seed,
    )
    if args.family == models.FAMILY_CNN:
        if not args.word_vectors:
            raise models.ModelError("cnn training requires --word-vectors")
        return models.CnnTextClassifier(
            hidden_size=args.hidden_size,
            activation=args.activation,
            ngram_windows=tuple(int(n) for n in args.ngram_windows.split(",")),
            word_embeddings=load_word_vectors(args.word_vectors),
            **common,
        )
    if args.family == models.FAMILY_BILSTM:
        return models.BiLstmAttentionClassifier(
            hidden_size=args.hidden_size,
            embedding_size=args.embedding_size,
            **common,
        )
    if not args.sentence_vectors:
        raise models.ModelError("emb_head training requires --sentence-vectors")
    return models.EmbeddingHeadClassifier(
        hidden_size=args.hidden_size,
        activation=args.activation,
        sentence_vectors=load_sentence_vectors(args.sentence_vectors),
        **common,
    )


def _cmd_train(args) -> int:
    variant = canon.parse_variant(args.variant)
    train_set = datasets.read_examples_jsonl(args.train)
    model = _estimator_from_args(args)
    X = _family_inputs(args.family, train_set, variant)
    y = train_set.labels()
    if args.val:
        val_set = datasets.read_examples_jsonl(args.val)
        model.fit(X, y, X_val=_family_inputs(args.family, val_set, variant), y_val=val_set.labels())
    else:
        model.fit(X, y)
    models.save_model(model, args.model_out)
    best = model.history_.epochs[model.history_.best_epoch]
    print(
        f"trained {args.family} on {len(train_set)} examples; "
        f"best val weighted F1 {best['val_weighted_f1']:.4f} "
        f"at epoch {model.history_.best_epoch}",
        file=sys.stderr,
    )
    return 0


def _cmd_eval(args) -> int:
    model = models.load_model(args.model)
    test_set = datasets.read_examples_jsonl(args.test)
    variant = canon.parse_variant(args.variant)
    if model._family == models.FAMILY_EMB_HEAD:
        if not args.sentence_vectors:
            raise models.ModelError("emb_head evaluation requires --sentence-vectors")
        model.sentence_vectors = load_sentence_vectors(args.sentence_vectors)
    X = _family_inputs(model._family, test_set, variant)
    preds = list(model.predict(X))
    report = evaluation.evaluate(test_set.labels(), preds, model.classes_)
    _emit(args, "report_out", evaluation.report_json(report) + "\n")
    if args.text:
        print(evaluation.report_table(report))
    print(f"weighted F1 {report.weighted_f1:.4f} on {len(test_set)} examples", file=sys.stderr)
    return 0


def _cmd_experiment(args) -> int:
    config = experiment.ExperimentConfig.from_file(args.config)
    result = experiment.run_experiment(config, jobs=args.jobs)
    out_path = experiment.write_results(result, config)
    if args.stdout:
        with open(out_path, encoding="utf-8") as fh:
            sys.stdout.write(fh.read())
    print(f"results written to {out_path}", file=sys.stderr)
    for key, message in sorted(result.failures.items()):
        print(f"cell {key} failed: {message}", file=sys.stderr)
    return 0


def _cmd_report(args) -> int:
    with open(args.results, encoding="utf-8") as fh:
        payload = json.load(fh)
    blocks = [payload.get("table", "")]
    for key in sorted(payload.get("cells", {})):
        cell = payload["cells"][key]
        rep = cell.get("report", {})
        report = evaluation.EvalReport(
            labels=tuple(rep["labels"]),
            confusion=np.array(rep["confusion"]),
            per_class=rep["per_class"],
            accuracy=rep["accuracy"],
            macro_f1=rep["macro_f1"],
            weighted_f1=rep["weighted_f1"],
            top_confusions=[tuple(c) for c in rep.get("top_confusions", [])],
            note=rep.get("note", evaluation.AVERAGING_NOTE),
        )
        blocks.append(f"\n== {key} ==\n{evaluation.report_table(report)}")
    content = "\n".join(blocks) + "\n"
    if args.out:
        _atomic_write(args.out, content)
    else:
        sys.stdout.write(content)
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="depoaspect", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="parse a transcript into QA-pair JSONL")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out")
    p.add_argument("--id", help="deposition id (defaults to the file stem)")
    p.add_argument("--role", help="deponent role token")
    p.add_argument("--keep-unanswered", action="store_true")
    p.add_argument("--keep-line-numbers", action="store_true")
    p.add_argument("--stdout", action="store_true")
    p.set_defaults(func=_cmd_parse)

    p = sub.add_parser("canon", help="generate machine declarative sentences (DS-M)")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out")
    p.add_argument("--stdout", action="store_true")
    p.set_defaults(func=_cmd_canon)

    p = sub.add_parser("synth", help="generate a synthetic labeled corpus")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--per-class", type=int, default=50)
    p.add_argument("--vocab-per-class", type=int, default=24)
    p.add_argument("--overlap", type=float, default=0.0)
    p.add_argument("--signal", choices=("qa", "answer", "question"), default="qa")
    p.add_argument("--depositions", type=int, default=4)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("split", help="join labels and split into train/val/test")
    p.add_argument("--pairs", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--ds-m")
    p.add_argument("--ds-c")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--ratios", default="0.7,0.2,0.1")
    p.add_argument("--no-stratify", action="store_true")
    p.add_argument("--by-deposition", action="store_true")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("train", help="train one classifier family on one input variant")
    p.add_argument("--family", choices=models.FAMILIES, required=True)
    p.add_argument("--variant", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--val")
    p.add_argument("--model-out", required=True)
    p.add_argument("--word-vectors")
    p.add_argument("--sentence-vectors")
    p.add_argument("--hidden-size", type=int, default=100)
    p.add_argument("--embedding-size", type=int, default=128)
    p.add_argument("--dropout", type=float, default=0.1)
    p.add_argument("--activation", default="sigmoid")
    p.add_argument("--ngram-windows", default="1")
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--max-seq-len", type=int, default=128)
    p.add_argument("--batch-size", type=int, default=100)
    p.add_argument("--max-epochs", type=int, default=30)
    p.add_argument("--l2", type=float, default=0.0)
    p.add_argument("--patience", type=int, default=3)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained model on a test set")
    p.add_argument("--model", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--variant", required=True)
    p.add_argument("--sentence-vectors")
    p.add_argument("--report-out")
    p.add_argument("--text", action="store_true")
    p.add_argument("--stdout", action="store_true")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("experiment", help="run the full variant x family grid from a config")
    p.add_argument("--config", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--stdout", action="store_true")
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("report", help="render score tables from results.json")
    p.add_argument("--results", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except _DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
