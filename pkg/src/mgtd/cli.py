"""Single command-line entry point for all pipelines.

Subcommands: split, attack, normalize, featurize, train, detect, segment,
evaluate. Every run with an ``--out`` path writes a resolved-config copy
next to its output so the run can be reproduced exactly. Exit codes: 0 on
success, 1 on validation errors, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np

from . import attacks, corpus, crf, detectors, features, metrics, moe
from . import normalizer as norm
from .corpus import (
    BINARY_LABELS,
    GENERATOR_LABELS,
    CorpusError,
)

PIPELINE_ERRORS = (
    CorpusError,
    attacks.AttackError,
    norm.NormalizeError,
    features.FeatureError,
    detectors.DetectorError,
    moe.MoEError,
    crf.CrfError,
    metrics.MetricsError,
    FileNotFoundError,
    KeyError,
    ValueError,
)


def _resolve(path: str | None) -> str | None:
    """Relative paths resolve against MGTD_DATA_DIR when it is set."""
    base = os.environ.get("MGTD_DATA_DIR")
    if path is None or os.path.isabs(path) or not base:
        return path
    return os.path.join(base, path)


def _write_config_copy(out_path: str, command: str, args: argparse.Namespace) -> None:
    resolved = {"command": command}
    for key, value in sorted(vars(args).items()):
        if key in ("func", "config"):
            continue
        resolved[key] = value
    with open(out_path + ".config.json", "w", encoding="utf-8") as fh:
        json.dump(resolved, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_json(obj: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, ensure_ascii=False, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _cmd_split(args) -> int:
    ratios = tuple(float(x) for x in args.ratios.split(","))
    docs = corpus.load_documents(_resolve(args.infile), schema="detection")
    assignment = corpus.stratified_split(docs, ratios, args.seed, args.stratify_on)
    _write_json(assignment.to_record(), _resolve(args.out))
    _write_config_copy(_resolve(args.out), "split", args)
    return 0


def _cmd_attack(args) -> int:
    docs = corpus.load_documents(_resolve(args.infile), schema="detection")
    lexicon = attacks.load_synonym_lexicon(_resolve(args.lexicon))
    table = attacks.load_confusables(_resolve(args.table))
    if args.kind == "all":
        configs = [
            attacks.AttackConfig(kind=k, rate=args.rate if args.rate is not None
                                 else attacks.DEFAULT_RATES[k])
            for k in corpus.ATTACK_KINDS
        ]
        out_docs = attacks.expand_corpus(docs, configs, args.seed, lexicon=lexicon, table=table)
    else:
        rate = args.rate if args.rate is not None else attacks.DEFAULT_RATES[args.kind]
        out_docs = []
        for doc in docs:
            config = attacks.AttackConfig(
                kind=args.kind,
                rate=rate,
                seed=attacks.derive_seed(args.seed, doc.id, args.kind),
            )
            outcome = attacks.apply_attack(doc.text, config, lexicon=lexicon, table=table)
            out_docs.append(replace(doc, text=outcome.text, attack_tag=args.kind))
    corpus.save_documents(out_docs, _resolve(args.out))
    _write_config_copy(_resolve(args.out), "attack", args)
    return 0


def _normalizer_config(args) -> norm.NormalizerConfig:
    dictionary = None
    spelling = False
    if args.dict and not args.no_spell:
        with open(_resolve(args.dict), encoding="utf-8") as fh:
            dictionary = frozenset(w.strip().lower() for w in fh if w.strip())
        spelling = True
    return norm.NormalizerConfig(repair_spelling=spelling, dictionary=dictionary)


def _cmd_normalize(args) -> int:
    config = _normalizer_config(args)
    records = corpus.load_records(_resolve(args.infile))
    out = []
    for rec in records:
        if "text" not in rec:
            raise CorpusError(f"record {rec.get('id')!r} has no text field")
        rec = dict(rec)
        rec["preprocessed_text"] = norm.normalize(rec["text"], config)
        out.append(rec)
    corpus.save_records(out, _resolve(args.out))
    _write_config_copy(_resolve(args.out), "normalize", args)
    return 0


def _load_tfidf_file(path: str) -> features.TfIdfModel:
    with open(path, encoding="utf-8") as fh:
        rec = json.load(fh)
    if "tfidf" in rec:  # detector bundle
        rec = rec["tfidf"]
    return features.TfIdfModel.from_record(rec)


def _cmd_featurize(args) -> int:
    tfidf = _load_tfidf_file(_resolve(args.tfidf))
    folding = norm.default_folding_map()
    records = corpus.load_records(_resolve(args.infile))
    out = []
    for rec in records:
        if "text" not in rec or "preprocessed_text" not in rec:
            raise CorpusError(
                f"record {rec.get('id')!r} needs text and preprocessed_text; run normalize first"
            )
        vec = features.implicit_feature_vector(
            rec["text"], rec["preprocessed_text"], tfidf, folding
        )
        rec = dict(rec)
        rec["implicit_features"] = [float(x) for x in vec.as_array()]
        out.append(rec)
    corpus.save_records(out, _resolve(args.out))
    _write_config_copy(_resolve(args.out), "featurize", args)
    return 0


def _task_labels(records, task: str):
    field = "generator_label" if task == "multiclass" else "binary_label"
    labels = []
    for rec in records:
        if rec.get(field) is None:
            raise CorpusError(f"record {rec.get('id')!r} is missing {field}")
        labels.append(rec[field])
    return labels


def _train_config(args) -> detectors.TrainConfig:
    return detectors.TrainConfig(
        learning_rate=args.learning_rate,
        epochs=args.epochs,
        batch_size=args.batch_size,
        l2=args.l2,
        seed=args.seed,
        early_stop_patience=args.patience,
    )


def _cmd_train(args) -> int:
    config = _train_config(args)
    out_path = _resolve(args.out)
    if args.model == "crf":
        if args.task != "segmentation":
            raise CorpusError("model crf requires --task segmentation")
        train_docs = corpus.load_documents(_resolve(args.infile), schema="segmentation")
        val_docs = (
            corpus.load_documents(_resolve(args.val), schema="segmentation")
            if args.val
            else None
        )
        settings = crf.FeaturizerSettings(
            feature_space=args.feature_space, position_buckets=args.buckets
        )
        model = crf.train_crf(train_docs, config, val_docs, settings)
        bundle = {"model_kind": "crf", "task": args.task, "crf": model.to_record()}
        _write_json(bundle, out_path)
        _write_config_copy(out_path, "train", args)
        return 0

    records = corpus.load_records(_resolve(args.infile))
    labels = _task_labels(records, args.task)
    texts = [rec["text"] for rec in records]
    val_records = corpus.load_records(_resolve(args.val)) if args.val else None

    if args.model == "moe":
        if args.task not in ("binary", "multiclass"):
            raise CorpusError("model moe requires --task binary or multiclass")
        classes = BINARY_LABELS if args.task == "binary" else GENERATOR_LABELS
        X = moe.embed_many(texts, args.embed_dim)
        model = moe.init_moe(
            mode=args.mode.capitalize(),
            classes=classes,
            num_experts=args.experts,
            embed_dim=args.embed_dim,
            hidden=args.hidden,
            seed=args.seed,
            dropout_rate=args.dropout,
            aux_weight=args.aux_weight,
        )
        val_X = val_y = None
        if val_records:
            val_X = moe.embed_many([r["text"] for r in val_records], args.embed_dim)
            val_y = _task_labels(val_records, args.task)
        model = moe.moe_train(model, X, labels, config, val_X, val_y)
        bundle = {"model_kind": "moe", "task": args.task, "moe": model.to_record()}
        _write_json(bundle, out_path)
        _write_config_copy(out_path, "train", args)
        return 0

    # linear models (lr / svm)
    loss_kind = {
        ("lr", "binary"): "LogisticBinary",
        ("lr", "implicit"): "LogisticBinary",
        ("lr", "multiclass"): "SoftmaxMulticlass",
        ("svm", "binary"): "Hinge",
        ("svm", "multiclass"): "Hinge",
    }.get((args.model, args.task))
    if loss_kind is None:
        raise CorpusError(f"unsupported model/task combination {args.model}/{args.task}")
    feature_mode = "implicit+tfidf" if args.task == "implicit" else args.features
    tfidf = features.tfidf_fit(texts, max_features=args.max_features)
    folding = norm.default_folding_map()

    if feature_mode == "implicit+tfidf":
        normalized = [_require_preprocessed(rec) for rec in records]
        val_args = {}
        if val_records:
            val_args = dict(
                val_raw=[r["text"] for r in val_records],
                val_normalized=[_require_preprocessed(r) for r in val_records],
                val_labels=_task_labels(val_records, args.task),
            )
        model = detectors.build_implicit_classifier(
            texts, normalized, labels, tfidf, config, folding, **val_args
        )
    else:
        X = features.tfidf_transform_many(tfidf, texts)
        val_X = val_y = None
        if val_records:
            val_X = features.tfidf_transform_many(tfidf, [r["text"] for r in val_records])
            val_y = _task_labels(val_records, args.task)
        model = detectors.train(X, labels, config, loss_kind, val_X, val_y)

    bundle = {
        "model_kind": "linear",
        "task": args.task,
        "features": feature_mode,
        "linear": model.to_record(),
        "tfidf": tfidf.to_record(),
    }
    _write_json(bundle, out_path)
    if args.tfidf_out:
        _write_json(tfidf.to_record(), _resolve(args.tfidf_out))
    _write_config_copy(out_path, "train", args)
    return 0


def _require_preprocessed(rec: dict) -> str:
    if "preprocessed_text" not in rec:
        raise CorpusError(
            f"record {rec.get('id')!r} has no preprocessed_text; run normalize first"
        )
    return rec["preprocessed_text"]


def _load_bundle(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _cmd_detect(args) -> int:
    bundle = _load_bundle(_resolve(args.model))
    records = corpus.load_records(_resolve(args.infile))
    texts = [rec["text"] for rec in records]
    out = []
    if bundle["model_kind"] == "linear":
        model = detectors.LinearModel.from_record(bundle["linear"])
        tfidf = features.TfIdfModel.from_record(bundle["tfidf"])
        if bundle["features"] == "implicit+tfidf":
            normalized = [_require_preprocessed(rec) for rec in records]
            X = detectors.implicit_design_matrix(
                texts, normalized, tfidf, norm.default_folding_map()
            )
        else:
            X = features.tfidf_transform_many(tfidf, texts)
        probs = detectors.predict_proba(model, X)
        preds = [model.classes[i] for i in np.argmax(probs, axis=1)]
        for rec, pred, p in zip(records, preds, probs):
            out.append(
                {
                    "id": rec["id"],
                    "predicted_label": pred,
                    "probabilities": {c: float(v) for c, v in zip(model.classes, p)},
                }
            )
    elif bundle["model_kind"] == "moe":
        model = moe.MoEModel.from_record(bundle["moe"])
        X = moe.embed_many(texts, model.embed_dim)
        probs, gates = moe.moe_predict_proba(model, X)
        preds = [model.classes[i] for i in np.argmax(probs, axis=1)]
        for rec, pred, p, g in zip(records, preds, probs, gates):
            out.append(
                {
                    "id": rec["id"],
                    "predicted_label": pred,
                    "probabilities": {c: float(v) for c, v in zip(model.classes, p)},
                    "gate_weights": [float(v) for v in g],
                }
            )
    else:
        raise CorpusError("detect requires a linear or moe model; use segment for crf")
    corpus.save_records(out, _resolve(args.out))
    _write_config_copy(_resolve(args.out), "detect", args)
    return 0


def _cmd_segment(args) -> int:
    bundle = _load_bundle(_resolve(args.model))
    if bundle["model_kind"] != "crf":
        raise CorpusError("segment requires a crf model")
    model = crf.CrfModel.from_record(bundle["crf"])
    records = corpus.load_records(_resolve(args.infile))
    out = []
    for rec in records:
        if "text" in rec:
            text = rec["text"]
        elif "tokens" in rec:
            text = " ".join(rec["tokens"])
        else:
            raise CorpusError(f"record {rec.get('id')!r} has neither text nor tokens")
        result = crf.segment(text, model)
        out.append(
            {
                "id": rec["id"],
                "token_labels": result["token_labels"],
                "boundaries": result["boundaries"],
            }
        )
    corpus.save_records(out, _resolve(args.out))
    _write_config_copy(_resolve(args.out), "segment", args)
    return 0


def _join_by_id(gold_records, pred_records):
    pred_by_id = {rec["id"]: rec for rec in pred_records}
    for rec in gold_records:
        if rec["id"] not in pred_by_id:
            raise CorpusError(f"no prediction for id {rec['id']!r}")
        yield rec, pred_by_id[rec["id"]]


def _cmd_evaluate(args) -> int:
    pred_records = corpus.load_records(_resolve(args.pred))
    if args.task in ("binary", "multiclass"):
        gold_records = corpus.load_records(_resolve(args.gold))
        field = "binary_label" if args.task == "binary" else "generator_label"
        classes = BINARY_LABELS if args.task == "binary" else GENERATOR_LABELS
        gold, pred = [], []
        for g, p in _join_by_id(gold_records, pred_records):
            gold.append(g[field])
            pred.append(p["predicted_label"])
        cm = metrics.confusion(gold, pred, classes)
        report = {"task": args.task, "classes": list(classes)}
        report.update(metrics.per_class_prf(cm))
        report["mcc"] = metrics.mcc(cm)
        report["counts"] = cm.counts.tolist()
    elif args.task == "segmentation":
        gold_docs = corpus.load_documents(_resolve(args.gold), schema="segmentation")
        gold_tokens, pred_tokens = [], []
        agg = {"exact_matches": 0, "matched": 0, "missed": 0, "spurious": 0,
               "offset_sum": 0, "gold_total": 0}
        pred_by_id = {rec["id"]: rec for rec in pred_records}
        for doc in gold_docs:
            if doc.id not in pred_by_id:
                raise CorpusError(f"no prediction for id {doc.id!r}")
            predicted = list(pred_by_id[doc.id]["token_labels"])
            if len(predicted) != len(doc.token_labels):
                raise CorpusError(f"id {doc.id!r}: predicted label length mismatch")
            gold_tokens.extend(doc.token_labels)
            pred_tokens.extend(predicted)
            stats = metrics.boundary_offset_stats(
                corpus.extract_boundaries(doc.token_labels),
                corpus.extract_boundaries(predicted),
            )
            for key in ("exact_matches", "matched", "missed", "spurious", "offset_sum"):
                agg[key] += stats[key]
            agg["gold_total"] += stats["matched"] + stats["missed"]
        cm = metrics.confusion(gold_tokens, pred_tokens, corpus.TOKEN_LABELS)
        report = {"task": args.task, "classes": list(corpus.TOKEN_LABELS)}
        report.update(metrics.per_class_prf(cm))
        report["mcc"] = metrics.mcc(cm)
        report["counts"] = cm.counts.tolist()
        report["boundaries"] = {
            "exact_match_rate": agg["exact_matches"] / agg["gold_total"]
            if agg["gold_total"]
            else 1.0,
            "mean_offset": agg["offset_sum"] / agg["matched"] if agg["matched"] else 0.0,
            "matched": agg["matched"],
            "missed": agg["missed"],
            "spurious": agg["spurious"],
        }
    else:
        raise CorpusError(f"unknown evaluation task {args.task!r}")
    rendered = metrics.render_report(report, args.format)
    if args.out:
        with open(_resolve(args.out), "w", encoding="utf-8") as fh:
            fh.write(rendered)
        _write_config_copy(_resolve(args.out), "evaluate", args)
    else:
        sys.stdout.write(rendered)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mgtd",
        description="Machine-generated-text forensics: attacks, detection, segmentation.",
    )
    parser.add_argument("--config", help="JSON file of defaults; explicit flags win")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("split", help="stratified train/validation/test split")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ratios", default="0.7,0.2,0.1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stratify-on", dest="stratify_on", default="binary_label")
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("attack", help="apply one attack or the 5+1 expansion")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--kind", required=True, choices=list(corpus.ATTACK_KINDS) + ["all"])
    p.add_argument("--rate", type=float, default=None, help="per-unit perturbation probability")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lexicon", default=None, help="synonym lexicon file")
    p.add_argument("--table", default=None, help="confusables table file")
    p.set_defaults(func=_cmd_attack)

    p = sub.add_parser("normalize", help="add a preprocessed_text column")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-spell", dest="no_spell", action="store_true")
    p.add_argument("--dict", default=None, help="dictionary file, one word per line")
    p.set_defaults(func=_cmd_normalize)

    p = sub.add_parser("featurize", help="add the six implicit comparison features")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--tfidf", required=True, help="TF-IDF model file")
    p.set_defaults(func=_cmd_featurize)

    p = sub.add_parser("train", help="train a detector, mixture, or crf model")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--val", default=None, help="validation file for early stopping")
    p.add_argument("--model", default="lr", choices=["lr", "svm", "moe", "crf"])
    p.add_argument(
        "--task", default="binary", choices=["binary", "multiclass", "implicit", "segmentation"]
    )
    p.add_argument("--features", default="tfidf", choices=["tfidf", "implicit+tfidf"])
    p.add_argument("--tfidf-out", dest="tfidf_out", default=None)
    p.add_argument("--max-features", dest="max_features", type=int, default=50000)
    p.add_argument("--learning-rate", dest="learning_rate", type=float, default=1e-3)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=64)
    p.add_argument("--l2", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--patience", type=int, default=2)
    p.add_argument("--experts", type=int, default=6)
    p.add_argument("--mode", default="hard", choices=["hard", "soft"])
    p.add_argument("--hidden", type=int, default=128)
    p.add_argument("--embed-dim", dest="embed_dim", type=int, default=512)
    p.add_argument("--dropout", type=float, default=0.1)
    p.add_argument("--aux-weight", dest="aux_weight", type=float, default=0.01)
    p.add_argument("--feature-space", dest="feature_space", type=int, default=2**18)
    p.add_argument("--buckets", type=int, default=8)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("detect", help="label documents with a trained model")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--model", required=True)
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("segment", help="decode token labels and boundaries")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--model", required=True)
    p.set_defaults(func=_cmd_segment)

    p = sub.add_parser("evaluate", help="score predictions against gold labels")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--task", required=True, choices=["binary", "multiclass", "segmentation"])
    p.add_argument("--format", default="json", choices=["json", "csv", "markdown"])
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_evaluate)
    return parser


def _apply_config_file(parser: argparse.ArgumentParser, args: argparse.Namespace) -> None:
    """Fill values from --config for any option left at its default."""
    if not args.config:
        return
    with open(_resolve(args.config), encoding="utf-8") as fh:
        overrides = json.load(fh)
    defaults = {}
    for action in parser._subparsers._group_actions[0].choices[args.command]._actions:
        if action.dest != "help":
            defaults[action.dest] = action.default
    for key, value in overrides.items():
        if key in defaults and getattr(args, key, None) == defaults[key]:
            setattr(args, key, value)


def dispatch(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        _apply_config_file(parser, args)
        return args.func(args)
    except PIPELINE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
