"""Command-line pipeline: featurize, train, evaluate and score.

Expensive feature extraction is cached to disk once so training can iterate
quickly, ablation baselines are branch toggles on one code path, and every
command rewrites the fully-resolved config for reproducibility.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import bundles, network, scoring
from .config import BRANCH_ALIASES, RunConfig, apply_overrides, load_config
from .corpus import STANCES, Corpus, load_corpus, load_stance_rows, split
from .embeddings import FallbackEmbedder, MissingEmbeddingError, load_embeddings
from .external import PolarityLexicon, load_lexicon
from .statistical import build_vocabulary, load_vocabulary, save_vocabulary

TRAIN_CACHE = "train.feat"
VAL_CACHE = "val.feat"
TEST_CACHE = "test.feat"
VOCAB_FILE = "vocab.tsv"
HISTORY_FILE = "history.log"
EFFECTIVE_CONFIG = "effective_config.json"


class CommandError(ValueError):
    """A command cannot proceed; the message is user-facing."""


def _require_file(path, what) -> Path:
    if path is None:
        raise CommandError(f"{what} path is not configured")
    p = Path(path)
    if not p.is_file():
        raise CommandError(f"{what} file does not exist: {p}")
    return p


def _make_embedder(config: RunConfig):
    if config.embeddings:
        store = load_embeddings(_require_file(config.embeddings, "embedding store"))
        if store.dimension != config.embedding_dim:
            raise CommandError(
                f"embedding store dimension {store.dimension} does not match "
                f"configured embedding_dim {config.embedding_dim}"
            )
        return store
    return FallbackEmbedder(config.embedding_dim, config.fallback_seed)


def _load_lexicon(config: RunConfig) -> PolarityLexicon:
    if config.lexicon:
        return load_lexicon(_require_file(config.lexicon, "lexicon"))
    return PolarityLexicon()


def _featurize_corpus(corpus: Corpus, config: RunConfig, vocab, lexicon, embedder):
    try:
        return bundles.extract_bundles(
            corpus.pairs,
            branches=config.branch_keys(),
            vocab=vocab,
            lexicon=lexicon,
            embedder=embedder,
        )
    except MissingEmbeddingError as exc:
        raise CommandError(
            f"no embedding for key {exc.args[0]!r}; provide a complete store or "
            "enable --fallback-embedder"
        ) from None


def cmd_featurize(config: RunConfig) -> dict[str, Path]:
    """Split the corpus, build the vocabulary and write per-split caches."""
    config.validate()
    stances = _require_file(config.stances, "stances")
    bodies = _require_file(config.bodies, "bodies")
    cache_dir = Path(config.cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)

    corpus = load_corpus(stances, bodies)
    train_corpus, val_corpus = split(corpus, config.validation_fraction, config.seed)

    branch_keys = config.branch_keys()
    vocab = None
    if {"statistical", "external"} & set(branch_keys):
        vocab = build_vocabulary(train_corpus, config.vocab_capacity)
        save_vocabulary(vocab, cache_dir / VOCAB_FILE)
    lexicon = _load_lexicon(config) if "external" in branch_keys else None
    embedder = _make_embedder(config) if "neural" in branch_keys else None

    written: dict[str, Path] = {}
    for name, part in (("train", train_corpus), ("val", val_corpus)):
        part_bundles = _featurize_corpus(part, config, vocab, lexicon, embedder)
        path = cache_dir / f"{name}.feat"
        bundles.write_cache(path, part_bundles)
        written[name] = path
        print(f"featurize: wrote {len(part_bundles)} {name} bundles to {path}")
    if config.test_stances and config.test_bodies:
        test_corpus = load_corpus(
            _require_file(config.test_stances, "test stances"),
            _require_file(config.test_bodies, "test bodies"),
        )
        test_bundles = _featurize_corpus(test_corpus, config, vocab, lexicon, embedder)
        path = cache_dir / TEST_CACHE
        bundles.write_cache(path, test_bundles)
        written["test"] = path
        print(f"featurize: wrote {len(test_bundles)} test bundles to {path}")
    config.write_effective(cache_dir / EFFECTIVE_CONFIG)
    dims = bundles.read_cache_header(written["train"])[0]
    print("featurize: block dims " + ", ".join(f"{k}={v}" for k, v in dims.items()))
    return written


def _read_split(path) -> tuple[dict[str, np.ndarray], np.ndarray, list[str]]:
    loaded = bundles.read_cache(path)
    inputs, labels, keys = bundles.stack_bundles(loaded)
    if labels is None:
        raise CommandError(f"{path}: cache has no gold labels; cannot train or score on it")
    return inputs, labels, keys


def cmd_train(config: RunConfig) -> Path:
    """Train on the cached features and write the best checkpoint plus history."""
    config.validate()
    cache_dir = Path(config.cache_dir)
    train_path = cache_dir / TRAIN_CACHE
    if not train_path.is_file():
        if config.stances and config.bodies:
            cmd_featurize(config)
        else:
            raise CommandError(f"feature cache {train_path} is missing; run featurize first")
    cache_dims, _ = bundles.read_cache_header(train_path)
    if tuple(cache_dims) != config.branch_keys():
        raise CommandError(
            f"branch toggle mismatch: cache has {tuple(cache_dims)}, "
            f"config enables {config.branch_keys()}"
        )
    train_inputs, train_labels, _ = _read_split(train_path)
    val_inputs = val_labels = None
    val_path = cache_dir / VAL_CACHE
    if val_path.is_file():
        val_inputs, val_labels, _ = _read_split(val_path)

    model = network.build_model(config.model_specs(cache_dims), seed=config.seed)
    train_config = network.TrainConfig(
        batch_size=config.batch_size,
        max_epochs=config.max_epochs,
        patience=config.patience,
        learning_rate=config.learning_rate,
        seed=config.seed,
    )
    model, history = network.train(
        model, train_inputs, train_labels, val_inputs, val_labels, train_config
    )
    checkpoint = config.checkpoint_path()
    checkpoint.parent.mkdir(parents=True, exist_ok=True)
    network.save_checkpoint(model, checkpoint)
    history_path = cache_dir / HISTORY_FILE
    with open(history_path, "w", encoding="utf-8", newline="\n") as fh:
        for row in history:
            fh.write(f"epoch={row.epoch}\ttrain_loss={row.train_loss!r}\tval_score={row.val_score!r}\n")
    config.write_effective(cache_dir / EFFECTIVE_CONFIG)
    best = max((r.val_score for r in history if r.val_score is not None), default=None)
    print(f"train: {len(history)} epochs, best validation score {best}, checkpoint {checkpoint}")
    return checkpoint


def _write_report_files(rep, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.txt").write_text(scoring.format_report(rep), encoding="utf-8")
    (out_dir / "report.kv").write_text(scoring.report_key_values(rep), encoding="utf-8")


def _test_bundles_for(config: RunConfig, model) -> list[bundles.FeatureBundle]:
    cache_dir = Path(config.cache_dir)
    test_path = cache_dir / TEST_CACHE
    if test_path.is_file():
        return bundles.read_cache(test_path)
    test_corpus = load_corpus(
        _require_file(config.test_stances, "test stances"),
        _require_file(config.test_bodies, "test bodies"),
    )
    if not test_corpus.pairs:
        raise CommandError("test input is empty; nothing to evaluate")
    branch_keys = model.branch_names
    vocab = None
    if {"statistical", "external"} & set(branch_keys):
        vocab_path = cache_dir / VOCAB_FILE
        if not vocab_path.is_file():
            raise CommandError(f"vocabulary cache {vocab_path} is missing; run featurize first")
        vocab = load_vocabulary(vocab_path)
    lexicon = _load_lexicon(config) if "external" in branch_keys else None
    embedder = _make_embedder(config) if "neural" in branch_keys else None
    try:
        return bundles.extract_bundles(
            test_corpus.pairs, branches=branch_keys, vocab=vocab, lexicon=lexicon,
            embedder=embedder,
        )
    except MissingEmbeddingError as exc:
        raise CommandError(
            f"no embedding for key {exc.args[0]!r}; provide a complete store or "
            "enable --fallback-embedder"
        ) from None


def cmd_evaluate(config: RunConfig, out_dir=None, confusion_file=None) -> scoring.EvalReport:
    """Predict on the labeled test set and emit predictions plus both reports.

    With ``confusion_file`` the command skips prediction entirely and reports
    on a stored confusion matrix.
    """
    config.validate()
    out = Path(out_dir) if out_dir else Path(config.cache_dir)
    if confusion_file:
        cm = scoring.load_confusion(_require_file(confusion_file, "confusion matrix"))
        rep = scoring.report_from_confusion(cm)
        _write_report_files(rep, out)
        print(scoring.format_report(rep), end="")
        return rep

    model = network.load_checkpoint(_require_file(config.checkpoint_path(), "checkpoint"))
    test_bundles = _test_bundles_for(config, model)
    if not test_bundles:
        raise CommandError("test input is empty; nothing to evaluate")
    inputs, labels, keys = bundles.stack_bundles(test_bundles)
    if labels is None:
        raise CommandError("test cache has no gold labels; cannot evaluate")
    model_dims = model.input_dims()
    bundle_dims = {k: v.shape[1] for k, v in inputs.items()}
    if bundle_dims != model_dims:
        raise CommandError(
            f"checkpoint/feature dimension mismatch: model {model_dims}, features {bundle_dims}"
        )
    pred_idx = network.predict_indices(model, inputs)
    golds = [STANCES[i] for i in labels]
    preds = [STANCES[i] for i in pred_idx]
    rep = scoring.report(golds, preds)

    out.mkdir(parents=True, exist_ok=True)
    with open(out / "predictions.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["Headline", "Body ID", "Stance"])
        for key, stance in zip(keys, preds):
            body_id, _, headline = key.partition("::")
            writer.writerow([headline, body_id, stance.value])
    _write_report_files(rep, out)
    config.write_effective(Path(config.cache_dir) / EFFECTIVE_CONFIG)
    print(scoring.format_report(rep), end="")
    return rep


def cmd_score(gold_csv, pred_csv, out_dir=".") -> scoring.EvalReport:
    """Standalone scorer over two stance CSVs keyed by (Headline, Body ID)."""
    gold_rows = load_stance_rows(_require_file(gold_csv, "gold"))
    pred_rows = load_stance_rows(_require_file(pred_csv, "predictions"))
    if not gold_rows:
        raise CommandError("gold file contains no rows")
    pred_map = {}
    for headline, body_id, stance in pred_rows:
        key = (headline, body_id)
        if key in pred_map:
            raise CommandError(f"predictions contain duplicate key {key!r}")
        pred_map[key] = stance
    golds, preds = [], []
    seen = set()
    for headline, body_id, stance in gold_rows:
        key = (headline, body_id)
        if key in seen:
            raise CommandError(f"gold file contains duplicate key {key!r}")
        seen.add(key)
        if key not in pred_map:
            raise CommandError(f"prediction missing for key {key!r}")
        golds.append(stance)
        preds.append(pred_map.pop(key))
    if pred_map:
        extra = next(iter(pred_map))
        raise CommandError(f"prediction file has extra key {extra!r}")
    rep = scoring.report(golds, preds)
    _write_report_files(rep, Path(out_dir))
    print(scoring.format_report(rep), end="")
    return rep


def _add_common_flags(parser):
    parser.add_argument("--config", help="JSON run-config file; flags override it")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--cache-dir")
    parser.add_argument("--checkpoint")
    parser.add_argument("--branches", help="comma list from neural,stat,ext")
    parser.add_argument(
        "--fallback-embedder",
        nargs="?",
        const="",
        metavar="seed=<int>",
        help="use the deterministic fallback embedder instead of a stored file",
    )


def _parse_branches(raw):
    if raw is None:
        return None
    names = tuple(part.strip() for part in raw.split(",") if part.strip())
    for name in names:
        if name not in BRANCH_ALIASES:
            raise CommandError(f"unknown branch {name!r} in --branches")
    return names


def _resolve_config(args) -> RunConfig:
    config = load_config(args.config) if args.config else RunConfig()
    overrides = {
        "seed": args.seed,
        "cache_dir": getattr(args, "cache_dir", None),
        "checkpoint": getattr(args, "checkpoint", None),
        "branches": _parse_branches(getattr(args, "branches", None)),
    }
    for attr, key in (
        ("stances", "stances"),
        ("bodies", "bodies"),
        ("test_stances", "test_stances"),
        ("test_bodies", "test_bodies"),
        ("embeddings", "embeddings"),
        ("lexicon", "lexicon"),
        ("validation_fraction", "validation_fraction"),
        ("vocab_capacity", "vocab_capacity"),
        ("embedding_dim", "embedding_dim"),
        ("learning_rate", "learning_rate"),
        ("batch_size", "batch_size"),
        ("max_epochs", "max_epochs"),
        ("patience", "patience"),
    ):
        if hasattr(args, attr):
            overrides[key] = getattr(args, attr)
    config = apply_overrides(config, overrides)
    fallback = getattr(args, "fallback_embedder", None)
    if fallback is not None:
        config = apply_overrides(config, {})
        config.embeddings = None
        if fallback:
            field, _, value = fallback.partition("=")
            if field != "seed" or not value:
                raise CommandError("--fallback-embedder expects the form seed=<int>")
            config.fallback_seed = int(value)
    config.validate()
    return config


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stancefusion",
        description="Stance classification of headline-body news pairs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("featurize", help="extract and cache per-split feature bundles")
    _add_common_flags(p)
    p.add_argument("--stances")
    p.add_argument("--bodies")
    p.add_argument("--test-stances", dest="test_stances")
    p.add_argument("--test-bodies", dest="test_bodies")
    p.add_argument("--embeddings")
    p.add_argument("--lexicon")
    p.add_argument("--validation-fraction", dest="validation_fraction", type=float)
    p.add_argument("--vocab-capacity", dest="vocab_capacity", type=int)
    p.add_argument("--embedding-dim", dest="embedding_dim", type=int)

    p = sub.add_parser("train", help="train the fusion model on cached features")
    _add_common_flags(p)
    p.add_argument("--stances")
    p.add_argument("--bodies")
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--max-epochs", dest="max_epochs", type=int)
    p.add_argument("--patience", type=int)

    p = sub.add_parser("evaluate", help="predict on the test set and write reports")
    _add_common_flags(p)
    p.add_argument("--test-stances", dest="test_stances")
    p.add_argument("--test-bodies", dest="test_bodies")
    p.add_argument("--embeddings")
    p.add_argument("--lexicon")
    p.add_argument("--embedding-dim", dest="embedding_dim", type=int)
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument(
        "--confusion-file",
        dest="confusion_file",
        help="report-only mode: score a stored 4x4 confusion matrix",
    )

    p = sub.add_parser("score", help="score a predictions CSV against a gold CSV")
    p.add_argument("gold")
    p.add_argument("predictions")
    p.add_argument("--out-dir", dest="out_dir", default=".")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "featurize":
            cmd_featurize(_resolve_config(args))
        elif args.command == "train":
            cmd_train(_resolve_config(args))
        elif args.command == "evaluate":
            cmd_evaluate(
                _resolve_config(args),
                out_dir=args.out_dir,
                confusion_file=args.confusion_file,
            )
        elif args.command == "score":
            cmd_score(args.gold, args.predictions, out_dir=args.out_dir)
        else:  # pragma: no cover - argparse enforces the choices
            parser.error(f"unknown command {args.command!r}")
    except Exception as exc:  # noqa: BLE001 - every failure must exit nonzero
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
