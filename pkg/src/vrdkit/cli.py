"""Command-line entry point: gen-corpus, build-graph, pretrain, train, eval,
fewshot, ablate. Every command is idempotent given the same config and seed."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, load_config, make_config
from .docmodel import CorpusError, parse_corpus, serialize_corpus
from .util import atomic_write_text, stable_json

logger = logging.getLogger("vrdkit")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="JSON run config file")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--preset", choices=("desk", "paper"), help="model preset")
    parser.add_argument("--task", choices=("invoice", "resume"), help="corpus kind")
    parser.add_argument("--out", type=Path, help="output directory")
    parser.add_argument("--workers", type=int, help="parallelism cap for evaluation")


def _resolve(args, extra: dict | None = None) -> RunConfig:
    overrides = {
        "seed": args.seed,
        "preset": args.preset,
        "task": args.task,
        "out_dir": str(args.out) if args.out else None,
        "workers": args.workers,
    }
    overrides.update(extra or {})
    if args.config:
        cfg = load_config(args.config, overrides)
    else:
        cfg = make_config({}, overrides)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    atomic_write_text(out / f"resolved_config_{args.command.replace('-', '_')}.json", stable_json(cfg.to_dict()))
    logger.info("resolved config: %s", json.dumps(cfg.to_dict(), sort_keys=True))
    return cfg


def _generator_spec(cfg: RunConfig):
    from . import synthcorpus as sc

    if cfg.task == "invoice":
        return sc.GeneratorSpec(
            kind="invoice",
            num_docs=cfg.num_docs,
            templates=sc.make_invoice_templates(cfg.num_templates),
            seed=cfg.seed,
            price_candidates=cfg.price_candidates,
        )
    return sc.GeneratorSpec(
        kind="resume",
        num_docs=cfg.num_docs,
        templates=sc.make_resume_templates(cfg.num_templates),
        seed=cfg.seed,
        decoys_per_page=cfg.decoys_per_page,
    )


def _estimator(cfg: RunConfig, init_checkpoint=None, vocabulary=None):
    from .estimator import VrdExtractor
    from .extractor import ExtractorOptions

    keys = set(ExtractorOptions.__dataclass_fields__)
    params = {k: getattr(cfg, k) for k in keys if hasattr(cfg, k)}
    return VrdExtractor(init_checkpoint=init_checkpoint, vocabulary=vocabulary, **params)


def _pretrain_options(cfg: RunConfig):
    from .pretrain import PretrainOptions

    return PretrainOptions(
        encoder_dim=cfg.encoder_dim,
        encoder_layers=cfg.encoder_layers,
        encoder_heads=cfg.encoder_heads,
        encoder_ffn=cfg.encoder_ffn,
        max_seq_len=cfg.max_seq_len,
        dropout=cfg.dropout,
        merge_eps=cfg.merge_eps,
        eps_align=cfg.eps_align,
        max_nodes=cfg.max_nodes,
        vocab_min_freq=cfg.vocab_min_freq,
        lr_encoder=cfg.lr_encoder,
        lr_head=cfg.lr_head,
        batch_size=cfg.pretrain_batch_size,
        mlm_epochs=cfg.mlm_epochs,
        mlm_mask_ratio=cfg.mlm_mask_ratio,
        sprc_epochs=cfg.sprc_epochs,
        sprc_epochs_initialized=cfg.sprc_epochs_initialized,
        sprc_balance_ratio=cfg.sprc_balance_ratio or None,
        max_examples=cfg.pretrain_max_examples or None,
        holdout_fraction=cfg.holdout_fraction,
        seed=cfg.seed,
    )


def _corpus_paths(cfg: RunConfig, args) -> tuple[Path, Path]:
    corpus = Path(args.corpus) if getattr(args, "corpus", None) else Path(cfg.out_dir) / "corpus.jsonl"
    manifest = Path(args.manifest) if getattr(args, "manifest", None) else Path(cfg.out_dir) / "manifest.json"
    for path in (corpus, manifest):
        if not path.exists():
            raise FileNotFoundError(f"required input not found: {path}")
    return corpus, manifest


def _load_split(cfg: RunConfig, args):
    from .synthcorpus import load_split

    corpus, manifest = _corpus_paths(cfg, args)
    return load_split(corpus, manifest)


def _train_val_test(cfg: RunConfig, split):
    from .synthcorpus import split_train_val_test

    return split_train_val_test(split.labeled_seen, cfg.train_fraction, cfg.val_fraction, cfg.seed)


# ---------------------------------------------------------------------------
# Commands


def cmd_gen_corpus(args) -> int:
    from . import synthcorpus as sc

    cfg = _resolve(args)
    docs = sc.generate(_generator_spec(cfg))
    split = sc.split_corpus(
        docs,
        cfg.unseen_templates,
        {
            "labeled": cfg.fraction_labeled,
            "unlabeled": cfg.fraction_unlabeled,
            "unseen_test": cfg.unseen_test_fraction,
        },
        cfg.seed,
    )
    out = Path(cfg.out_dir)
    serialize_corpus(docs, out / "corpus.jsonl")
    atomic_write_text(out / "manifest.json", stable_json(split.manifest()))
    logger.info(
        "wrote %d docs (%d labeled_seen / %d unseen test / %d unlabeled / %d few-shot)",
        len(docs), len(split.labeled_seen), len(split.labeled_unseen), len(split.unlabeled), len(split.few_shot),
    )
    return 0


def cmd_build_graph(args) -> int:
    from .docmodel import merge_close_boxes
    from .layoutgraph import add_section_title_edges, build_adjacency_edges, chunk_page, graph_to_record, rank_fonts

    cfg = _resolve(args)
    corpus = Path(args.corpus) if args.corpus else Path(cfg.out_dir) / "corpus.jsonl"
    if not corpus.exists():
        raise FileNotFoundError(f"required input not found: {corpus}")
    lines = []
    for doc in parse_corpus(corpus):
        from dataclasses import replace as dc_replace

        merged = [merge_close_boxes(p, cfg.merge_eps) for p in doc.pages]
        ranks = rank_fonts(dc_replace(doc, pages=tuple(merged)), cfg.max_font_ranks)
        for page in merged:
            if not page.boxes:
                continue
            for chunk in chunk_page(page, cfg.max_nodes):
                graph = build_adjacency_edges(chunk, cfg.eps_align)
                if cfg.use_section_edges:
                    graph = add_section_title_edges(chunk, graph)
                lines.append(json.dumps(graph_to_record(doc.doc_id, chunk, graph, ranks), sort_keys=True))
    out_path = Path(cfg.out_dir) / "graphs.jsonl"
    atomic_write_text(out_path, "\n".join(lines) + "\n")
    logger.info("wrote %d page graphs to %s", len(lines), out_path)
    return 0


def cmd_pretrain(args) -> int:
    from .docmodel import build_vocab
    from .pretrain import run_mlm, run_sprc

    cfg = _resolve(args)
    split = _load_split(cfg, args)
    stages = [s.strip().lower() for s in args.stages.split(",") if s.strip()]
    if not stages:
        raise ConfigError("--stages must name at least one of mlm,sprc")
    if stages != sorted(stages, key=("mlm", "sprc").index):
        raise ConfigError("stage order must be MLM before SPRC")
    options = _pretrain_options(cfg)
    train_docs, _, _ = _train_val_test(cfg, split)
    vocab = build_vocab(list(split.unlabeled) + list(train_docs), cfg.vocab_min_freq)
    out = Path(cfg.out_dir)
    params = None
    for stage in stages:
        ckpt = out / f"pretrain_{stage}.npz"
        if stage == "mlm":
            params, vocab, report = run_mlm(split.unlabeled, options, params, vocab, ckpt)
        else:
            params, vocab, report = run_sprc(split.unlabeled, options, params, vocab, ckpt)
        atomic_write_text(out / f"pretrain_{stage}_metrics.json", stable_json(report.to_dict()))
        logger.info("stage %s: %s=%.4f", stage, report.final_metric_name, report.final_metric_value)
    return 0


def cmd_train(args) -> int:
    cfg = _resolve(args)
    split = _load_split(cfg, args)
    train_docs, val_docs, test_docs = _train_val_test(cfg, split)
    est = _estimator(cfg, init_checkpoint=args.init)
    est.fit(train_docs, validation=val_docs)
    out = Path(cfg.out_dir)
    model_path = out / "model.npz"
    est.save(model_path)
    metrics = {
        "train_docs": len(train_docs),
        "history": est.history_,
        "seen_test": est.evaluate(test_docs) if test_docs else None,
        "unseen_test": est.evaluate(list(split.labeled_unseen)) if split.labeled_unseen else None,
        "model": str(model_path),
    }
    atomic_write_text(out / "train_metrics.json", stable_json(metrics))
    if metrics["seen_test"]:
        logger.info("seen-test micro F1: %.4f", metrics["seen_test"]["micro"]["f1"])
    return 0


def _load_model_arg(path) -> "VrdExtractor":
    from .estimator import VrdExtractor

    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"required input not found: {path}")
    return VrdExtractor.load(path)


def cmd_eval(args) -> int:
    cfg = _resolve(args)
    split = _load_split(cfg, args)
    est = _load_model_arg(args.model)
    if args.split == "seen_test":
        _, _, docs = _train_val_test(cfg, split)
    elif args.split == "unseen_test":
        docs = list(split.labeled_unseen)
    elif args.split == "val":
        _, docs, _ = _train_val_test(cfg, split)
    else:
        raise ConfigError(f"unknown eval split {args.split!r}")
    if not docs:
        raise ConfigError(f"eval split {args.split!r} is empty")
    report = est.evaluate(docs)
    atomic_write_text(Path(cfg.out_dir) / f"eval_{args.split}_metrics.json", stable_json(report))
    logger.info("%s micro F1: %.4f", args.split, report["micro"]["f1"])
    return 0


def cmd_fewshot(args) -> int:
    from .evalkit import fewshot

    cfg = _resolve(args)
    split = _load_split(cfg, args)
    est = _load_model_arg(args.model)
    sizes = tuple(int(s) for s in args.sizes.split(",")) if args.sizes else cfg.fewshot_sizes
    curve = fewshot(
        est.model_,
        list(split.few_shot),
        list(split.labeled_unseen),
        sizes=sizes,
        seeds=cfg.fewshot_seeds,
        epochs=cfg.fewshot_epochs,
        out_path=Path(cfg.out_dir) / "fewshot_curve.json",
        workers=cfg.workers,
    )
    logger.info("few-shot means: %s", {s: round(curve.mean_f1(s), 4) for s in sizes})
    return 0


def cmd_ablate(args) -> int:
    from .evalkit import ablate

    cfg = _resolve(args)
    split = _load_split(cfg, args)
    train_docs, val_docs, test_docs = _train_val_test(cfg, split)
    switches = [s.strip() for s in args.switches.split(",")] if args.switches else list(cfg.ablate_switches)
    result = ablate(
        _estimator(cfg),
        train_docs,
        val_docs,
        test_docs,
        switches,
        seeds=cfg.ablate_seeds,
        out_path=Path(cfg.out_dir) / "ablation.json",
    )
    for row in result["rows"]:
        logger.info("%s seed=%d f1=%.4f", row["variant"], row["seed"], row["f1"])
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vrdkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-corpus", help="generate a synthetic corpus and split manifest")
    _add_common(p)
    p.set_defaults(func=cmd_gen_corpus)

    p = sub.add_parser("build-graph", help="dump per-page layout graphs")
    _add_common(p)
    p.add_argument("--corpus", type=Path)
    p.set_defaults(func=cmd_build_graph)

    p = sub.add_parser("pretrain", help="unsupervised fine-tuning stages")
    _add_common(p)
    p.add_argument("--corpus", type=Path)
    p.add_argument("--manifest", type=Path)
    p.add_argument("--stages", default="mlm,sprc", help="comma list drawn from mlm,sprc")
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("train", help="supervised training")
    _add_common(p)
    p.add_argument("--corpus", type=Path)
    p.add_argument("--manifest", type=Path)
    p.add_argument("--init", type=Path, help="pretraining checkpoint to initialize from")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained model on a split")
    _add_common(p)
    p.add_argument("--corpus", type=Path)
    p.add_argument("--manifest", type=Path)
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--split", default="seen_test", choices=("seen_test", "unseen_test", "val"))
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("fewshot", help="few-shot fine-tuning curve on unseen templates")
    _add_common(p)
    p.add_argument("--corpus", type=Path)
    p.add_argument("--manifest", type=Path)
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--sizes", help="comma list of training-set sizes")
    p.set_defaults(func=cmd_fewshot)

    p = sub.add_parser("ablate", help="graph-module ablation grid")
    _add_common(p)
    p.add_argument("--corpus", type=Path)
    p.add_argument("--manifest", type=Path)
    p.add_argument("--switches", help="comma list; combine switches with '+'")
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, CorpusError, FileNotFoundError, ValueError) as exc:
        print(json.dumps({"error": type(exc).__name__, "detail": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
