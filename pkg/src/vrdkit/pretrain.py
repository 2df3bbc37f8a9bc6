"""Unsupervised fine-tuning on unlabeled documents: dynamic masked language
modeling, four-way positional-relationship classification of adjacent box
pairs (SPRC), and the sequential MLM -> SPRC -> supervised pipeline."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .docmodel import Vocabulary, build_vocab, merge_close_boxes, tokenize
from .layoutgraph import SPRC_LABELS, balance_sprc_pairs, chunk_page, extract_sprc_pairs
from .nncore import (
    AdamState,
    Parameter,
    adam_step,
    linear,
    no_grad,
    save_checkpoint,
    softmax_cross_entropy,
    zero_grads,
)
from .textencoder import (
    EncoderConfig,
    dynamic_mask,
    encode,
    encode_pair,
    init_encoder_params,
    init_mlm_head,
    mlm_loss,
    perplexity,
)
from .util import rng_for, stable_hash

logger = logging.getLogger(__name__)

SPRC_LABEL_IDS = {label: i for i, label in enumerate(SPRC_LABELS)}


@dataclass(frozen=True)
class SprcExample:
    """Tokenized ordered box pair; the encoder frames it as CLS a SEP b SEP."""

    ids_a: tuple[int, ...]
    ids_b: tuple[int, ...]
    label: int
    key: str  # stable identity used for the train/val split


@dataclass(frozen=True)
class PretrainReport:
    stage: str
    epochs: int
    epoch_losses: tuple[float, ...]
    final_metric_name: str
    final_metric_value: float
    checkpoint: str | None = None

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "epochs": self.epochs,
            "epoch_losses": list(self.epoch_losses),
            "final_metric_name": self.final_metric_name,
            "final_metric_value": self.final_metric_value,
            "checkpoint": self.checkpoint,
        }


@dataclass(frozen=True)
class PretrainOptions:
    encoder_dim: int = 64
    encoder_layers: int = 2
    encoder_heads: int = 4
    encoder_ffn: int = 128
    max_seq_len: int = 50
    dropout: float = 0.1
    merge_eps: float = 1.0
    eps_align: float = 1.0
    max_nodes: int = 100
    vocab_min_freq: int = 2
    lr_encoder: float = 1e-3
    lr_head: float = 1e-3
    batch_size: int = 8
    mlm_epochs: int = 30
    mlm_mask_ratio: float = 0.15
    sprc_epochs: int = 15
    sprc_epochs_initialized: int = 18  # when starting from MLM weights
    sprc_balance_ratio: float | None = None  # 0.1 in resume mode
    max_examples: int | None = None  # desk-scale cap on pretraining examples
    holdout_fraction: float = 0.1
    seed: int = 0

    def encoder_config(self, vocab_size: int) -> EncoderConfig:
        return EncoderConfig(
            vocab_size=vocab_size,
            hidden_dim=self.encoder_dim,
            num_layers=self.encoder_layers,
            num_heads=self.encoder_heads,
            ffn_dim=self.encoder_ffn,
            max_seq_len=self.max_seq_len,
            dropout=self.dropout,
        )


def _prepared_pages(docs, options: PretrainOptions):
    for doc in docs:
        for page in doc.pages:
            merged = merge_close_boxes(page, options.merge_eps)
            if not merged.boxes:
                continue
            for chunk in chunk_page(merged, options.max_nodes):
                yield doc.doc_id, chunk


def _holdout(key: str, options: PretrainOptions) -> bool:
    buckets = max(int(round(1.0 / options.holdout_fraction)), 2)
    return stable_hash("holdout", key) % buckets == 0


# ---------------------------------------------------------------------------
# SPRC dataset and model


def build_sprc_dataset(docs, vocab: Vocabulary, options: PretrainOptions):
    """Tokenized ordered pair examples from every page's adjacency edges,
    optionally balanced, split 90/10 into train/held-out by stable hashing."""
    half = (options.max_seq_len - 3) // 2
    pairs_with_ctx = []
    for doc_id, page in _prepared_pages(docs, options):
        by_id = {b.box_id: b for b in page.boxes}
        for pair in extract_sprc_pairs(page, options.eps_align):
            pairs_with_ctx.append((doc_id, page.page_no, by_id, pair))
    if options.sprc_balance_ratio is not None:
        pairs = [p for *_, p in pairs_with_ctx]
        kept = balance_sprc_pairs(pairs, options.sprc_balance_ratio, options.seed)
        kept_ids = set(map(id, kept))
        pairs_with_ctx = [row for row in pairs_with_ctx if id(row[3]) in kept_ids]
    examples = []
    for doc_id, page_no, by_id, pair in pairs_with_ctx:
        ids_a = tuple(vocab.encode_tokens(tokenize(by_id[pair.box_a].text))[:half])
        ids_b = tuple(vocab.encode_tokens(tokenize(by_id[pair.box_b].text))[:half])
        key = f"{doc_id}|{page_no}|{pair.box_a}|{pair.box_b}|{pair.label}"
        examples.append(SprcExample(ids_a, ids_b, SPRC_LABEL_IDS[pair.label], key))
    if not examples:
        raise ValueError("corpus yields no strictly adjacent pairs")
    if options.max_examples is not None and len(examples) > options.max_examples:
        order = rng_for(options.seed, "sprc-cap").permutation(len(examples))
        keep = sorted(int(i) for i in order[: options.max_examples])
        examples = [examples[i] for i in keep]
    train = [e for e in examples if not _holdout(e.key, options)]
    val = [e for e in examples if _holdout(e.key, options)]
    return train, val


def init_sprc_head(cfg: EncoderConfig, rng, prefix: str = "sprc.") -> dict[str, Parameter]:
    W = Parameter(prefix + "W", rng.normal(0.0, 0.02, size=(cfg.hidden_dim, len(SPRC_LABELS))))
    b = Parameter(prefix + "b", np.zeros(len(SPRC_LABELS)))
    return {W.name: W, b.name: b}


def sprc_forward(example: SprcExample, params, cfg: EncoderConfig, train_flag=False, rng=None):
    """Four logits over {left-right, right-left, up-down, down-up}."""
    out = encode_pair(example.ids_a, example.ids_b, params, cfg, train_flag, rng)
    return linear(out.cls_vector, params["sprc.W"], params["sprc.b"])


# ---------------------------------------------------------------------------
# MLM corpus


def _mlm_sequences(docs, vocab: Vocabulary, options: PretrainOptions):
    """Concatenate each page's box texts in reading order and cut into
    sequences that fit the encoder budget."""
    budget = options.max_seq_len - 2
    sequences = []
    for doc_id, page in _prepared_pages(docs, options):
        ids: list[int] = []
        for box in page.boxes:
            ids.extend(vocab.encode_tokens(tokenize(box.text)))
        for k in range(0, len(ids), budget):
            chunk = ids[k : k + budget]
            if chunk:
                sequences.append((f"{doc_id}|{page.page_no}|{k}", chunk))
    if not sequences:
        raise ValueError("corpus yields no MLM sequences")
    if options.max_examples is not None and len(sequences) > options.max_examples:
        order = rng_for(options.seed, "mlm-cap").permutation(len(sequences))
        keep = sorted(int(i) for i in order[: options.max_examples])
        sequences = [sequences[i] for i in keep]
    return sequences


def run_mlm(docs, options: PretrainOptions, init_params=None, vocabulary=None, checkpoint_path=None):
    """Train encoder + MLM head with dynamic masking; report held-out perplexity.

    Returns (params, vocab, PretrainReport). The mask pattern is resampled
    every epoch; the held-out metric uses a fixed evaluation mask.
    """
    if not docs:
        raise ValueError("empty corpus")
    vocab = vocabulary or build_vocab(docs, options.vocab_min_freq)
    cfg = options.encoder_config(len(vocab))
    rng = rng_for(options.seed, "mlm-init")
    params = dict(init_params) if init_params else init_encoder_params(cfg, rng)
    params.update(init_mlm_head(cfg, rng_for(options.seed, "mlm-head")))
    sequences = _mlm_sequences(docs, vocab, options)
    train = [s for s in sequences if not _holdout(s[0], options)]
    held = [s for s in sequences if _holdout(s[0], options)]
    if not train or not held:
        train, held = sequences, sequences[:1]
    adam = AdamState(lr=options.lr_head, group_lrs={"enc.": options.lr_encoder})
    drop_rng = rng_for(options.seed, "mlm-dropout")

    def sequence_loss(key, ids, mask_seed, train_flag):
        masked, positions, originals = dynamic_mask(
            ids, mask_seed, options.mlm_mask_ratio, vocab_size=len(vocab)
        )
        if not positions:
            return None  # nothing masked: the sample is skipped
        out = encode(masked, params, cfg, train_flag, drop_rng if train_flag else None)
        return mlm_loss(out, positions, originals, params)

    losses = []
    for epoch in range(options.mlm_epochs):
        order = rng_for(options.seed, "mlm-order", epoch).permutation(len(train))
        total, used, pending = 0.0, 0, 0
        zero_grads(params)
        for idx in order:
            key, ids = train[int(idx)]
            loss = sequence_loss(key, ids, stable_hash(options.seed, "mask", epoch, key), True)
            if loss is None:
                continue
            total += loss.item()
            (loss * (1.0 / options.batch_size)).backward()
            used += 1
            pending += 1
            if pending == options.batch_size:
                adam_step(params, adam)
                pending = 0
        if pending:
            adam_step(params, adam)
        losses.append(total / max(used, 1))
        logger.debug("mlm epoch %d loss %.4f", epoch, losses[-1])

    with no_grad():
        held_total, held_used = 0.0, 0
        for key, ids in held:
            loss = sequence_loss(key, ids, stable_hash(options.seed, "eval-mask", key), False)
            if loss is not None:
                held_total += loss.item()
                held_used += 1
    ppl = perplexity(held_total / max(held_used, 1))
    report = PretrainReport(
        stage="mlm",
        epochs=options.mlm_epochs,
        epoch_losses=tuple(losses),
        final_metric_name="perplexity",
        final_metric_value=ppl,
        checkpoint=str(checkpoint_path) if checkpoint_path else None,
    )
    if checkpoint_path is not None:
        save_checkpoint(checkpoint_path, params, {"kind": "vrdkit-pretrain", "stage": "mlm", "vocab": vocab.to_list()})
    return params, vocab, report


def run_sprc(docs, options: PretrainOptions, init_params=None, vocabulary=None, checkpoint_path=None):
    """Train encoder + SPRC head on adjacent-pair classification; report
    held-out accuracy. MLM-initialized runs default to the longer epoch count."""
    if not docs:
        raise ValueError("empty corpus")
    vocab = vocabulary or build_vocab(docs, options.vocab_min_freq)
    cfg = options.encoder_config(len(vocab))
    rng = rng_for(options.seed, "sprc-init")
    initialized = init_params is not None
    params = dict(init_params) if initialized else init_encoder_params(cfg, rng)
    params = {k: v for k, v in params.items() if k.startswith("enc.")}
    params.update(init_sprc_head(cfg, rng_for(options.seed, "sprc-head")))
    train, val = build_sprc_dataset(docs, vocab, options)
    if not val:
        raise ValueError("SPRC held-out split is empty")
    epochs = options.sprc_epochs_initialized if initialized else options.sprc_epochs
    adam = AdamState(lr=options.lr_head, group_lrs={"enc.": options.lr_encoder})
    drop_rng = rng_for(options.seed, "sprc-dropout")

    losses = []
    for epoch in range(epochs):
        order = rng_for(options.seed, "sprc-order", epoch).permutation(len(train))
        total, pending = 0.0, 0
        zero_grads(params)
        for idx in order:
            ex = train[int(idx)]
            logits = sprc_forward(ex, params, cfg, True, drop_rng)
            loss = softmax_cross_entropy(logits, np.array(ex.label))
            total += loss.item()
            (loss * (1.0 / options.batch_size)).backward()
            pending += 1
            if pending == options.batch_size:
                adam_step(params, adam)
                pending = 0
        if pending:
            adam_step(params, adam)
        losses.append(total / max(len(train), 1))
        logger.debug("sprc epoch %d loss %.4f", epoch, losses[-1])

    with no_grad():
        correct = sum(
            1
            for ex in val
            if int(sprc_forward(ex, params, cfg).data.argmax()) == ex.label
        )
    accuracy = correct / len(val)
    report = PretrainReport(
        stage="mlm-sprc" if initialized else "sprc",
        epochs=epochs,
        epoch_losses=tuple(losses),
        final_metric_name="accuracy",
        final_metric_value=accuracy,
        checkpoint=str(checkpoint_path) if checkpoint_path else None,
    )
    if checkpoint_path is not None:
        save_checkpoint(checkpoint_path, params, {"kind": "vrdkit-pretrain", "stage": report.stage, "vocab": vocab.to_list()})
    return params, vocab, report


# ---------------------------------------------------------------------------
# Full pipeline


def pipeline(
    stages,
    unlabeled_docs,
    train_docs,
    val_docs,
    extractor_options,
    pretrain_options: PretrainOptions,
    vocabulary=None,
):
    """Chain the unsupervised stages, then supervised training.

    Stage order must put MLM before SPRC. Only encoder weights flow between
    stages; every stage head is discarded. Returns (model, history, reports).
    """
    from .extractor import train_supervised

    stages = [s.lower() for s in stages]
    if any(s not in ("mlm", "sprc") for s in stages):
        raise ValueError(f"unknown pretraining stage in {stages}")
    if len(stages) != len(set(stages)):
        raise ValueError("duplicate pretraining stages")
    if "mlm" in stages and "sprc" in stages and stages.index("mlm") > stages.index("sprc"):
        raise ValueError("stage order must be MLM before SPRC")
    if stages and not unlabeled_docs:
        raise ValueError("pretraining stages require unlabeled documents")

    vocab = vocabulary
    if stages and vocab is None:
        vocab = build_vocab(list(unlabeled_docs) + list(train_docs), pretrain_options.vocab_min_freq)
    params = None
    reports = []
    for stage in stages:
        if stage == "mlm":
            params, vocab, report = run_mlm(unlabeled_docs, pretrain_options, params, vocab)
        else:
            params, vocab, report = run_sprc(unlabeled_docs, pretrain_options, params, vocab)
        reports.append(report)
    encoder_only = {k: v for k, v in params.items() if k.startswith("enc.")} if params else None
    model, history = train_supervised(
        train_docs, val_docs, extractor_options, init_params=encoder_only, vocabulary=vocab
    )
    return model, history, reports
