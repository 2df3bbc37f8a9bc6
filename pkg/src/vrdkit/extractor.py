"""Supervised entity extraction: encoder token states concatenated with GCN
node states, a linear BIO tagging head, end-to-end training, and span decoding."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .docmodel import (
    Document,
    Page,
    TokenSequence,
    Vocabulary,
    build_vocab,
    merge_close_boxes,
    project_labels,
    repair_bio,
    tags_to_spans,
    tokenize,
)
from .layoutgraph import (
    ADJACENCY,
    SECTION_TITLE,
    FontRankTable,
    PageGraph,
    add_section_title_edges,
    build_adjacency_edges,
    chunk_page,
    rank_fonts,
)
from .layoutgcn import GcnConfig, gcn_forward, init_gcn_params, neighbor_matrices, node_init
from .nncore import (
    AdamState,
    Parameter,
    Tensor,
    adam_step,
    broadcast_to,
    concat,
    linear,
    load_checkpoint,
    no_grad,
    reshape,
    save_checkpoint,
    softmax_cross_entropy,
    zero_grads,
)
from .textencoder import EncoderConfig, encode_boxes, frame_rows, init_encoder_params
from .util import rng_for

logger = logging.getLogger(__name__)


class TagSet:
    """BIO tag inventory with a stable id order: O first, then B-/I- per type."""

    def __init__(self, entity_types):
        self.entity_types = tuple(sorted(set(entity_types)))
        self.tags = ("O",) + tuple(
            prefix + t for t in self.entity_types for prefix in ("B-", "I-")
        )
        self.tag_to_id = {t: i for i, t in enumerate(self.tags)}

    def __len__(self):
        return len(self.tags)

    def id_of(self, tag: str) -> int:
        return self.tag_to_id[tag]

    def tag_of(self, tag_id: int) -> str:
        return self.tags[tag_id]

    @classmethod
    def from_documents(cls, docs) -> "TagSet":
        types = {
            s.entity_type for d in docs for p in d.pages for b in p.boxes for s in b.spans
        }
        if not types:
            raise ValueError("no entity spans found in the labeled documents")
        return cls(types)


@dataclass(frozen=True)
class ExtractorOptions:
    """Every knob of the extraction model and its training loop."""

    use_gcn: bool = True
    use_section_edges: bool = False
    use_font_features: bool = True
    use_skip_connections: bool = True
    encoder_dim: int = 64
    encoder_layers: int = 2
    encoder_heads: int = 4
    encoder_ffn: int = 128
    max_seq_len: int = 50
    dropout: float = 0.1
    gcn_hidden: int = 64
    gcn_layers: int = 2
    font_dim: int = 8
    max_font_ranks: int = 16
    merge_eps: float = 1.0
    eps_align: float = 1.0
    max_nodes: int = 100
    vocab_min_freq: int = 2
    lr_encoder: float = 1e-3
    lr_head: float = 1e-3
    batch_pages: int = 4
    max_epochs: int = 40
    patience: int = 5
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

    def gcn_config(self) -> GcnConfig:
        edge_types = (ADJACENCY, SECTION_TITLE) if self.use_section_edges else (ADJACENCY,)
        return GcnConfig(
            num_layers=self.gcn_layers,
            hidden_dim=self.gcn_hidden,
            edge_types=edge_types,
            skip_connections=self.use_skip_connections,
            font_dim=self.font_dim,
            max_font_ranks=self.max_font_ranks,
        )


@dataclass
class Model:
    """Trained weights plus everything predict() needs to reproduce preprocessing."""

    params: dict[str, Parameter]
    options: ExtractorOptions
    vocab: Vocabulary
    tag_set: TagSet

    def config_block(self) -> dict:
        return {
            "kind": "vrdkit-extractor",
            "options": {k: getattr(self.options, k) for k in ExtractorOptions.__dataclass_fields__},
            "vocab": self.vocab.to_list(),
            "entity_types": list(self.tag_set.entity_types),
        }

    def save(self, path) -> None:
        save_checkpoint(path, self.params, self.config_block())

    @classmethod
    def load(cls, path) -> "Model":
        params, config = load_checkpoint(path)
        if config.get("kind") != "vrdkit-extractor":
            raise ValueError(f"{path} is not an extractor checkpoint")
        options = ExtractorOptions(**config["options"])
        return cls(
            params=params,
            options=options,
            vocab=Vocabulary.from_list(config["vocab"]),
            tag_set=TagSet(config["entity_types"]),
        )


def init_model(options: ExtractorOptions, vocab: Vocabulary, tag_set: TagSet) -> Model:
    rng = rng_for(options.seed, "model-init")
    enc_cfg = options.encoder_config(len(vocab))
    params = init_encoder_params(enc_cfg, rng)
    feat_dim = options.encoder_dim
    if options.use_gcn:
        params.update(init_gcn_params(options.gcn_config(), options.encoder_dim, rng))
        feat_dim += options.gcn_hidden
    params["head.W"] = Parameter("head.W", rng.normal(0.0, 0.02, size=(feat_dim, len(tag_set))))
    params["head.b"] = Parameter("head.b", np.zeros(len(tag_set)))
    return Model(params=params, options=options, vocab=vocab, tag_set=tag_set)


def load_encoder_weights(model: Model, init_params: dict[str, Parameter]) -> int:
    """Copy encoder-group weights from a pretraining checkpoint into the model.

    Only names with the enc. prefix flow forward; pretraining heads are
    discarded. Returns the number of tensors copied.
    """
    copied = 0
    for name, param in init_params.items():
        if not name.startswith("enc."):
            continue
        if name not in model.params:
            raise ValueError(f"checkpoint parameter {name} missing from model")
        if model.params[name].data.shape != param.data.shape:
            raise ValueError(
                f"shape mismatch for {name}: model {model.params[name].data.shape} "
                f"vs checkpoint {param.data.shape}"
            )
        model.params[name].data = param.data.copy()
        copied += 1
    if copied == 0:
        raise ValueError("checkpoint contains no encoder weights")
    return copied


# ---------------------------------------------------------------------------
# Preprocessing


@dataclass
class PreparedPage:
    """One page chunk after merging, tokenization, and graph construction."""

    doc_id: str
    page: Page
    graph: PageGraph
    token_seqs: list[TokenSequence]  # aligned with page.boxes; full, untruncated
    font_ranks: np.ndarray
    id_rows: list[list[int]]  # vocab ids, truncated to the encoder budget
    matrices: dict[str, np.ndarray] | None
    targets: np.ndarray | None = None  # (N, kpad) tag ids over framed positions
    loss_mask: np.ndarray | None = None


def prepare_document(doc: Document, model: Model, labeled: bool) -> list[PreparedPage]:
    """Merge, rank fonts, chunk, tokenize, build graphs; identical at train and
    predict time."""
    opts = model.options
    merged_pages = [merge_close_boxes(p, opts.merge_eps) for p in doc.pages]
    ranks = rank_fonts(replace(doc, pages=tuple(merged_pages)), opts.max_font_ranks)
    budget = opts.max_seq_len - 2
    prepared = []
    for page in merged_pages:
        if not page.boxes:
            continue
        for chunk in chunk_page(page, opts.max_nodes):
            graph = build_adjacency_edges(chunk, opts.eps_align)
            if opts.use_section_edges:
                graph = add_section_title_edges(chunk, graph)
            seqs = []
            for box in chunk.boxes:
                toks = tokenize(box.text)
                seqs.append(project_labels(box, toks) if labeled else toks)
            id_rows = [model.vocab.encode_tokens(s)[:budget] for s in seqs]
            prep = PreparedPage(
                doc_id=doc.doc_id,
                page=chunk,
                graph=graph,
                token_seqs=seqs,
                font_ranks=np.array(
                    [ranks.rank_of(b.font_name, b.font_size) for b in chunk.boxes], dtype=np.int64
                ),
                id_rows=id_rows,
                matrices=neighbor_matrices(graph, model.options.gcn_config().edge_types)
                if opts.use_gcn
                else None,
            )
            if labeled:
                kpad = max(len(r) for r in id_rows) if id_rows else 0
                targets = np.zeros((len(id_rows), kpad), dtype=np.int64)
                mask = np.zeros((len(id_rows), kpad))
                for r, seq in enumerate(seqs):
                    if seq.bio_tags is None:
                        raise ValueError(f"doc {doc.doc_id}: missing gold labels")
                    for c, tag in enumerate(seq.bio_tags[: len(id_rows[r])]):
                        targets[r, c] = model.tag_set.id_of(tag)
                        mask[r, c] = 1.0
                prep.targets = targets
                prep.loss_mask = mask
            prepared.append(prep)
    return prepared


# ---------------------------------------------------------------------------
# Forward passes


def forward_page(model: Model, prep: PreparedPage, train_flag: bool = False, rng=None):
    """Per-token tag logits for every box on the page.

    Returns (logits Tensor (N, kpad, num_tags), content lengths list).
    """
    if len(prep.id_rows) != len(prep.page.boxes):
        raise ValueError("prepared rows do not match page boxes")
    opts = model.options
    enc_cfg = opts.encoder_config(len(model.vocab))
    batch = encode_boxes(prep.id_rows, model.params, enc_cfg, train_flag, rng)
    features = batch.token_states
    if opts.use_gcn:
        if opts.use_font_features:
            inits = node_init(batch.cls_vectors, prep.font_ranks, model.params["gcn.font_table"])
        else:
            # Font ablation: a zero block replaces the embedding so shapes and
            # parameter usage stay identical without any font information.
            zeros = Tensor(np.zeros((len(prep.id_rows), opts.font_dim)))
            inits = concat([batch.cls_vectors, zeros], axis=-1)
        graph = prep.matrices if prep.matrices is not None else prep.graph
        nodes = gcn_forward(graph, inits, model.params, opts.gcn_config())
        kpad = features.shape[1]
        nodes = broadcast_to(reshape(nodes, (nodes.shape[0], 1, nodes.shape[1])), (nodes.shape[0], kpad, nodes.shape[1]))
        features = concat([features, nodes], axis=-1)
    logits = linear(features, model.params["head.W"], model.params["head.b"])
    return logits, batch.lengths


def page_loss(model: Model, prep: PreparedPage, train_flag: bool = True, rng=None) -> Tensor:
    """Mean token cross-entropy over the page; truncated tokens are excluded."""
    if prep.targets is None:
        raise ValueError("page_loss requires gold labels")
    logits, _ = forward_page(model, prep, train_flag, rng)
    return softmax_cross_entropy(logits, prep.targets, prep.loss_mask)


def predict_page_tags(model: Model, prep: PreparedPage) -> list[tuple[str, ...]]:
    """Argmax tags per box, BIO-repaired, padded with O for truncated tokens."""
    with no_grad():
        logits, lengths = forward_page(model, prep, train_flag=False)
    arg = logits.data.argmax(axis=-1)
    out = []
    for r, seq in enumerate(prep.token_seqs):
        tags = [model.tag_set.tag_of(int(t)) for t in arg[r, : lengths[r]]]
        tags.extend("O" for _ in range(len(seq.tokens) - len(tags)))
        out.append(repair_bio(tags))
    return out


# ---------------------------------------------------------------------------
# Training


def _snapshot(params):
    return {name: p.data.copy() for name, p in params.items()}


def _restore(params, snap):
    for name, p in params.items():
        p.data = snap[name].copy()


def train_supervised(
    train_docs,
    val_docs,
    options: ExtractorOptions,
    init_params: dict[str, Parameter] | None = None,
    vocabulary: Vocabulary | None = None,
):
    """Train with per-page batches, two Adam learning-rate groups, and early
    stopping on validation micro-F1. Returns (best model, history)."""
    from .evalkit import EvalCounts, score

    if not train_docs:
        raise ValueError("empty training set")
    vocab = vocabulary or build_vocab(train_docs, options.vocab_min_freq)
    tag_set = TagSet.from_documents(train_docs)
    model = init_model(options, vocab, tag_set)
    if init_params is not None:
        load_encoder_weights(model, init_params)

    prep_train = [p for d in train_docs for p in prepare_document(d, model, labeled=True)]
    prep_val = [p for d in (val_docs or ()) for p in prepare_document(d, model, labeled=True)]
    adam = AdamState(lr=options.lr_head, group_lrs={"enc.": options.lr_encoder})
    drop_rng = rng_for(options.seed, "dropout")

    def val_f1() -> float:
        counts = EvalCounts()
        for prep in prep_val:
            pred = predict_page_tags(model, prep)
            for tags, seq in zip(pred, prep.token_seqs):
                counts.update(score(tags, seq.bio_tags))
        return counts.micro_f1()

    history = []
    best_snap = _snapshot(model.params)
    best_f1, bad_epochs = -1.0, 0
    loss_scale = 1.0 / max(options.batch_pages, 1)
    for epoch in range(options.max_epochs):
        order = rng_for(options.seed, "page-order", epoch).permutation(len(prep_train))
        total_loss, pending = 0.0, 0
        zero_grads(model.params)
        for idx in order:
            loss = page_loss(model, prep_train[int(idx)], train_flag=True, rng=drop_rng)
            total_loss += loss.item()
            (loss * loss_scale).backward()
            pending += 1
            if pending == options.batch_pages:
                adam_step(model.params, adam)
                pending = 0
        if pending:
            adam_step(model.params, adam)
        record = {"epoch": epoch, "train_loss": total_loss / max(len(prep_train), 1)}
        if prep_val:
            record["val_f1"] = val_f1()
            if record["val_f1"] > best_f1:
                best_f1, bad_epochs = record["val_f1"], 0
                best_snap = _snapshot(model.params)
            else:
                bad_epochs += 1
        history.append(record)
        logger.debug("epoch %d: %s", epoch, record)
        if prep_val and bad_epochs > options.patience:
            break
    if prep_val:
        _restore(model.params, best_snap)
    return model, history


# ---------------------------------------------------------------------------
# Prediction


@dataclass(frozen=True)
class PredictedEntity:
    page_no: int
    box_id: int
    entity_type: str
    char_start: int
    char_end: int
    text: str


@dataclass(frozen=True)
class DocPrediction:
    doc_id: str
    entities: tuple[PredictedEntity, ...]

    def to_dict(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "entities": [
                {
                    "page_no": e.page_no,
                    "box_id": e.box_id,
                    "entity_type": e.entity_type,
                    "char_start": e.char_start,
                    "char_end": e.char_end,
                    "text": e.text,
                }
                for e in self.entities
            ],
        }


def predict(model: Model, doc: Document) -> DocPrediction:
    """Tag a document with the exact training-time preprocessing, then decode
    spans from repaired BIO tags. Box ids refer to the merged page."""
    entities = []
    for prep in prepare_document(doc, model, labeled=False):
        tag_rows = predict_page_tags(model, prep)
        for box, seq, tags in zip(prep.page.boxes, prep.token_seqs, tag_rows):
            for span in tags_to_spans(tags, seq):
                entities.append(
                    PredictedEntity(
                        page_no=prep.page.page_no,
                        box_id=box.box_id,
                        entity_type=span.entity_type,
                        char_start=span.char_start,
                        char_end=span.char_end,
                        text=box.text[span.char_start : span.char_end],
                    )
                )
    return DocPrediction(doc_id=doc.doc_id, entities=tuple(entities))
