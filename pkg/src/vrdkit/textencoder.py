"""Small transformer text encoder trained from scratch, with a CLS-pooled output
and a masked-language-model head with dynamic masking."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .docmodel import CLS_ID, MASK_ID, PAD_ID, SEP_ID, RESERVED_TOKENS
from .nncore import (
    Parameter,
    Tensor,
    add,
    broadcast_to,
    concat,
    dropout,
    elu,
    embedding,
    index,
    layer_norm,
    linear,
    matmul,
    mul,
    reshape,
    softmax,
    softmax_cross_entropy,
    transpose,
)
from .util import rng_for

_NEG = -1e9  # additive attention mask for padding; exp(-1e9) underflows to 0


@dataclass(frozen=True)
class EncoderConfig:
    vocab_size: int
    hidden_dim: int = 64
    num_layers: int = 2
    num_heads: int = 4
    ffn_dim: int = 128
    max_seq_len: int = 50
    dropout: float = 0.1

    def __post_init__(self):
        if self.hidden_dim % self.num_heads != 0:
            raise ValueError("hidden_dim must be divisible by num_heads")
        if self.max_seq_len < 2:
            raise ValueError("max_seq_len must leave room for [CLS] and [SEP]")

    @property
    def max_content_len(self) -> int:
        return self.max_seq_len - 2


@dataclass
class EncoderOutput:
    """Pooled and per-token states for one sequence (framing positions excluded)."""

    cls_vector: Tensor
    token_states: Tensor
    truncated: bool = False


@dataclass
class BatchEncoderOutput:
    """Encoder states for N sequences padded to a common length.

    token_states is (N, kpad, d) where kpad covers content positions only;
    lengths gives the real content length per row.
    """

    cls_vectors: Tensor
    token_states: Tensor
    lengths: list[int]
    truncated: list[bool]
    attentions: list[np.ndarray] = field(default_factory=list)


def init_encoder_params(cfg: EncoderConfig, rng: np.random.Generator, prefix: str = "enc.") -> dict[str, Parameter]:
    params: dict[str, Parameter] = {}

    def make(name, shape, kind):
        if kind == "normal":
            data = rng.normal(0.0, 0.02, size=shape)
        elif kind == "zeros":
            data = np.zeros(shape)
        else:
            data = np.ones(shape)
        params[prefix + name] = Parameter(prefix + name, data)

    d = cfg.hidden_dim
    make("tok_emb", (cfg.vocab_size, d), "normal")
    make("pos_emb", (cfg.max_seq_len, d), "normal")
    make("seg_emb", (2, d), "normal")
    for layer in range(cfg.num_layers):
        base = f"l{layer}."
        make(base + "ln1.g", (d,), "ones")
        make(base + "ln1.b", (d,), "zeros")
        for proj in ("q", "k", "v", "o"):
            make(base + proj + ".W", (d, d), "normal")
            make(base + proj + ".b", (d,), "zeros")
        make(base + "ln2.g", (d,), "ones")
        make(base + "ln2.b", (d,), "zeros")
        make(base + "ff1.W", (d, cfg.ffn_dim), "normal")
        make(base + "ff1.b", (cfg.ffn_dim,), "zeros")
        make(base + "ff2.W", (cfg.ffn_dim, d), "normal")
        make(base + "ff2.b", (d,), "zeros")
    make("ln_f.g", (d,), "ones")
    make("ln_f.b", (d,), "zeros")
    return params


def _transformer_forward(
    ids: np.ndarray,
    segments: np.ndarray,
    pad_mask: np.ndarray,
    params: dict[str, Parameter],
    cfg: EncoderConfig,
    train_flag: bool,
    rng,
    prefix: str = "enc.",
    attn_sink: list | None = None,
) -> Tensor:
    """Pre-norm transformer over framed id rows. Returns (N, k, d) states."""
    n, k = ids.shape
    d, heads = cfg.hidden_dim, cfg.num_heads
    dh = d // heads

    def p(name):
        return params[prefix + name]

    x = add(
        add(embedding(p("tok_emb"), ids), embedding(p("seg_emb"), segments)),
        embedding(p("pos_emb"), np.broadcast_to(np.arange(k), (n, k))),
    )
    x = dropout(x, cfg.dropout, rng, train_flag)
    # (N, 1, 1, k) additive mask broadcast over heads and query positions.
    attn_bias = np.where(pad_mask, 0.0, _NEG)[:, None, None, :]
    scale = 1.0 / math.sqrt(dh)
    for layer in range(cfg.num_layers):
        base = f"l{layer}."
        h = layer_norm(x, p(base + "ln1.g"), p(base + "ln1.b"))

        def split_heads(t):
            return transpose(reshape(t, (n, k, heads, dh)), (0, 2, 1, 3))

        q = split_heads(linear(h, p(base + "q.W"), p(base + "q.b")))
        kx = split_heads(linear(h, p(base + "k.W"), p(base + "k.b")))
        v = split_heads(linear(h, p(base + "v.W"), p(base + "v.b")))
        scores = add(mul(matmul(q, transpose(kx, (0, 1, 3, 2))), scale), attn_bias)
        probs = softmax(scores, axis=-1)
        if attn_sink is not None:
            attn_sink.append(probs.data.copy())
        ctx = transpose(matmul(probs, v), (0, 2, 1, 3))
        ctx = linear(reshape(ctx, (n, k, d)), p(base + "o.W"), p(base + "o.b"))
        x = add(x, dropout(ctx, cfg.dropout, rng, train_flag))

        h = layer_norm(x, p(base + "ln2.g"), p(base + "ln2.b"))
        h = linear(elu(linear(h, p(base + "ff1.W"), p(base + "ff1.b"))), p(base + "ff2.W"), p(base + "ff2.b"))
        x = add(x, dropout(h, cfg.dropout, rng, train_flag))
    return layer_norm(x, p("ln_f.g"), p("ln_f.b"))


def frame_rows(token_id_rows, cfg: EncoderConfig):
    """Frame content rows as [CLS] ids [SEP] with PAD, truncating to the budget.

    Returns (ids, segments, pad_mask, lengths, truncated).
    """
    budget = cfg.max_content_len
    clipped = [list(row[:budget]) for row in token_id_rows]
    truncated = [len(row) > budget for row in token_id_rows]
    lengths = [len(row) for row in clipped]
    k = max(lengths, default=0) + 2
    n = len(clipped)
    ids = np.full((n, k), PAD_ID, dtype=np.int64)
    pad_mask = np.zeros((n, k), dtype=bool)
    for r, row in enumerate(clipped):
        ids[r, 0] = CLS_ID
        ids[r, 1 : 1 + len(row)] = row
        ids[r, 1 + len(row)] = SEP_ID
        pad_mask[r, : len(row) + 2] = True
    segments = np.zeros((n, k), dtype=np.int64)
    return ids, segments, pad_mask, lengths, truncated


def encode_boxes(
    token_id_rows,
    params,
    cfg: EncoderConfig,
    train_flag: bool = False,
    rng=None,
    prefix: str = "enc.",
    attn_sink: list | None = None,
) -> BatchEncoderOutput:
    """Encode N content rows in one batch; CLS pooling per row."""
    ids, segments, pad_mask, lengths, truncated = frame_rows(token_id_rows, cfg)
    states = _transformer_forward(ids, segments, pad_mask, params, cfg, train_flag, rng, prefix, attn_sink)
    cls_vectors = index(states, (slice(None), 0))
    token_states = index(states, (slice(None), slice(1, states.shape[1] - 1)))
    return BatchEncoderOutput(
        cls_vectors=cls_vectors,
        token_states=token_states,
        lengths=lengths,
        truncated=truncated,
        attentions=attn_sink or [],
    )


def encode(token_ids, params, cfg: EncoderConfig, train_flag: bool = False, rng=None) -> EncoderOutput:
    """Encode a single token-id sequence; over-length input is truncated with a flag."""
    batch = encode_boxes([list(token_ids)], params, cfg, train_flag, rng)
    k = batch.lengths[0]
    return EncoderOutput(
        cls_vector=index(batch.cls_vectors, 0),
        token_states=index(batch.token_states, (0, slice(0, k))),
        truncated=batch.truncated[0],
    )


def encode_pair(ids_a, ids_b, params, cfg: EncoderConfig, train_flag: bool = False, rng=None) -> EncoderOutput:
    """Encode [CLS] a [SEP] b [SEP] with segment ids 0/1; CLS pooling.

    Each half is truncated to (max_seq_len - 3) // 2 so the pair always fits.
    """
    half = (cfg.max_seq_len - 3) // 2
    a = list(ids_a[:half])
    b = list(ids_b[:half])
    k = len(a) + len(b) + 3
    ids = np.full((1, k), PAD_ID, dtype=np.int64)
    segments = np.zeros((1, k), dtype=np.int64)
    ids[0, 0] = CLS_ID
    ids[0, 1 : 1 + len(a)] = a
    ids[0, 1 + len(a)] = SEP_ID
    ids[0, 2 + len(a) : 2 + len(a) + len(b)] = b
    ids[0, k - 1] = SEP_ID
    segments[0, 2 + len(a) :] = 1
    pad_mask = np.ones((1, k), dtype=bool)
    states = _transformer_forward(ids, segments, pad_mask, params, cfg, train_flag, rng)
    return EncoderOutput(
        cls_vector=index(states, (0, 0)),
        token_states=index(states, (0, slice(1, k - 1))),
        truncated=len(ids_a) > half or len(ids_b) > half,
    )


# ---------------------------------------------------------------------------
# Masked language modeling


def dynamic_mask(token_ids, rng_seed, mask_ratio: float = 0.15, *, vocab_size: int):
    """Fresh BERT-style mask pattern: each position selected with prob mask_ratio,
    then 80% MASK / 10% random vocab token / 10% unchanged.

    Returns (masked_ids, positions, originals). Deterministic in rng_seed.
    """
    if not 0 <= mask_ratio <= 1:
        raise ValueError("mask_ratio must be in [0, 1]")
    n_reserved = len(RESERVED_TOKENS)
    if vocab_size <= n_reserved:
        raise ValueError("vocab_size must exceed the reserved ids")
    ids = list(token_ids)
    rng = rng_for(rng_seed, "dynamic-mask")
    select = rng.random(len(ids)) < mask_ratio
    action = rng.random(len(ids))
    randoms = rng.integers(n_reserved, vocab_size, size=len(ids))
    masked = list(ids)
    positions, originals = [], []
    for i, picked in enumerate(select):
        if not picked:
            continue
        positions.append(i)
        originals.append(ids[i])
        if action[i] < 0.8:
            masked[i] = MASK_ID
        elif action[i] < 0.9:
            masked[i] = int(randoms[i])
        # else: leave the original token in place
    return masked, positions, originals


def init_mlm_head(cfg: EncoderConfig, rng: np.random.Generator, prefix: str = "mlm.") -> dict[str, Parameter]:
    W = Parameter(prefix + "W", rng.normal(0.0, 0.02, size=(cfg.hidden_dim, cfg.vocab_size)))
    b = Parameter(prefix + "b", np.zeros(cfg.vocab_size))
    return {W.name: W, b.name: b}


def mlm_loss(encoder_out: EncoderOutput, positions, originals, head_params, prefix: str = "mlm.") -> Tensor:
    """Mean cross-entropy over the masked positions of one sequence."""
    k = encoder_out.token_states.shape[0]
    targets = np.zeros(k, dtype=np.int64)
    mask = np.zeros(k)
    for pos, orig in zip(positions, originals):
        if not 0 <= pos < k:
            raise ValueError(f"masked position {pos} outside sequence of length {k}")
        targets[pos] = orig
        mask[pos] = 1.0
    logits = linear(encoder_out.token_states, head_params[prefix + "W"], head_params[prefix + "b"])
    return softmax_cross_entropy(logits, targets, mask)


def batched_mlm_loss(batch: BatchEncoderOutput, targets: np.ndarray, mask: np.ndarray, head_params, prefix: str = "mlm.") -> Tensor:
    logits = linear(batch.token_states, head_params[prefix + "W"], head_params[prefix + "b"])
    return softmax_cross_entropy(logits, targets, mask)


def perplexity(mean_loss: float) -> float:
    if mean_loss < 0:
        raise ValueError("mean loss must be >= 0")
    return math.exp(mean_loss)
