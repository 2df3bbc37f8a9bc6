"""Token-level precision/recall/F1, per-entity reports, few-shot curves, ablations."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .util import rng_for, stable_json, atomic_write_text

logger = logging.getLogger(__name__)


def _tag_type(tag: str) -> str | None:
    return tag[2:] if tag.startswith(("B-", "I-")) else None


def _safe_div(a: float, b: float) -> float:
    # Zero-denominator metrics report 0.0 by convention.
    return a / b if b else 0.0


def _prf(tp: int, fp: int, fn: int) -> dict:
    p = _safe_div(tp, tp + fp)
    r = _safe_div(tp, tp + fn)
    return {"tp": tp, "fp": fp, "fn": fn, "p": p, "r": r, "f1": _safe_div(2 * p * r, p + r)}


@dataclass
class EvalCounts:
    """Per-entity-type token TP/FP/FN with micro totals derived by summing."""

    per_type: dict[str, list[int]] = field(default_factory=dict)  # type -> [tp, fp, fn]

    def _row(self, entity_type: str) -> list[int]:
        return self.per_type.setdefault(entity_type, [0, 0, 0])

    def update(self, other: "EvalCounts") -> "EvalCounts":
        for etype, (tp, fp, fn) in other.per_type.items():
            row = self._row(etype)
            row[0] += tp
            row[1] += fp
            row[2] += fn
        return self

    def micro(self) -> tuple[int, int, int]:
        tp = sum(r[0] for r in self.per_type.values())
        fp = sum(r[1] for r in self.per_type.values())
        fn = sum(r[2] for r in self.per_type.values())
        return tp, fp, fn

    def micro_f1(self) -> float:
        return _prf(*self.micro())["f1"]

    def type_f1(self, entity_type: str) -> float:
        return _prf(*self.per_type.get(entity_type, [0, 0, 0]))["f1"]

    def group_f1(self, entity_types) -> float:
        """Micro F1 restricted to a subset of entity types."""
        tp = sum(self.per_type.get(t, [0, 0, 0])[0] for t in entity_types)
        fp = sum(self.per_type.get(t, [0, 0, 0])[1] for t in entity_types)
        fn = sum(self.per_type.get(t, [0, 0, 0])[2] for t in entity_types)
        return _prf(tp, fp, fn)["f1"]

    def to_report(self) -> dict:
        per_entity = {t: _prf(*row) for t, row in sorted(self.per_type.items())}
        return {"per_entity": per_entity, "micro": _prf(*self.micro())}


def score(pred_tags, gold_tags) -> EvalCounts:
    """Token-level counts: a token scores TP for its gold type when predicted
    type matches; a wrong non-O prediction is an FP for the predicted type and,
    when gold is an entity, an FN for the gold type; a missed entity token is
    an FN."""
    pred_tags, gold_tags = list(pred_tags), list(gold_tags)
    if len(pred_tags) != len(gold_tags):
        raise ValueError(f"tag sequences differ in length: {len(pred_tags)} vs {len(gold_tags)}")
    counts = EvalCounts()
    for pred, gold in zip(pred_tags, gold_tags):
        p, g = _tag_type(pred), _tag_type(gold)
        if g is not None and p == g:
            counts._row(g)[0] += 1
        else:
            if p is not None:
                counts._row(p)[1] += 1
            if g is not None:
                counts._row(g)[2] += 1
    return counts


def score_spans(pred_spans, gold_spans) -> EvalCounts:
    """Stricter span-exact diagnostic: a predicted span counts only if its
    (type, char_start, char_end) matches a gold span exactly."""
    counts = EvalCounts()
    gold = {(s.entity_type, s.char_start, s.char_end) for s in gold_spans}
    pred = {(s.entity_type, s.char_start, s.char_end) for s in pred_spans}
    for etype, *_ in pred & gold:
        counts._row(etype)[0] += 1
    for etype, *_ in pred - gold:
        counts._row(etype)[1] += 1
    for etype, *_ in gold - pred:
        counts._row(etype)[2] += 1
    return counts


# ---------------------------------------------------------------------------
# Model-level evaluation


def evaluate_model(model, docs, workers: int = 1, span_level: bool = False) -> EvalCounts:
    """Score a model on labeled documents with training-identical preprocessing."""
    from .docmodel import tags_to_spans
    from .extractor import prepare_document, predict_page_tags

    def eval_doc(doc) -> EvalCounts:
        counts = EvalCounts()
        for prep in prepare_document(doc, model, labeled=True):
            pred_rows = predict_page_tags(model, prep)
            for tags, seq in zip(pred_rows, prep.token_seqs):
                if span_level:
                    counts.update(
                        score_spans(tags_to_spans(tags, seq), tags_to_spans(seq.bio_tags, seq))
                    )
                else:
                    counts.update(score(tags, seq.bio_tags))
        return counts

    total = EvalCounts()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for counts in pool.map(eval_doc, docs):
                total.update(counts)
    else:
        for doc in docs:
            total.update(eval_doc(doc))
    return total


def report(models: dict, docs, out_path=None, workers: int = 1) -> dict:
    """Per-entity and micro F1 for each named model on the same documents."""
    result = {}
    for name, model in models.items():
        result[name] = evaluate_model(model, docs, workers=workers).to_report()
    if out_path is not None:
        atomic_write_text(out_path, stable_json(result))
    _print_report_table(result)
    return result


def _print_report_table(result: dict) -> None:
    names = list(result)
    types = sorted({t for r in result.values() for t in r["per_entity"]})
    width = max([len(t) for t in types + ["entity", "micro"]]) + 2
    header = "entity".ljust(width) + "".join(n.rjust(14) for n in names)
    print(header)
    for etype in types:
        row = etype.ljust(width)
        for name in names:
            f1 = result[name]["per_entity"].get(etype, {}).get("f1", 0.0)
            row += f"{f1:14.4f}"
        print(row)
    row = "micro".ljust(width)
    for name in names:
        row += f"{result[name]['micro']['f1']:14.4f}"
    print(row)


# ---------------------------------------------------------------------------
# Few-shot harness


@dataclass(frozen=True)
class FewShotPoint:
    size: int
    seed: int
    f1: float
    per_entity: dict


@dataclass(frozen=True)
class FewShotCurve:
    points: tuple[FewShotPoint, ...]

    def mean_f1(self, size: int) -> float:
        vals = [p.f1 for p in self.points if p.size == size]
        return sum(vals) / len(vals) if vals else 0.0

    def mean_entity_f1(self, size: int, entity_type: str) -> float:
        vals = [p.per_entity.get(entity_type, {}).get("f1", 0.0) for p in self.points if p.size == size]
        return sum(vals) / len(vals) if vals else 0.0

    def to_rows(self) -> list[dict]:
        return [
            {"size": p.size, "seed": p.seed, "f1": p.f1, "per_entity": p.per_entity}
            for p in self.points
        ]


def fewshot(
    base_model,
    pool_docs,
    test_docs,
    sizes=(0, 1, 10, 20, 50, 300, 500),
    seeds=(0, 1, 2, 3, 4),
    epochs: int = 5,
    out_path=None,
    workers: int = 1,
) -> FewShotCurve:
    """Fine-tune copies of the base model on N unseen-template documents and
    evaluate on the unseen test set; size 0 evaluates the base model directly."""
    from dataclasses import replace as dc_replace

    from .extractor import Model, prepare_document, page_loss, _snapshot, _restore
    from .nncore import AdamState, adam_step, zero_grads

    sizes = sorted(set(int(s) for s in sizes))
    if max(sizes) > len(pool_docs):
        raise ValueError(f"few-shot pool has {len(pool_docs)} docs, need {max(sizes)}")
    base_counts = evaluate_model(base_model, test_docs, workers=workers).to_report()
    points = []
    base_snap = _snapshot(base_model.params)
    for seed in seeds:
        for size in sizes:
            if size == 0:
                rep = base_counts
            else:
                _restore(base_model.params, base_snap)
                picked = [pool_docs[i] for i in rng_for(seed, "fewshot-pick", size).permutation(len(pool_docs))[:size]]
                opts = dc_replace(base_model.options, seed=seed)
                model = Model(
                    params=base_model.params, options=opts, vocab=base_model.vocab, tag_set=base_model.tag_set
                )
                prep = [p for d in picked for p in prepare_document(d, model, labeled=True)]
                adam = AdamState(lr=opts.lr_head, group_lrs={"enc.": opts.lr_encoder})
                drop_rng = rng_for(seed, "fewshot-dropout", size)
                loss_scale = 1.0 / max(opts.batch_pages, 1)
                zero_grads(model.params)
                for epoch in range(epochs):
                    order = rng_for(seed, "fewshot-order", size, epoch).permutation(len(prep))
                    pending = 0
                    for idx in order:
                        loss = page_loss(model, prep[int(idx)], train_flag=True, rng=drop_rng)
                        (loss * loss_scale).backward()
                        pending += 1
                        if pending == opts.batch_pages:
                            adam_step(model.params, adam)
                            pending = 0
                    if pending:
                        adam_step(model.params, adam)
                rep = evaluate_model(model, test_docs, workers=workers).to_report()
            points.append(
                FewShotPoint(size=size, seed=seed, f1=rep["micro"]["f1"], per_entity=rep["per_entity"])
            )
            logger.info("fewshot size=%d seed=%d f1=%.4f", size, seed, points[-1].f1)
    _restore(base_model.params, base_snap)
    curve = FewShotCurve(points=tuple(points))
    if out_path is not None:
        table = {
            "rows": curve.to_rows(),
            "mean_by_size": {str(s): curve.mean_f1(s) for s in sizes},
        }
        atomic_write_text(out_path, stable_json(table))
    return curve


# ---------------------------------------------------------------------------
# Ablation harness

ABLATION_SWITCHES = ("section_title_edges", "font_feats", "skip_connections")
_SWITCH_TO_OPTION = {
    "section_title_edges": "use_section_edges",
    "font_feats": "use_font_features",
    "skip_connections": "use_skip_connections",
}


def ablate(base_estimator, train_docs, val_docs, test_docs, switches, seeds=(0,), out_path=None) -> dict:
    """Train and evaluate the full config plus each requested switch-off variant
    with identical seeds and data. Switch combos join names with '+'.
    """
    from sklearn.base import clone

    variants = {"full": ()}
    for spec in switches:
        parts = tuple(s.strip() for s in str(spec).split("+") if s.strip())
        for part in parts:
            if part not in ABLATION_SWITCHES:
                raise ValueError(f"unknown ablation switch {part!r}")
        variants["w/o " + " & ".join(parts)] = parts
    rows = []
    for seed in seeds:
        for name, parts in variants.items():
            est = clone(base_estimator)
            est.set_params(seed=seed, **{_SWITCH_TO_OPTION[p]: False for p in parts})
            est.fit(train_docs, validation=val_docs)
            rep = evaluate_model(est.model_, test_docs).to_report()
            rows.append({"variant": name, "seed": seed, "f1": rep["micro"]["f1"], "per_entity": rep["per_entity"]})
            logger.info("ablate %s seed=%d f1=%.4f", name, seed, rep["micro"]["f1"])
    result = {"rows": rows, "variants": list(variants)}
    if out_path is not None:
        atomic_write_text(out_path, stable_json(result))
    return result
