import json

import pytest

from vrdkit.docmodel import (
    CorpusError,
    Document,
    Page,
    Span,
    TextBox,
    Vocabulary,
    build_vocab,
    document_from_dict,
    document_to_dict,
    is_valid_bio,
    merge_close_boxes,
    parse_corpus,
    project_labels,
    repair_bio,
    serialize_corpus,
    tags_to_spans,
    tokenize,
)
from vrdkit.util import rng_for


def box(box_id=0, text="hello", x0=0.0, y0=0.0, x1=40.0, y1=10.0, font=("F", 10.0), spans=()):
    return TextBox(
        box_id=box_id, text=text, x0=x0, y0=y0, x1=x1, y1=y1,
        font_name=font[0], font_size=font[1], spans=tuple(spans),
    )


def page(boxes, width=200.0, height=200.0, page_no=0):
    return Page(page_no=page_no, width=width, height=height, boxes=tuple(boxes))


def doc(boxes, doc_id="d0", template_id="t0"):
    return Document(doc_id=doc_id, template_id=template_id, pages=(page(boxes),))


class TestParseCorpus:
    def test_round_trip_identity(self, tmp_path):
        d = doc([
            box(0, "Total Amount", spans=[Span("Amount", 0, 12)]),
            box(1, "$ 31.50", x0=60.0, x1=100.0),
        ])
        path = tmp_path / "c.jsonl"
        serialize_corpus([d], path)
        assert parse_corpus(path) == [d]

    def test_file_order_preserved(self, tmp_path):
        docs = [doc([box()], doc_id=f"d{i}") for i in range(3)]
        path = tmp_path / "c.jsonl"
        serialize_corpus(docs, path)
        assert [d.doc_id for d in parse_corpus(path)] == ["d0", "d1", "d2"]

    def test_span_out_of_range_names_box(self):
        rec = document_to_dict(doc([box()]))
        rec["pages"][0]["boxes"][0]["spans"] = [
            {"entity_type": "X", "char_start": 0, "char_end": 99}
        ]
        with pytest.raises(CorpusError, match="box 0"):
            document_from_dict(rec)

    def test_malformed_line_reports_line_number(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"doc_id": "a"}\nnot json\n', encoding="utf-8")
        with pytest.raises(CorpusError, match="line 1"):
            parse_corpus(path)

    def test_overlapping_spans_rejected(self):
        rec = document_to_dict(doc([box(text="abcdef")]))
        rec["pages"][0]["boxes"][0]["spans"] = [
            {"entity_type": "X", "char_start": 0, "char_end": 4},
            {"entity_type": "Y", "char_start": 3, "char_end": 6},
        ]
        with pytest.raises(CorpusError, match="overlap"):
            document_from_dict(rec)

    def test_coordinates_clipped_to_page(self):
        rec = document_to_dict(doc([box(x1=40.0)]))
        rec["pages"][0]["boxes"][0]["x1"] = 1e9
        parsed = document_from_dict(rec)
        assert parsed.pages[0].boxes[0].x1 == 200.0

    def test_duplicate_box_id_rejected(self):
        rec = document_to_dict(doc([box(0), box(0, x0=60.0, x1=90.0)]))
        with pytest.raises(CorpusError, match="duplicate box_id"):
            document_from_dict(rec)

    def test_unlabeled_serialization_omits_spans(self):
        rec = document_to_dict(doc([box()]))
        assert "spans" not in rec["pages"][0]["boxes"][0]

    def test_missing_file(self, tmp_path):
        with pytest.raises(CorpusError, match="not found"):
            parse_corpus(tmp_path / "nope.jsonl")


class TestMergeCloseBoxes:
    def test_merges_within_eps(self):
        p = page([box(0, "Total", 0, 0, 40, 10), box(1, "Amount", 41, 0, 90, 10)])
        merged = merge_close_boxes(p, merge_eps=2.0)
        assert len(merged.boxes) == 1
        b = merged.boxes[0]
        assert b.text == "Total Amount"
        assert (b.x0, b.y0, b.x1, b.y1) == (0, 0, 90, 10)

    def test_gap_above_eps_unmerged(self):
        p = page([box(0, "Total", 0, 0, 40, 10), box(1, "Amount", 41, 0, 90, 10)])
        assert len(merge_close_boxes(p, merge_eps=0.5).boxes) == 2

    def test_single_box_identity(self):
        p = page([box(0, "x")])
        assert merge_close_boxes(p).boxes[0].text == "x"

    def test_spans_reoffset(self):
        p = page([
            box(0, "Total", 0, 0, 40, 10),
            box(1, "31.50", 41, 0, 80, 10, spans=[Span("Amount", 0, 5)]),
        ])
        b = merge_close_boxes(p, merge_eps=2.0).boxes[0]
        assert b.spans == (Span("Amount", 6, 11),)
        assert b.text[6:11] == "31.50"

    def test_font_from_larger_area(self):
        p = page([
            box(0, "big", 0, 0, 80, 10, font=("Big", 12.0)),
            box(1, "s", 80.5, 0, 90, 10, font=("Small", 8.0)),
        ])
        b = merge_close_boxes(p, merge_eps=1.0).boxes[0]
        assert (b.font_name, b.font_size) == ("Big", 12.0)

    def test_transitive_merge(self):
        p = page([
            box(0, "a", 0, 0, 10, 10),
            box(1, "b", 10.5, 0, 20, 10),
            box(2, "c", 20.8, 0, 30, 10),
        ])
        assert len(merge_close_boxes(p, merge_eps=1.0).boxes) == 1

    def test_ids_dense_in_reading_order(self):
        p = page([box(5, "second", 0, 50, 40, 60), box(9, "first", 0, 0, 40, 10)])
        merged = merge_close_boxes(p)
        assert [b.box_id for b in merged.boxes] == [0, 1]
        assert [b.text for b in merged.boxes] == ["first", "second"]

    def test_idempotent_random_pages(self):
        for seed in range(100):
            rng = rng_for(seed, "merge-idem")
            boxes = []
            for i in range(int(rng.integers(1, 9))):
                x0 = float(rng.uniform(0, 180))
                y0 = float(rng.uniform(0, 180))
                boxes.append(box(i, f"t{i}", x0, y0, x0 + float(rng.uniform(3, 18)), y0 + 8.0))
            once = merge_close_boxes(page(boxes), merge_eps=2.0)
            twice = merge_close_boxes(once, merge_eps=2.0)
            assert once == twice


class TestTokenize:
    def test_spec_example(self):
        toks = tokenize("Total: $35.00").tokens
        assert [(t.surface, t.char_start, t.char_end) for t in toks] == [
            ("total", 0, 5), (":", 5, 6), ("$", 7, 8), ("35.00", 8, 13),
        ]

    def test_empty(self):
        assert tokenize("").tokens == ()

    def test_single_token_offsets(self):
        assert tokenize("abc").tokens == tokenize("abc").tokens
        (tok,) = tokenize("abc").tokens
        assert (tok.surface, tok.char_start, tok.char_end) == ("abc", 0, 3)

    def test_wrapped_punctuation(self):
        assert [t.surface for t in tokenize("((foo))").tokens] == ["(", "(", "foo", ")", ")"]

    def test_reconstruction_property(self):
        texts = [
            "Total: $35.00", "INV 48291", "a  b\t c", "2015 - 2019",
            "greta.quist@courier.example", "(parens) and, commas.",
        ]
        for text in texts:
            toks = tokenize(text).tokens
            for tok in toks:
                assert text[tok.char_start : tok.char_end].lower() == tok.surface
            # offsets are ordered and non-overlapping
            for a, b in zip(toks, toks[1:]):
                assert a.char_end <= b.char_start


class TestProjectLabels:
    def test_full_cover_span(self):
        b = box(0, "Acme Corp Ltd", spans=[Span("SellerName", 0, 13)])
        tags = project_labels(b, tokenize(b.text)).bio_tags
        assert tags == ("B-SellerName", "I-SellerName", "I-SellerName")

    def test_no_spans_all_o(self):
        b = box(0, "just words here")
        assert set(project_labels(b, tokenize(b.text)).bio_tags) == {"O"}

    def test_partial_overlap_rule(self):
        text = "Total : $ 35.00"
        b = box(0, text, spans=[Span("Amount", text.index("35.00"), len(text))])
        tags = project_labels(b, tokenize(text)).bio_tags
        assert tags == ("O", "O", "O", "B-Amount")

    def test_valid_bio_on_random_spans(self):
        for seed in range(100):
            rng = rng_for(seed, "bio-prop")
            words = ["w%d" % i for i in range(int(rng.integers(1, 12)))]
            text = " ".join(words)
            spans = []
            cursor = 0
            while cursor < len(text) and rng.random() < 0.5:
                start = int(rng.integers(cursor, len(text)))
                end = int(rng.integers(start + 1, len(text) + 1))
                spans.append(Span("T%d" % rng.integers(0, 3), start, end))
                cursor = end
            b = box(0, text, x1=400.0, spans=spans)
            tags = project_labels(b, tokenize(text)).bio_tags
            assert len(tags) == len(tokenize(text).tokens)
            assert is_valid_bio(tags)


class TestBioUtils:
    def test_repair_stray_i(self):
        assert repair_bio(["O", "I-Amount"]) == ("O", "B-Amount")

    def test_repair_type_switch(self):
        assert repair_bio(["B-A", "I-B"]) == ("B-A", "B-B")

    def test_decode_spans(self):
        toks = tokenize("x 35.00 y")
        spans = tags_to_spans(["O", "B-Amount", "O"], toks)
        assert spans == (Span("Amount", 2, 7),)

    def test_decode_repairs_stray(self):
        toks = tokenize("a b")
        assert tags_to_spans(["O", "I-Amount"], toks) == (Span("Amount", 2, 3),)


class TestVocabulary:
    def _corpus(self, words):
        return [doc([box(0, " ".join(words), x1=4000.0)])]

    def test_min_freq_threshold(self):
        vocab = build_vocab(self._corpus(["total"] * 5 + ["zzqx"]), min_freq=2)
        assert "total" in vocab.token_to_id
        assert vocab.encode("zzqx") == 1  # UNK

    def test_min_freq_one_keeps_all(self):
        vocab = build_vocab(self._corpus(["a", "b", "c"]), min_freq=1)
        assert all(vocab.encode(t) >= 5 for t in ("a", "b", "c"))

    def test_tie_break_by_surface(self):
        vocab = build_vocab(self._corpus(["beta", "alpha", "beta", "alpha"]), min_freq=2)
        assert vocab.encode("alpha") < vocab.encode("beta")

    def test_reserved_ids(self):
        vocab = build_vocab([], min_freq=1)
        assert len(vocab) == 5
        assert vocab.id_to_token[:5] == ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]

    def test_round_trip(self):
        vocab = build_vocab(self._corpus(["a", "a", "b", "b"]), min_freq=1)
        clone = Vocabulary.from_list(vocab.to_list())
        assert clone.token_to_id == vocab.token_to_id
