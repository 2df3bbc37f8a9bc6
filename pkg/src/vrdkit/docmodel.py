"""Document data model: text boxes, pages, corpus ingestion, tokenization, BIO labels.

The corpus format is JSONL, one document per line:
{doc_id, template_id, pages:[{page_no, width, height, boxes:[{box_id, text,
x0, y0, x1, y1, font_name, font_size, spans:[{entity_type, char_start, char_end}]}]}]}
Unlabeled corpora omit the spans key. Coordinates use a top-left origin with
y increasing downward.
"""

from __future__ import annotations

import json
import re
import string
from dataclasses import dataclass, field, replace
from pathlib import Path


class CorpusError(ValueError):
    """Malformed corpus record or document invariant violation."""


# Reserved vocabulary ids. Corpus tokens always map to ids >= 5.
PAD_ID, UNK_ID, CLS_ID, SEP_ID, MASK_ID = 0, 1, 2, 3, 4
RESERVED_TOKENS = ("[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]")

_PUNCT = frozenset(string.punctuation)
_CHUNK_RE = re.compile(r"\S+")


@dataclass(frozen=True)
class Span:
    entity_type: str
    char_start: int
    char_end: int  # exclusive


@dataclass(frozen=True)
class TextBox:
    """An atomic positioned text unit; one graph node."""

    box_id: int
    text: str
    x0: float
    y0: float
    x1: float
    y1: float
    font_name: str
    font_size: float
    spans: tuple[Span, ...] = ()

    @property
    def center_x(self) -> float:
        return (self.x0 + self.x1) / 2.0

    @property
    def center_y(self) -> float:
        return (self.y0 + self.y1) / 2.0

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)


@dataclass(frozen=True)
class Page:
    page_no: int
    width: float
    height: float
    boxes: tuple[TextBox, ...] = ()


@dataclass(frozen=True)
class Document:
    doc_id: str
    template_id: str
    pages: tuple[Page, ...] = ()


@dataclass(frozen=True)
class Token:
    surface: str  # lowercased; original casing is recoverable via the offsets
    char_start: int
    char_end: int


@dataclass(frozen=True)
class TokenSequence:
    tokens: tuple[Token, ...]
    bio_tags: tuple[str, ...] | None = None


def _validate_box(box: TextBox, where: str) -> None:
    if not box.x0 < box.x1 or not box.y0 < box.y1:
        raise CorpusError(f"{where}: degenerate bbox ({box.x0},{box.y0},{box.x1},{box.y1})")
    if box.font_size <= 0:
        raise CorpusError(f"{where}: font_size must be positive, got {box.font_size}")
    n = len(box.text)
    prev_end = None
    for sp in sorted(box.spans, key=lambda s: (s.char_start, s.char_end)):
        if not (0 <= sp.char_start < sp.char_end <= n):
            raise CorpusError(
                f"{where}: span {sp.entity_type} ({sp.char_start},{sp.char_end}) "
                f"out of range for text of length {n}"
            )
        if prev_end is not None and sp.char_start < prev_end:
            raise CorpusError(f"{where}: overlapping spans at char {sp.char_start}")
        prev_end = sp.char_end


def validate_document(doc: Document) -> None:
    if not doc.doc_id:
        raise CorpusError("doc_id must be nonempty")
    if not doc.template_id:
        raise CorpusError(f"doc {doc.doc_id}: template_id must be nonempty")
    for page in doc.pages:
        if page.page_no < 0:
            raise CorpusError(f"doc {doc.doc_id}: negative page_no {page.page_no}")
        seen_ids = set()
        for box in page.boxes:
            where = f"doc {doc.doc_id} page {page.page_no} box {box.box_id}"
            if box.box_id in seen_ids:
                raise CorpusError(f"{where}: duplicate box_id")
            seen_ids.add(box.box_id)
            _validate_box(box, where)


def _box_from_dict(rec: dict, page: dict, where: str) -> TextBox:
    try:
        spans = tuple(
            Span(str(s["entity_type"]), int(s["char_start"]), int(s["char_end"]))
            for s in rec.get("spans", ())
        )
        box = TextBox(
            box_id=int(rec["box_id"]),
            text=str(rec["text"]),
            x0=float(rec["x0"]),
            y0=float(rec["y0"]),
            x1=float(rec["x1"]),
            y1=float(rec["y1"]),
            font_name=str(rec["font_name"]),
            font_size=float(rec["font_size"]),
            spans=spans,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CorpusError(f"{where}: bad box record ({exc})") from exc
    # Clip to page bounds at ingestion; invariants are checked post-clip.
    w, h = float(page["width"]), float(page["height"])
    return replace(
        box,
        x0=min(max(box.x0, 0.0), w),
        x1=min(max(box.x1, 0.0), w),
        y0=min(max(box.y0, 0.0), h),
        y1=min(max(box.y1, 0.0), h),
    )


def document_from_dict(rec: dict) -> Document:
    try:
        doc_id = str(rec["doc_id"])
        template_id = str(rec["template_id"])
        pages_rec = rec["pages"]
    except (KeyError, TypeError) as exc:
        raise CorpusError(f"bad document record ({exc})") from exc
    pages = []
    for prec in pages_rec:
        try:
            page_no = int(prec["page_no"])
            width = float(prec["width"])
            height = float(prec["height"])
        except (KeyError, TypeError, ValueError) as exc:
            raise CorpusError(f"doc {doc_id}: bad page record ({exc})") from exc
        boxes = tuple(
            _box_from_dict(brec, prec, f"doc {doc_id} page {page_no} box {brec.get('box_id')}")
            for brec in prec.get("boxes", ())
        )
        pages.append(Page(page_no=page_no, width=width, height=height, boxes=boxes))
    doc = Document(doc_id=doc_id, template_id=template_id, pages=tuple(pages))
    validate_document(doc)
    return doc


def document_to_dict(doc: Document) -> dict:
    out_pages = []
    for page in doc.pages:
        out_boxes = []
        for box in page.boxes:
            rec = {
                "box_id": box.box_id,
                "text": box.text,
                "x0": box.x0,
                "y0": box.y0,
                "x1": box.x1,
                "y1": box.y1,
                "font_name": box.font_name,
                "font_size": box.font_size,
            }
            if box.spans:
                rec["spans"] = [
                    {"entity_type": s.entity_type, "char_start": s.char_start, "char_end": s.char_end}
                    for s in box.spans
                ]
            out_boxes.append(rec)
        out_pages.append(
            {"page_no": page.page_no, "width": page.width, "height": page.height, "boxes": out_boxes}
        )
    return {"doc_id": doc.doc_id, "template_id": doc.template_id, "pages": out_pages}


def parse_corpus(path) -> list[Document]:
    """Parse a JSONL corpus file, validating every record."""
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"corpus file not found: {path}")
    docs = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {lineno}: invalid JSON ({exc})") from exc
            try:
                docs.append(document_from_dict(rec))
            except CorpusError as exc:
                raise CorpusError(f"line {lineno}: {exc}") from exc
    return docs


def serialize_corpus(docs, path) -> None:
    from .util import atomic_write_text

    lines = [json.dumps(document_to_dict(d), sort_keys=True) for d in docs]
    atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))


def strip_labels(doc: Document) -> Document:
    """Copy of doc with all entity spans removed (an unlabeled document)."""
    pages = tuple(
        replace(p, boxes=tuple(replace(b, spans=()) for b in p.boxes)) for p in doc.pages
    )
    return replace(doc, pages=pages)


# ---------------------------------------------------------------------------
# Box merging


def _boxes_touch(a: TextBox, b: TextBox, eps: float) -> bool:
    y_overlap = min(a.y1, b.y1) - max(a.y0, b.y0) > 0.0
    x_gap = max(a.x0, b.x0) - min(a.x1, b.x1)
    if y_overlap and x_gap <= eps:
        return True
    x_overlap = min(a.x1, b.x1) - max(a.x0, b.x0) > 0.0
    y_gap = max(a.y0, b.y0) - min(a.y1, b.y1)
    return x_overlap and y_gap <= eps


def _reading_order(boxes) -> list[TextBox]:
    """Top-to-bottom by line, left-to-right within a line.

    Lines are chains of boxes whose vertical extents overlap.
    """
    remaining = sorted(boxes, key=lambda b: (b.y0, b.x0, b.box_id))
    ordered: list[TextBox] = []
    while remaining:
        line = [remaining.pop(0)]
        lo, hi = line[0].y0, line[0].y1
        changed = True
        while changed:
            changed = False
            for b in list(remaining):
                if min(hi, b.y1) - max(lo, b.y0) > 0.0:
                    line.append(b)
                    remaining.remove(b)
                    lo, hi = min(lo, b.y0), max(hi, b.y1)
                    changed = True
        ordered.extend(sorted(line, key=lambda b: (b.x0, b.y0, b.box_id)))
    return ordered


def merge_close_boxes(page: Page, merge_eps: float = 1.0) -> Page:
    """Transitively merge boxes that overlap on one axis and nearly touch on the other.

    Merged text is joined with single spaces in reading order, the bbox is the
    union, the font comes from the largest-area constituent, and spans are
    re-offset. Box ids are reassigned densely in reading order.
    """
    if merge_eps < 0:
        raise ValueError("merge_eps must be >= 0")
    boxes = list(page.boxes)
    n = len(boxes)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if _boxes_touch(boxes[i], boxes[j], merge_eps):
                parent[find(i)] = find(j)

    groups: dict[int, list[TextBox]] = {}
    for i, box in enumerate(boxes):
        groups.setdefault(find(i), []).append(box)

    merged: list[TextBox] = []
    for members in groups.values():
        if len(members) == 1:
            merged.append(members[0])
            continue
        ordered = _reading_order(members)
        parts, spans, offset = [], [], 0
        for b in ordered:
            parts.append(b.text)
            spans.extend(
                Span(s.entity_type, s.char_start + offset, s.char_end + offset) for s in b.spans
            )
            offset += len(b.text) + 1
        dominant = max(ordered, key=lambda b: b.area)
        merged.append(
            TextBox(
                box_id=-1,
                text=" ".join(parts),
                x0=min(b.x0 for b in members),
                y0=min(b.y0 for b in members),
                x1=max(b.x1 for b in members),
                y1=max(b.y1 for b in members),
                font_name=dominant.font_name,
                font_size=dominant.font_size,
                spans=tuple(sorted(spans, key=lambda s: s.char_start)),
            )
        )

    final = [replace(b, box_id=i) for i, b in enumerate(_reading_order(merged))]
    return replace(page, boxes=tuple(final))


# ---------------------------------------------------------------------------
# Tokenization and BIO labels


def tokenize(text: str) -> TokenSequence:
    """Split on whitespace, then peel leading/trailing punctuation into their own tokens.

    Surfaces are lowercased; offsets always refer to the original string.
    """
    tokens: list[Token] = []
    for m in _CHUNK_RE.finditer(text):
        start, end = m.start(), m.end()
        lead = []
        while start < end and text[start] in _PUNCT:
            lead.append((start, start + 1))
            start += 1
        trail = []
        while end > start and text[end - 1] in _PUNCT:
            trail.append((end - 1, end))
            end -= 1
        parts = lead + ([(start, end)] if start < end else []) + trail[::-1]
        tokens.extend(Token(text[a:b].lower(), a, b) for a, b in parts)
    return TokenSequence(tokens=tuple(tokens))


def project_labels(box: TextBox, toks: TokenSequence) -> TokenSequence:
    """BIO tags for toks: a token is inside a span iff their char ranges overlap."""
    spans = sorted(box.spans, key=lambda s: (s.char_start, s.char_end))
    for prev, cur in zip(spans, spans[1:]):
        if cur.char_start < prev.char_end:
            raise CorpusError(f"box {box.box_id}: overlapping gold spans")
    tags = ["O"] * len(toks.tokens)
    for sp in spans:
        first = True
        for idx, tok in enumerate(toks.tokens):
            if tok.char_start < sp.char_end and tok.char_end > sp.char_start and tags[idx] == "O":
                tags[idx] = ("B-" if first else "I-") + sp.entity_type
                first = False
    return TokenSequence(tokens=toks.tokens, bio_tags=tuple(tags))


def repair_bio(tags) -> tuple[str, ...]:
    """Standard BIO repair: a stray I-X becomes B-X."""
    out = []
    prev = "O"
    for tag in tags:
        if tag.startswith("I-") and prev not in (f"B-{tag[2:]}", f"I-{tag[2:]}"):
            tag = "B-" + tag[2:]
        out.append(tag)
        prev = tag
    return tuple(out)


def is_valid_bio(tags) -> bool:
    prev = "O"
    for tag in tags:
        if tag.startswith("I-") and prev not in (f"B-{tag[2:]}", f"I-{tag[2:]}"):
            return False
        prev = tag
    return True


def tags_to_spans(tags, toks: TokenSequence) -> tuple[Span, ...]:
    """Decode (repaired) BIO tags into character spans over the box text."""
    tags = repair_bio(tags)
    spans = []
    start_idx = None
    cur_type = None
    for idx, tag in enumerate(list(tags) + ["O"]):
        if tag.startswith("B-") or tag == "O" or (cur_type and tag != "I-" + cur_type):
            if cur_type is not None:
                spans.append(
                    Span(cur_type, toks.tokens[start_idx].char_start, toks.tokens[idx - 1].char_end)
                )
                cur_type, start_idx = None, None
        if tag.startswith("B-"):
            cur_type, start_idx = tag[2:], idx
    return tuple(spans)


# ---------------------------------------------------------------------------
# Vocabulary


class Vocabulary:
    """Word-level vocabulary with reserved ids 0..4 for PAD/UNK/CLS/SEP/MASK."""

    def __init__(self, corpus_tokens: list[str]):
        self.id_to_token: list[str] = list(RESERVED_TOKENS) + list(corpus_tokens)
        self.token_to_id: dict[str, int] = {t: i for i, t in enumerate(self.id_to_token)}
        if len(self.token_to_id) != len(self.id_to_token):
            raise ValueError("duplicate tokens in vocabulary")

    def __len__(self) -> int:
        return len(self.id_to_token)

    def encode(self, surface: str) -> int:
        return self.token_to_id.get(surface, UNK_ID)

    def encode_tokens(self, toks: TokenSequence) -> list[int]:
        return [self.encode(t.surface) for t in toks.tokens]

    def to_list(self) -> list[str]:
        return self.id_to_token[len(RESERVED_TOKENS) :]

    @classmethod
    def from_list(cls, corpus_tokens) -> "Vocabulary":
        return cls(list(corpus_tokens))


def build_vocab(corpus, min_freq: int = 2) -> Vocabulary:
    """Vocabulary over token surfaces with corpus frequency >= min_freq.

    Ids are assigned by (frequency desc, surface asc), so the mapping is
    deterministic under ties.
    """
    if min_freq < 1:
        raise ValueError("min_freq must be >= 1")
    freq: dict[str, int] = {}
    for doc in corpus:
        for page in doc.pages:
            for box in page.boxes:
                for tok in tokenize(box.text).tokens:
                    freq[tok.surface] = freq.get(tok.surface, 0) + 1
    kept = sorted(
        (t for t, c in freq.items() if c >= min_freq), key=lambda t: (-freq[t], t)
    )
    return Vocabulary(kept)
