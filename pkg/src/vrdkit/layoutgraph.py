"""Per-page layout graphs: font ranks, adjacency and section-title edges, SPRC pairs."""

from __future__ import annotations

from dataclasses import dataclass, replace

from .docmodel import Document, Page, TextBox
from .util import rng_for

ADJACENCY = "adjacency"
SECTION_TITLE = "section_title"
EDGE_TYPES = (ADJACENCY, SECTION_TITLE)

HORIZONTAL = "horizontal"
VERTICAL = "vertical"

LEFT_RIGHT = "left_right"
RIGHT_LEFT = "right_left"
UP_DOWN = "up_down"
DOWN_UP = "down_up"
SPRC_LABELS = (LEFT_RIGHT, RIGHT_LEFT, UP_DOWN, DOWN_UP)

_OPPOSITE = {LEFT_RIGHT: RIGHT_LEFT, RIGHT_LEFT: LEFT_RIGHT, UP_DOWN: DOWN_UP, DOWN_UP: UP_DOWN}
_HORIZONTAL_LABELS = frozenset((LEFT_RIGHT, RIGHT_LEFT))


@dataclass(frozen=True)
class FontRankTable:
    """Per-document font ranks: 0 is the most frequent (font_name, font_size)."""

    ranks: dict[tuple[str, float], int]
    max_ranks: int

    def rank_of(self, font_name: str, font_size: float) -> int:
        return self.ranks.get((font_name, font_size), self.max_ranks)


@dataclass(frozen=True)
class PageGraph:
    """Undirected typed edges over a page's boxes.

    Edges are stored once as (type, i, j) with i < j; no self-edges. Node ids
    are box ids in reading order.
    """

    node_ids: tuple[int, ...]
    edges: tuple[tuple[str, int, int], ...]

    def neighbors(self, box_id: int, edge_type: str) -> list[int]:
        out = []
        for t, i, j in self.edges:
            if t != edge_type:
                continue
            if i == box_id:
                out.append(j)
            elif j == box_id:
                out.append(i)
        return out

    def edges_of_type(self, edge_type: str) -> list[tuple[int, int]]:
        return [(i, j) for t, i, j in self.edges if t == edge_type]


@dataclass(frozen=True)
class SprcPair:
    box_a: int
    box_b: int
    label: str


def _canonical_edges(edges) -> tuple[tuple[str, int, int], ...]:
    uniq = {(t, min(i, j), max(i, j)) for t, i, j in edges if i != j}
    return tuple(sorted(uniq))


def rank_fonts(doc: Document, max_ranks: int = 16) -> FontRankTable:
    """Rank (font_name, font_size) pairs by box count over the whole document.

    Ties break by (font_name asc, font_size asc); ranks beyond max_ranks-1
    collapse into the overflow bucket, whose id is max_ranks.
    """
    if max_ranks < 1:
        raise ValueError("max_ranks must be >= 1")
    counts: dict[tuple[str, float], int] = {}
    for page in doc.pages:
        for box in page.boxes:
            key = (box.font_name, box.font_size)
            counts[key] = counts.get(key, 0) + 1
    ordered = sorted(counts, key=lambda k: (-counts[k], k[0], k[1]))
    ranks = {key: min(rank, max_ranks) for rank, key in enumerate(ordered)}
    return FontRankTable(ranks=ranks, max_ranks=max_ranks)


def alignment(a: TextBox, b: TextBox, eps_align: float = 1.0):
    """Axis and direction of strict alignment between two boxes, or None.

    Boxes align horizontally when a top or bottom edge coordinate matches
    within eps_align, vertically when a left or right edge matches. The
    horizontal test wins when both hold. Direction compares centers along the
    aligned axis; identical centers yield direction None (degenerate pair).
    """
    if eps_align < 0:
        raise ValueError("eps_align must be >= 0")
    if abs(a.y0 - b.y0) <= eps_align or abs(a.y1 - b.y1) <= eps_align:
        if a.center_x == b.center_x:
            return (HORIZONTAL, None)
        return (HORIZONTAL, LEFT_RIGHT if a.center_x < b.center_x else RIGHT_LEFT)
    if abs(a.x0 - b.x0) <= eps_align or abs(a.x1 - b.x1) <= eps_align:
        if a.center_y == b.center_y:
            return (VERTICAL, None)
        return (VERTICAL, UP_DOWN if a.center_y < b.center_y else DOWN_UP)
    return None


def build_adjacency_edges(page: Page, eps_align: float = 1.0) -> PageGraph:
    """Connect each box to its closest horizontally and vertically aligned neighbors.

    Closeness is center-to-center distance along the aligned axis; ties break
    by lower box_id. Isolated boxes yield no edges.
    """
    boxes = list(page.boxes)
    if not boxes:
        raise ValueError("page has no boxes")
    edges = []
    for a in boxes:
        best: dict[str, tuple[float, int]] = {}
        for b in boxes:
            if b.box_id == a.box_id:
                continue
            al = alignment(a, b, eps_align)
            if al is None:
                continue
            axis, _ = al
            dist = abs(a.center_x - b.center_x) if axis == HORIZONTAL else abs(a.center_y - b.center_y)
            key = (dist, b.box_id)
            if axis not in best or key < best[axis]:
                best[axis] = key
        for axis, (_, b_id) in best.items():
            edges.append((ADJACENCY, a.box_id, b_id))
    return PageGraph(
        node_ids=tuple(b.box_id for b in boxes), edges=_canonical_edges(edges)
    )


def add_section_title_edges(page: Page, graph: PageGraph) -> PageGraph:
    """Add an edge from each box to its nearest larger-font box fully above it.

    Candidates j satisfy j.y1 <= i.y0 and j.font_size > i.font_size; the
    winner minimizes the vertical gap, tie-breaking by horizontal center
    distance and then lower box_id.
    """
    boxes = list(page.boxes)
    edges = list(graph.edges)
    for box in boxes:
        best = None
        for cand in boxes:
            if cand.box_id == box.box_id:
                continue
            if cand.y1 > box.y0 or cand.font_size <= box.font_size:
                continue
            key = (box.y0 - cand.y1, abs(box.center_x - cand.center_x), cand.box_id)
            if best is None or key < best[0]:
                best = (key, cand.box_id)
        if best is not None:
            edges.append((SECTION_TITLE, box.box_id, best[1]))
    return PageGraph(node_ids=graph.node_ids, edges=_canonical_edges(edges))


def chunk_page(page: Page, max_nodes: int = 100) -> list[Page]:
    """Split an oversize page into consecutive reading-order chunks of <= max_nodes boxes.

    Box ids are kept, so predictions still reference the original boxes.
    """
    if max_nodes < 1:
        raise ValueError("max_nodes must be >= 1")
    if len(page.boxes) <= max_nodes:
        return [page]
    return [
        replace(page, boxes=page.boxes[i : i + max_nodes])
        for i in range(0, len(page.boxes), max_nodes)
    ]


def extract_sprc_pairs(page: Page, eps_align: float = 1.0) -> list[SprcPair]:
    """Both ordered pairs, with opposite labels, for every adjacency edge."""
    by_id = {b.box_id: b for b in page.boxes}
    pairs = []
    graph = build_adjacency_edges(page, eps_align)
    for i, j in graph.edges_of_type(ADJACENCY):
        al = alignment(by_id[i], by_id[j], eps_align)
        if al is None or al[1] is None:
            continue  # degenerate identical-center pair
        label = al[1]
        pairs.append(SprcPair(i, j, label))
        pairs.append(SprcPair(j, i, _OPPOSITE[label]))
    return pairs


def balance_sprc_pairs(pairs, ratio: float, rng_seed: int) -> list[SprcPair]:
    """Keep all horizontal-label pairs and a uniform random `ratio` of vertical ones."""
    if not 0 < ratio <= 1:
        raise ValueError("ratio must be in (0, 1]")
    if ratio == 1.0:
        return list(pairs)
    vertical_idx = [k for k, p in enumerate(pairs) if p.label not in _HORIZONTAL_LABELS]
    keep_count = int(round(ratio * len(vertical_idx)))
    rng = rng_for(rng_seed, "sprc-balance")
    chosen = rng.permutation(len(vertical_idx))[:keep_count]
    keep = {vertical_idx[k] for k in chosen}
    return [p for k, p in enumerate(pairs) if p.label in _HORIZONTAL_LABELS or k in keep]


def graph_to_record(doc_id: str, page: Page, graph: PageGraph, ranks: FontRankTable) -> dict:
    """One line of the graph dump format."""
    return {
        "doc_id": doc_id,
        "page_no": page.page_no,
        "nodes": list(graph.node_ids),
        "edges": [{"type": t, "i": i, "j": j} for t, i, j in graph.edges],
        "font_ranks": {str(b.box_id): ranks.rank_of(b.font_name, b.font_size) for b in page.boxes},
    }
