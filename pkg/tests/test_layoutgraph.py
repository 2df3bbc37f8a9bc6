import pytest

from vrdkit.docmodel import Document, Page, TextBox
from vrdkit.layoutgraph import (
    ADJACENCY,
    DOWN_UP,
    HORIZONTAL,
    LEFT_RIGHT,
    RIGHT_LEFT,
    SECTION_TITLE,
    UP_DOWN,
    VERTICAL,
    PageGraph,
    add_section_title_edges,
    alignment,
    balance_sprc_pairs,
    build_adjacency_edges,
    chunk_page,
    extract_sprc_pairs,
    graph_to_record,
    rank_fonts,
)
from vrdkit.util import rng_for


def box(box_id, x0, y0, x1, y1, text="t", font=("F", 10.0)):
    return TextBox(
        box_id=box_id, text=text, x0=float(x0), y0=float(y0), x1=float(x1), y1=float(y1),
        font_name=font[0], font_size=font[1],
    )


def page(boxes, width=500.0, height=500.0):
    return Page(page_no=0, width=width, height=height, boxes=tuple(boxes))


def random_page(seed, max_boxes=8):
    """Non-overlapping-ish random boxes with distinct centers."""
    rng = rng_for(seed, "rand-page")
    boxes = []
    for i in range(int(rng.integers(1, max_boxes + 1))):
        x0 = float(rng.integers(0, 40)) * 10.0
        y0 = float(rng.integers(0, 40)) * 10.0
        w = float(rng.integers(1, 5)) * 10.0 + i * 0.25
        h = float(rng.integers(1, 2)) * 8.0 + i * 0.125
        boxes.append(box(i, x0, y0, x0 + w, y0 + h))
    return page(boxes)


def brute_force_adjacency(pg, eps_align):
    """Independent O(n^2) enumeration of the closest-aligned-neighbor rule."""
    edges = set()
    for a in pg.boxes:
        best = {}
        for b in pg.boxes:
            if b.box_id == a.box_id:
                continue
            al = alignment(a, b, eps_align)
            if al is None:
                continue
            axis = al[0]
            if axis == HORIZONTAL:
                dist = abs((a.x0 + a.x1) / 2 - (b.x0 + b.x1) / 2)
            else:
                dist = abs((a.y0 + a.y1) / 2 - (b.y0 + b.y1) / 2)
            if axis not in best or (dist, b.box_id) < best[axis]:
                best[axis] = (dist, b.box_id)
        for axis, (_, j) in best.items():
            edges.add((ADJACENCY, min(a.box_id, j), max(a.box_id, j)))
    return edges


class TestRankFonts:
    def _doc(self, fonts):
        boxes = [box(i, 0, i * 20, 10, i * 20 + 10, font=f) for i, f in enumerate(fonts)]
        return Document(doc_id="d", template_id="t", pages=(page(boxes),))

    def test_frequency_order(self):
        table = rank_fonts(self._doc([("Arial", 10.0)] * 5 + [("Arial", 14.0)] * 2))
        assert table.rank_of("Arial", 10.0) == 0
        assert table.rank_of("Arial", 14.0) == 1

    def test_single_font(self):
        table = rank_fonts(self._doc([("Mono", 9.0)] * 3))
        assert table.rank_of("Mono", 9.0) == 0

    def test_name_tie_break(self):
        table = rank_fonts(self._doc([("A", 10.0)] * 3 + [("B", 10.0)] * 3))
        assert table.rank_of("A", 10.0) == 0
        assert table.rank_of("B", 10.0) == 1

    def test_overflow_bucket(self):
        table = rank_fonts(self._doc([(f"F{i}", 10.0) for i in range(5)]), max_ranks=3)
        assert table.rank_of("unseen", 7.0) == 3
        assert max(table.ranks.values()) <= 3


class TestAlignment:
    def test_horizontal_shared_y(self):
        assert alignment(box(0, 0, 0, 10, 5), box(1, 20, 0, 30, 5)) == (HORIZONTAL, LEFT_RIGHT)

    def test_vertical_shared_x(self):
        assert alignment(box(0, 0, 0, 10, 5), box(1, 0, 20, 10, 25)) == (VERTICAL, UP_DOWN)

    def test_unaligned(self):
        assert alignment(box(0, 0, 0, 10, 5), box(1, 12, 7, 30, 13), eps_align=1.0) is None

    def test_horizontal_wins_when_both(self):
        a = box(0, 0, 0, 10, 5)
        b = box(1, 20, 0.5, 30, 5.5)
        assert alignment(a, b, eps_align=1.0)[0] == HORIZONTAL

    def test_direction_flips(self):
        a, b = box(0, 0, 0, 10, 5), box(1, 20, 0, 30, 5)
        assert alignment(b, a)[1] == RIGHT_LEFT


class TestAdjacency:
    def test_row_of_three_links_neighbors(self):
        pg = page([box(0, 0, 0, 10, 5), box(1, 20, 0, 30, 5), box(2, 40, 0, 50, 5)])
        graph = build_adjacency_edges(pg)
        assert set(graph.edges_of_type(ADJACENCY)) == {(0, 1), (1, 2)}

    def test_single_box_no_edges(self):
        assert build_adjacency_edges(page([box(0, 0, 0, 10, 5)])).edges == ()

    def test_grid_two_by_two(self):
        pg = page([
            box(0, 0, 0, 10, 5), box(1, 30, 0, 40, 5),
            box(2, 0, 30, 10, 35), box(3, 30, 30, 40, 35),
        ])
        graph = build_adjacency_edges(pg)
        assert set(graph.edges_of_type(ADJACENCY)) == {(0, 1), (2, 3), (0, 2), (1, 3)}

    def test_empty_page_rejected(self):
        with pytest.raises(ValueError):
            build_adjacency_edges(page([]))

    def test_brute_force_equivalence_500_pages(self):
        for seed in range(500):
            pg = random_page(seed)
            got = set(build_adjacency_edges(pg, 1.0).edges)
            assert got == brute_force_adjacency(pg, 1.0), f"seed {seed}"

    def test_edges_stored_once_canonically(self):
        for seed in range(100):
            graph = build_adjacency_edges(random_page(seed))
            seen = set()
            for t, i, j in graph.edges:
                assert i < j
                assert (t, i, j) not in seen
                seen.add((t, i, j))


class TestSectionTitleEdges:
    def test_title_above_two_bodies(self):
        title = box(0, 0, 0, 60, 12, font=("F", 14.0))
        b1 = box(1, 0, 30, 40, 38)
        b2 = box(2, 0, 60, 40, 68)
        pg = page([title, b1, b2])
        graph = add_section_title_edges(pg, build_adjacency_edges(pg))
        assert set(graph.edges_of_type(SECTION_TITLE)) == {(0, 1), (0, 2)}

    def test_equal_fonts_no_edges(self):
        pg = page([box(0, 0, 0, 10, 5), box(1, 0, 30, 10, 35)])
        graph = add_section_title_edges(pg, build_adjacency_edges(pg))
        assert graph.edges_of_type(SECTION_TITLE) == []

    def test_nearer_title_wins(self):
        far = box(0, 0, 0, 60, 10, font=("F", 14.0))
        near = box(1, 0, 40, 60, 50, font=("F", 14.0))
        body = box(2, 0, 80, 40, 88)
        pg = page([far, near, body])
        graph = add_section_title_edges(pg, build_adjacency_edges(pg))
        assert (1, 2) in graph.edges_of_type(SECTION_TITLE)
        assert (0, 2) not in graph.edges_of_type(SECTION_TITLE)

    def test_predicate_on_random_pages(self):
        # every emitted edge satisfies above-and-larger-font
        for seed in range(100):
            rng = rng_for(seed, "sec-pred")
            boxes = []
            for i in range(int(rng.integers(2, 9))):
                x0, y0 = float(rng.integers(0, 30)) * 10, float(rng.integers(0, 30)) * 10
                size = float(rng.choice([8.0, 10.0, 14.0]))
                boxes.append(box(i, x0, y0, x0 + 40, y0 + size, font=("F", size)))
            pg = page(boxes)
            by_id = {b.box_id: b for b in pg.boxes}
            graph = add_section_title_edges(pg, build_adjacency_edges(pg))
            for i, j in graph.edges_of_type(SECTION_TITLE):
                a, b = by_id[i], by_id[j]
                title, body = (a, b) if a.font_size > b.font_size else (b, a)
                assert title.font_size > body.font_size
                assert title.y1 <= body.y0


class TestChunkPage:
    def test_at_cap_unchanged(self):
        pg = page([box(i, 0, i * 10, 5, i * 10 + 5) for i in range(100)], height=2000)
        assert chunk_page(pg, 100) == [pg]

    def test_split_sizes(self):
        pg = page([box(i, 0, i * 10, 5, i * 10 + 5) for i in range(250)], height=4000)
        chunks = chunk_page(pg, 100)
        assert [len(c.boxes) for c in chunks] == [100, 100, 50]
        assert [b.box_id for c in chunks for b in c.boxes] == list(range(250))

    def test_single_box(self):
        pg = page([box(0, 0, 0, 5, 5)])
        assert chunk_page(pg, 100) == [pg]


class TestSprcPairs:
    def test_horizontal_pair_labels(self):
        pg = page([box(0, 0, 0, 10, 5), box(1, 20, 0, 30, 5)])
        pairs = extract_sprc_pairs(pg)
        assert {(p.box_a, p.box_b, p.label) for p in pairs} == {
            (0, 1, LEFT_RIGHT), (1, 0, RIGHT_LEFT),
        }

    def test_vertical_pair_labels(self):
        pg = page([box(0, 0, 0, 10, 5), box(1, 0, 20, 10, 25)])
        pairs = extract_sprc_pairs(pg)
        assert {(p.box_a, p.box_b, p.label) for p in pairs} == {
            (0, 1, UP_DOWN), (1, 0, DOWN_UP),
        }

    def test_no_aligned_pairs(self):
        pg = page([box(0, 0, 0, 10, 5), box(1, 100, 100, 130, 120)])
        assert extract_sprc_pairs(pg) == []

    def test_label_pair_symmetry_100_seeds(self):
        # both orders are always emitted, so opposite labels count equally
        for seed in range(100):
            pairs = extract_sprc_pairs(random_page(seed))
            by_label = {}
            for p in pairs:
                by_label[p.label] = by_label.get(p.label, 0) + 1
            assert by_label.get(LEFT_RIGHT, 0) == by_label.get(RIGHT_LEFT, 0)
            assert by_label.get(UP_DOWN, 0) == by_label.get(DOWN_UP, 0)

    def test_pair_count_is_twice_edge_count(self):
        for seed in range(100):
            pg = random_page(seed)
            edges = build_adjacency_edges(pg).edges_of_type(ADJACENCY)
            assert len(extract_sprc_pairs(pg)) == 2 * len(edges)


class TestBalance:
    def _pairs(self, n_vertical, n_horizontal):
        from vrdkit.layoutgraph import SprcPair

        vert = [SprcPair(i, i + 1000, UP_DOWN) for i in range(n_vertical)]
        hori = [SprcPair(i, i + 2000, LEFT_RIGHT) for i in range(n_horizontal)]
        return vert + hori

    def test_exact_tenth_kept(self):
        kept = balance_sprc_pairs(self._pairs(100, 10), ratio=0.1, rng_seed=0)
        vertical = [p for p in kept if p.label == UP_DOWN]
        horizontal = [p for p in kept if p.label == LEFT_RIGHT]
        assert len(vertical) == 10
        assert len(horizontal) == 10

    def test_ratio_one_identity(self):
        pairs = self._pairs(7, 3)
        assert balance_sprc_pairs(pairs, 1.0, rng_seed=5) == pairs

    def test_deterministic(self):
        pairs = self._pairs(50, 5)
        assert balance_sprc_pairs(pairs, 0.2, 42) == balance_sprc_pairs(pairs, 0.2, 42)

    def test_invalid_ratio(self):
        with pytest.raises(ValueError):
            balance_sprc_pairs(self._pairs(2, 2), 0.0, 0)


class TestGraphDump:
    def test_record_shape(self):
        pg = page([box(0, 0, 0, 10, 5), box(1, 20, 0, 30, 5)])
        graph = build_adjacency_edges(pg)
        doc = Document(doc_id="d", template_id="t", pages=(pg,))
        rec = graph_to_record("d", pg, graph, rank_fonts(doc))
        assert rec["doc_id"] == "d"
        assert rec["nodes"] == [0, 1]
        assert rec["edges"] == [{"type": ADJACENCY, "i": 0, "j": 1}]
        assert rec["font_ranks"] == {"0": 0, "1": 0}
