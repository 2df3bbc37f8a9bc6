"""Deterministic synthetic document generators (invoice-like and resume-like).

The corpora are constructed so that specific entities are unextractable from
box text alone and recoverable from layout:

* Invoices carry one gold Amount plus byte-identical distractor price boxes;
  only strict adjacency to a Total/Amount cue identifies the gold one.
* Resume date ranges are textually identical under EDUCATION and WORK
  EXPERIENCE; only the section-title edge decides School vs Company duration.
* Resume pages contain decoy boxes that repeat a section-title string in the
  body font, so separating real titles from decoys requires font features.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .docmodel import Document, Page, Span, TextBox
from .layoutgraph import ADJACENCY, build_adjacency_edges
from .util import rng_for

# ---------------------------------------------------------------------------
# Lexicons (embedded; no external data)

# Seller and purchaser name lexicons use disjoint suffix vocabularies (Ltd/Co/
# Works/... vs Inc/Group/Trust/...), so the entity class stays text-decidable
# even when a rare leading name token falls below the vocabulary threshold.
SELLER_COMPANIES = (
    "Acme Logistics Ltd", "Northwind Traders", "Stellar Freight Co", "Ironside Supply Ltd",
    "Bluepeak Exports Co", "Cobalt Shipping Ltd", "Harbor Lane Exports", "Granite Stone Works",
    "Silverbirch Materials", "Atlas Crate Co", "Redwood Paper Mills", "Lakeshore Metals Ltd",
    "Summit Tool Works", "Crownfield Textiles", "Orchard Gate Mills", "Quarry Stone Supply",
    "Beacon Electric Co", "Fairweather Freight", "Copperline Cables Ltd", "Driftwood Timber Co",
    "Eastgate Chemicals", "Foxglove Packaging", "Kestrel Avionics Ltd", "Oakum Rope Works",
)

PURCHASER_COMPANIES = (
    "Globex Retail Inc", "Vantage Hotels Group", "Marble Arch Clinics", "Pioneer Grocers Inc",
    "Skyline Airways Corp", "Tidewater Resorts", "Umber Galleries Inc", "Vellum Publishing Trust",
    "Westbrook Schools Trust", "Xenon Data Agency", "Yardley Apartments", "Zephyr Couriers Corp",
    "Alder Park Cinemas", "Bramble Cafes Group", "Cinder Block Gyms", "Dovetail Studios Inc",
    "Ember Grill Chain", "Fernhill Pharmacies", "Gosling Daycare Corp", "Hatchet Hardware Stores",
    "Inkwell Stationers", "Juniper Spas Group", "Meridian Banks Corp", "Plover Travel Agency",
)

FIRST_NAMES = (
    "Ada", "Bruno", "Clara", "Dmitri", "Elena", "Farid", "Greta", "Hugo", "Iris", "Jonas",
    "Katya", "Liam", "Mara", "Nadia", "Otto", "Priya", "Quentin", "Rosa", "Stefan", "Tara",
)

LAST_NAMES = (
    "Albright", "Bennett", "Castillo", "Dvorak", "Eriksen", "Fontaine", "Garza", "Holloway",
    "Ivanova", "Jensen", "Kowalski", "Lindqvist", "Moreau", "Novak", "Okafor", "Petrov",
    "Quist", "Rashid", "Sorensen", "Takahashi",
)

SCHOOLS = (
    "Northfield University", "Eastvale Institute of Technology", "Harborview College",
    "Westmoor Polytechnic", "Southgate University", "Clearwater State College",
    "Ridgeline Technical Institute", "Maplewood University", "Stonebridge College",
    "Lakecrest University", "Fairbanks Institute", "Greenvale Academy of Sciences",
    "Oakhurst University", "Pinefield College", "Silverton Institute", "Ashford University",
    "Briarcliff College", "Cedarholm University", "Dunmore Institute", "Elmsworth College",
    "Foxton University", "Gladstone Polytechnic", "Hawthorne Institute", "Ingleside College",
)

EMPLOYERS = (
    "Helix Analytics", "Quantum Forge Labs", "Bytebridge Systems", "Cloudmere Software",
    "Datawheel Partners", "Evergreen Robotics", "Fluxline Media", "Gridpoint Energy",
    "Hyperion Consulting", "Inertia Games", "Jadeworks Design", "Kiteline Networks",
    "Lumen Biotech", "Mosaic Finance", "Nimbus Aerospace", "Oceanic Research Group",
    "Parallax Studios", "Quartz Security", "Rampart Insurance", "Signalpath Telecom",
    "Trellis Health", "Umbra Optics", "Vectorline Logistics", "Wavecrest Audio",
)

DEGREES = (
    "B.Sc. Computer Science", "B.A. Economics", "M.Sc. Data Engineering", "B.Eng. Mechanical",
    "M.A. Linguistics", "B.Sc. Mathematics", "M.Eng. Electrical", "B.A. History",
    "M.Sc. Statistics", "B.Sc. Physics", "M.B.A. Management", "B.A. Graphic Design",
)

POSITIONS = (
    "Software Engineer", "Data Analyst", "Project Manager", "Research Assistant",
    "Marketing Specialist", "Account Executive", "Systems Administrator", "Product Designer",
    "Financial Controller", "Operations Coordinator", "Quality Inspector", "Field Technician",
    "Support Engineer", "Content Strategist",
)

STREETS = (
    "Oak Street", "Birch Avenue", "Cedar Lane", "Dover Road", "Elm Court", "Foster Way",
    "Garden Terrace", "Hillside Drive", "Island Row", "Juniper Boulevard", "Kings Walk",
    "Linden Place",
)

CITIES = (
    "Springfield", "Rivertown", "Lakewood", "Hillsboro", "Brookdale", "Fairmont",
    "Glenhaven", "Ashby", "Creston", "Dalewood", "Eastport", "Foxborough",
)

EMAIL_DOMAINS = ("postbox.example", "mailhub.example", "inboxly.example", "courier.example")

MONTHS = (
    "January", "February", "March", "April", "May", "June",
    "July", "August", "September", "October", "November", "December",
)

# Neutral filler phrases; deliberately shared between invoice notes and both
# resume sections so they carry no section signal.
FILLER_PHRASES = (
    "details available upon request", "see attached reference sheet", "reviewed and approved",
    "standard terms apply", "record kept on file", "further notes in appendix",
    "updated quarterly summary", "subject to annual review", "verified by coordinator",
    "copy distributed internally", "general remarks section", "supplementary material enclosed",
    "routine entry for archive", "noted without exception",
)

SECTION_TITLE_TEXTS = ("EDUCATION", "WORK EXPERIENCE", "SKILLS", "PROJECTS")

# Cue synonym pools. Row-mode cues end with a colon and sit left of their
# value; column-mode cues are uppercase, colon-free, and sit above it. That
# global correlation is what makes SPRC learnable from text.
ROW_CUES = {
    "date": ("Date :", "Issued :"),
    "invno": ("Invoice No :", "Invoice Number :"),
    "from": ("From :", "Seller :"),
    "billto": ("Bill To :", "Customer :"),
    "subtotal": ("Subtotal :", "Sub Total :"),
    "tax": ("Tax :", "VAT :"),
    "balance": ("Balance :",),
    "total": ("Total :", "Total Due :", "Amount :"),
}
COL_CUES = {
    "date": ("DATE",),
    "invno": ("INVOICE NO",),
    "from": ("FROM", "SELLER"),
    "billto": ("BILL TO", "CUSTOMER"),
    "subtotal": ("SUBTOTAL",),
    "tax": ("TAX", "VAT"),
    "balance": ("BALANCE",),
    "total": ("TOTAL", "AMOUNT DUE"),
}
TOTAL_CUE_TEXTS = frozenset(ROW_CUES["total"]) | frozenset(COL_CUES["total"])
_DISTRACTOR_SLOTS = ("subtotal", "tax", "balance")

INVOICE_ENTITIES = ("SellerName", "PurchaserName", "InvoiceNo", "Amount")
RESUME_ENTITIES = (
    "Degree", "Position", "School", "Name", "CompanyDuration", "Email",
    "SchoolDuration", "Company", "Phone", "SectionTitle", "Address",
)

_FONT_FAMILIES = ("Serif", "Sans", "Grotesk")


def _char_w(font_size: float) -> float:
    return 0.5 * font_size


def _box_h(font_size: float) -> float:
    return 1.2 * font_size


@dataclass(frozen=True)
class InvoiceTemplate:
    template_id: str
    cue_mode: str  # "row" | "column"
    left_x: float
    value_x: float
    amount_x: float
    y_top: float
    row_step: float
    body_font: tuple[str, float]
    cue_font: tuple[str, float]
    title_font: tuple[str, float]
    cue_choice: dict[str, int] = field(default_factory=dict)


@dataclass(frozen=True)
class ResumeTemplate:
    template_id: str
    columns: int  # 1 or 2
    x_left: float
    x_right: float
    value_x: float
    line_step: float
    entry_gap: float
    stagger: float
    name_font: tuple[str, float]
    title_font: tuple[str, float]
    body_font: tuple[str, float]
    note_font: tuple[str, float]


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str  # "invoice" | "resume"
    num_docs: int
    templates: tuple
    seed: int = 0
    price_candidates: int = 3  # gold plus byte-identical distractors (invoice)
    decoys_per_page: int = 2  # body-font copies of title strings (resume)

    def __post_init__(self):
        if self.kind not in ("invoice", "resume"):
            raise ValueError(f"unknown corpus kind {self.kind!r}")
        if self.num_docs < 1 or not self.templates:
            raise ValueError("spec needs num_docs >= 1 and at least one template")
        if self.kind == "invoice" and self.price_candidates < 2:
            raise ValueError("price_candidates must be >= 2 to create ambiguity")
        if self.kind == "invoice" and self.price_candidates - 1 > len(_DISTRACTOR_SLOTS):
            raise ValueError("too many price candidates for the available cue slots")


def make_invoice_templates(num_templates: int = 10) -> tuple[InvoiceTemplate, ...]:
    """Template geometry and cue-synonym combos. Every synonym circulates
    through the early (seen) templates, so held-out templates differ in layout
    and combination, never in vocabulary."""
    templates = []
    for i in range(num_templates):
        mode = "row" if i % 2 == 0 else "column"
        family = _FONT_FAMILIES[i % len(_FONT_FAMILIES)]
        pools = ROW_CUES if mode == "row" else COL_CUES
        choice = {}
        for slot, options in pools.items():
            shift = i // 2 if slot == "total" else i
            choice[slot] = shift % len(options)
        templates.append(
            InvoiceTemplate(
                template_id=f"inv-t{i}",
                cue_mode=mode,
                left_x=40.0 + 6.0 * i,
                value_x=170.0 + 8.0 * i,
                amount_x=330.0 + 5.0 * i,
                y_top=70.0 + 4.0 * i,
                row_step=26.0 + 2.0 * (i % 3),
                body_font=(family, 10.0),
                cue_font=(family + "-Bold", 10.0),
                title_font=(family + "-Bold", 18.0),
                cue_choice=choice,
            )
        )
    return tuple(templates)


def make_resume_templates(num_templates: int = 6) -> tuple[ResumeTemplate, ...]:
    templates = []
    for i in range(num_templates):
        family = _FONT_FAMILIES[i % len(_FONT_FAMILIES)]
        templates.append(
            ResumeTemplate(
                template_id=f"res-t{i}",
                columns=1 if i % 2 == 0 else 2,
                x_left=44.0 + 4.0 * i,
                x_right=330.0 + 4.0 * i,
                value_x=150.0 + 4.0 * i,
                line_step=18.0,
                entry_gap=36.0,
                stagger=9.0,
                name_font=(family + "-Bold", 20.0),
                title_font=(family + "-Bold", 15.0),
                body_font=(family, 10.5),
                note_font=(family, 8.0),
            )
        )
    return tuple(templates)


def default_invoice_spec(num_docs: int = 1000, seed: int = 0, num_templates: int = 10) -> GeneratorSpec:
    return GeneratorSpec(
        kind="invoice", num_docs=num_docs, templates=make_invoice_templates(num_templates), seed=seed
    )


def default_resume_spec(num_docs: int = 400, seed: int = 0, num_templates: int = 6) -> GeneratorSpec:
    return GeneratorSpec(
        kind="resume", num_docs=num_docs, templates=make_resume_templates(num_templates), seed=seed
    )


class _PageBuilder:
    def __init__(self, width: float, height: float, page_no: int = 0):
        self.width = width
        self.height = height
        self.page_no = page_no
        self.boxes: list[TextBox] = []

    def add(self, text: str, x: float, y: float, font: tuple[str, float], entity: str | None = None) -> TextBox:
        name, size = font
        box = TextBox(
            box_id=len(self.boxes),
            text=text,
            x0=x,
            y0=y,
            x1=x + max(len(text) * _char_w(size), size),
            y1=y + _box_h(size),
            font_name=name,
            font_size=size,
            spans=(Span(entity, 0, len(text)),) if entity else (),
        )
        self.boxes.append(box)
        return box

    def page(self) -> Page:
        return Page(page_no=self.page_no, width=self.width, height=self.height, boxes=tuple(self.boxes))


def _pick(rng, pool):
    return pool[int(rng.integers(0, len(pool)))]


def _price_text(rng) -> str:
    dollars = int(rng.integers(100, 10000))
    cents = int(rng.integers(0, 100))
    return f"$ {dollars:,}.{cents:02d}"


def _date_text(rng) -> str:
    return f"{int(rng.integers(1, 29))} {_pick(rng, MONTHS)} {int(rng.integers(2019, 2026))}"


def _year_range_text(rng) -> str:
    start = int(rng.integers(1998, 2021))
    return f"{start} - {start + int(rng.integers(1, 6))}"


def _build_invoice_doc(spec: GeneratorSpec, doc_index: int) -> Document:
    rng = rng_for(spec.seed, "invoice-doc", doc_index)
    tpl: InvoiceTemplate = spec.templates[doc_index % len(spec.templates)]
    pools = ROW_CUES if tpl.cue_mode == "row" else COL_CUES
    cue = {slot: pools[slot][tpl.cue_choice[slot]] for slot in pools}

    pb = _PageBuilder(612.0, 792.0, page_no=0)
    pb.add("INVOICE", 250.0, 28.0, tpl.title_font)

    seller = _pick(rng, SELLER_COMPANIES)
    purchaser = _pick(rng, PURCHASER_COMPANIES)
    invno = f"INV {int(rng.integers(10000, 100000))}"
    date = _date_text(rng)
    price = _price_text(rng)
    note = _pick(rng, FILLER_PHRASES)
    distractors = _DISTRACTOR_SLOTS[: spec.price_candidates - 1]

    step = tpl.row_step
    if tpl.cue_mode == "row":
        y = tpl.y_top
        rows = [
            ("date", date, None),
            ("invno", invno, "InvoiceNo"),
            ("from", seller, "SellerName"),
            ("billto", purchaser, "PurchaserName"),
        ]
        for slot, value, entity in rows:
            pb.add(cue[slot], tpl.left_x, y, tpl.cue_font)
            pb.add(value, tpl.value_x, y, tpl.body_font, entity)
            y += step
        pb.add(note, tpl.left_x, y + step, tpl.body_font)
        ay = y + 3 * step
        for slot in distractors:
            pb.add(cue[slot], tpl.amount_x, ay, tpl.cue_font)
            pb.add(price, tpl.amount_x + 130.0, ay, tpl.body_font)
            ay += step
        pb.add(cue["total"], tpl.amount_x, ay, tpl.cue_font)
        pb.add(price, tpl.amount_x + 130.0, ay, tpl.body_font, "Amount")
    else:
        y = tpl.y_top
        pb.add(cue["from"], tpl.left_x, y, tpl.cue_font)
        pb.add(cue["billto"], tpl.value_x + 60.0, y, tpl.cue_font)
        pb.add(seller, tpl.left_x, y + step, tpl.body_font, "SellerName")
        pb.add(purchaser, tpl.value_x + 60.0, y + step, tpl.body_font, "PurchaserName")
        y += 3 * step
        pb.add(cue["invno"], tpl.left_x, y, tpl.cue_font)
        pb.add(cue["date"], tpl.value_x + 60.0, y, tpl.cue_font)
        pb.add(invno, tpl.left_x, y + step, tpl.body_font, "InvoiceNo")
        pb.add(date, tpl.value_x + 60.0, y + step, tpl.body_font)
        y += 3 * step
        pb.add(note, tpl.left_x, y, tpl.body_font)
        ay = y + 2 * step
        ax = tpl.amount_x - 120.0
        col_dx = 95.0
        for k, slot in enumerate(distractors):
            pb.add(cue[slot], ax + k * col_dx, ay, tpl.cue_font)
            pb.add(price, ax + k * col_dx, ay + step, tpl.body_font)
        k = len(distractors)
        pb.add(cue["total"], ax + k * col_dx, ay, tpl.cue_font)
        pb.add(price, ax + k * col_dx, ay + step, tpl.body_font, "Amount")

    return Document(
        doc_id=f"inv-{doc_index:05d}", template_id=tpl.template_id, pages=(pb.page(),)
    )


def gen_invoices(spec: GeneratorSpec) -> list[Document]:
    """Generate the invoice corpus; same spec and seed give byte-identical output.

    Every page has exactly one gold Amount and price_candidates-1 distractor
    boxes that are byte-identical in text and font, so no function of box text
    alone can separate them.
    """
    if spec.kind != "invoice":
        raise ValueError("spec.kind must be 'invoice'")
    return [_build_invoice_doc(spec, i) for i in range(spec.num_docs)]


# ---------------------------------------------------------------------------
# Resumes


def _entry_boxes(pb, rng, x, y, tpl, head, head_entity, detail, detail_entity, duration_entity):
    """One section entry laid out so the duration's 1- and 2-hop adjacency
    neighbors are neutral filler lines: head, note, detail, note, note,
    duration, note."""
    step = tpl.line_step
    pb.add(head, x, y, tpl.body_font, head_entity)
    pb.add(_pick(rng, FILLER_PHRASES), x, y + step, tpl.note_font)
    pb.add(detail, x, y + 2 * step, tpl.body_font, detail_entity)
    pb.add(_pick(rng, FILLER_PHRASES), x, y + 3 * step, tpl.note_font)
    pb.add(_pick(rng, FILLER_PHRASES), x, y + 4 * step, tpl.note_font)
    pb.add(_year_range_text(rng), x, y + 5 * step, tpl.body_font, duration_entity)
    pb.add(_pick(rng, FILLER_PHRASES), x, y + 6 * step, tpl.note_font)
    return y + 6 * step + _box_h(tpl.body_font[1])


def _section(pb, rng, x, y, tpl, kind, decoy_text, stagger: float = 0.0):
    """A titled section with two entries and optionally one decoy block.

    The title sits exactly at y; `stagger` shifts only the content below it,
    so that two-column layouts keep both titles on one y band (the vertical
    gap then ties and the center-x tie-break assigns each box its own
    column's title). Returns the y coordinate just below the section content.
    """
    step = tpl.line_step
    title = "EDUCATION" if kind == "education" else "WORK EXPERIENCE"
    pb.add(title, x, y, tpl.title_font, "SectionTitle")
    pb.add(_pick(rng, FILLER_PHRASES), x, y + 20.0 + stagger, tpl.note_font)
    cursor = y + 20.0 + stagger + step + 4.0
    for _ in range(2):
        if kind == "education":
            bottom = _entry_boxes(
                pb, rng, x, cursor, tpl,
                _pick(rng, SCHOOLS), "School", _pick(rng, DEGREES), "Degree", "SchoolDuration",
            )
        else:
            bottom = _entry_boxes(
                pb, rng, x, cursor, tpl,
                _pick(rng, EMPLOYERS), "Company", _pick(rng, POSITIONS), "Position", "CompanyDuration",
            )
        cursor = bottom + tpl.entry_gap
    if decoy_text is not None:
        pb.add(decoy_text, x, cursor, tpl.body_font)
        pb.add(_pick(rng, FILLER_PHRASES), x, cursor + step, tpl.note_font)
        cursor += 2 * step + tpl.entry_gap
    return cursor


def _skills_section(pb, rng, x, y, tpl):
    title = _pick(rng, ("SKILLS", "PROJECTS"))
    pb.add(title, x, y, tpl.title_font, "SectionTitle")
    pb.add(_pick(rng, FILLER_PHRASES), x, y + 20.0, tpl.note_font)
    pb.add(_pick(rng, FILLER_PHRASES), x, y + 20.0 + tpl.line_step, tpl.note_font)
    return y + 20.0 + 2 * tpl.line_step + _box_h(tpl.note_font[1])


def _build_resume_doc(spec: GeneratorSpec, doc_index: int) -> Document:
    rng = rng_for(spec.seed, "resume-doc", doc_index)
    tpl: ResumeTemplate = spec.templates[doc_index % len(spec.templates)]
    pb = _PageBuilder(612.0, 1056.0, page_no=0)

    person = f"{_pick(rng, FIRST_NAMES)} {_pick(rng, LAST_NAMES)}"
    pb.add(person, tpl.x_left, 28.0, tpl.name_font, "Name")
    email = f"{person.split()[0].lower()}.{person.split()[1].lower()}@{_pick(rng, EMAIL_DOMAINS)}"
    phone = f"+1 555 {int(rng.integers(1000, 10000)):04d}"
    address = f"{int(rng.integers(1, 200))} {_pick(rng, STREETS)} , {_pick(rng, CITIES)}"
    for row, (label, value, entity) in enumerate(
        (("Email :", email, "Email"), ("Phone :", phone, "Phone"), ("Address :", address, "Address"))
    ):
        y = 62.0 + row * 22.0
        pb.add(label, tpl.x_left, y, tpl.body_font)
        pb.add(value, tpl.value_x, y, tpl.body_font, entity)

    decoys = [
        _pick(rng, SECTION_TITLE_TEXTS) if k < spec.decoys_per_page else None for k in range(2)
    ]
    edu_first = bool(rng.integers(0, 2))
    kinds = ("education", "work") if edu_first else ("work", "education")
    band_y = 150.0
    if tpl.columns == 1:
        bottom = _section(pb, rng, tpl.x_left, band_y, tpl, kinds[0], decoys[0])
        bottom = _section(pb, rng, tpl.x_left, bottom + 24.0, tpl, kinds[1], decoys[1])
        _skills_section(pb, rng, tpl.x_left, bottom + 24.0, tpl)
    else:
        # Both column titles share one exact y band so the vertical-gap tie
        # breaks on horizontal center distance and each box adopts its own
        # column's title; the stagger offsets only the right column's content
        # to avoid accidental cross-column horizontal alignment.
        left_bottom = _section(pb, rng, tpl.x_left, band_y, tpl, kinds[0], decoys[0])
        right_bottom = _section(pb, rng, tpl.x_right, band_y, tpl, kinds[1], decoys[1], stagger=tpl.stagger)
        _skills_section(pb, rng, tpl.x_left, max(left_bottom, right_bottom) + 24.0, tpl)

    return Document(
        doc_id=f"res-{doc_index:05d}", template_id=tpl.template_id, pages=(pb.page(),)
    )


def gen_resumes(spec: GeneratorSpec) -> list[Document]:
    """Generate the resume corpus with section-determined duration types."""
    if spec.kind != "resume":
        raise ValueError("spec.kind must be 'resume'")
    return [_build_resume_doc(spec, i) for i in range(spec.num_docs)]


def generate(spec: GeneratorSpec) -> list[Document]:
    return gen_invoices(spec) if spec.kind == "invoice" else gen_resumes(spec)


# ---------------------------------------------------------------------------
# Corpus splits


@dataclass(frozen=True)
class CorpusSplit:
    labeled_seen: tuple[Document, ...]
    labeled_unseen: tuple[Document, ...]
    unlabeled: tuple[Document, ...]
    few_shot: tuple[Document, ...]

    def manifest(self) -> dict:
        return {
            "labeled_seen": [d.doc_id for d in self.labeled_seen],
            "labeled_unseen": [d.doc_id for d in self.labeled_unseen],
            "unlabeled": [d.doc_id for d in self.unlabeled],
            "few_shot": [d.doc_id for d in self.few_shot],
        }


def split_corpus(docs, unseen_template_ids, fractions: dict, seed: int) -> CorpusSplit:
    """Deterministic split. Seen-template docs divide into labeled_seen and
    unlabeled (labels stripped) per the labeled/unlabeled fractions;
    unseen-template docs divide into a test set and a disjoint few-shot pool
    per the unseen_test fraction (default 0.4).
    """
    from .docmodel import strip_labels

    unseen_ids = set(unseen_template_ids)
    known = {d.template_id for d in docs}
    missing = unseen_ids - known
    if missing:
        raise ValueError(f"unseen templates not present in corpus: {sorted(missing)}")
    f_labeled = float(fractions.get("labeled", 0.2))
    f_unlabeled = float(fractions.get("unlabeled", 0.8))
    f_test = float(fractions.get("unseen_test", 0.4))
    if f_labeled + f_unlabeled > 1.0 + 1e-9:
        raise ValueError("labeled + unlabeled fractions exceed 1")

    rng = rng_for(seed, "corpus-split")
    seen = [d for d in docs if d.template_id not in unseen_ids]
    unseen = [d for d in docs if d.template_id in unseen_ids]
    seen_order = [seen[i] for i in rng.permutation(len(seen))]
    unseen_order = [unseen[i] for i in rng.permutation(len(unseen))]

    n_lab = int(round(f_labeled * len(seen_order)))
    n_unl = int(round(f_unlabeled * len(seen_order)))
    n_test = int(round(f_test * len(unseen_order)))
    return CorpusSplit(
        labeled_seen=tuple(seen_order[:n_lab]),
        labeled_unseen=tuple(unseen_order[:n_test]),
        unlabeled=tuple(strip_labels(d) for d in seen_order[n_lab : n_lab + n_unl]),
        few_shot=tuple(unseen_order[n_test:]),
    )


def split_train_val_test(docs, train_fraction: float, val_fraction: float, seed: int):
    """Deterministic document-level split of a labeled set."""
    if train_fraction + val_fraction > 1.0 + 1e-9:
        raise ValueError("train + val fractions exceed 1")
    docs = list(docs)
    order = [docs[i] for i in rng_for(seed, "tvt-split").permutation(len(docs))]
    n_train = int(round(train_fraction * len(order)))
    n_val = int(round(val_fraction * len(order)))
    return order[:n_train], order[n_train : n_train + n_val], order[n_train + n_val :]


def load_split(corpus_path, manifest_path) -> CorpusSplit:
    """Rebuild a CorpusSplit from a corpus file and its split manifest.

    The corpus file keeps full labels; membership in the unlabeled split strips
    them at load time.
    """
    import json
    from pathlib import Path

    from .docmodel import parse_corpus, strip_labels

    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise FileNotFoundError(f"manifest not found: {manifest_path}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    by_id = {d.doc_id: d for d in parse_corpus(corpus_path)}
    missing = [i for ids in manifest.values() for i in ids if i not in by_id]
    if missing:
        raise ValueError(f"manifest references unknown doc ids, e.g. {missing[0]}")
    return CorpusSplit(
        labeled_seen=tuple(by_id[i] for i in manifest.get("labeled_seen", ())),
        labeled_unseen=tuple(by_id[i] for i in manifest.get("labeled_unseen", ())),
        unlabeled=tuple(strip_labels(by_id[i]) for i in manifest.get("unlabeled", ())),
        few_shot=tuple(by_id[i] for i in manifest.get("few_shot", ())),
    )


# ---------------------------------------------------------------------------
# Construction oracles


def amount_candidate_counts(docs) -> list[int]:
    """Per page: how many boxes are byte-identical to the gold Amount box."""
    counts = []
    for doc in docs:
        for page in doc.pages:
            gold = [b for b in page.boxes if any(s.entity_type == "Amount" for s in b.spans)]
            if len(gold) != 1:
                raise ValueError(f"doc {doc.doc_id}: expected exactly one gold Amount box")
            counts.append(sum(1 for b in page.boxes if b.text == gold[0].text))
    return counts


def text_only_amount_oracle(docs) -> float:
    """Bayes-optimal accuracy of any box-text-only rule at picking the gold
    Amount box: the mean of 1 / (byte-identical candidate count)."""
    counts = amount_candidate_counts(docs)
    return sum(1.0 / c for c in counts) / len(counts)


def cue_alignment_oracle(docs, eps_align: float = 1.0) -> float:
    """Accuracy of the layout rule: the gold Amount is the candidate price box
    sharing an adjacency edge with the Total/Amount cue box."""
    total, correct = 0, 0
    for doc in docs:
        for page in doc.pages:
            total += 1
            gold = next(b for b in page.boxes if any(s.entity_type == "Amount" for s in b.spans))
            cues = [b for b in page.boxes if b.text in TOTAL_CUE_TEXTS]
            if len(cues) != 1:
                continue
            graph = build_adjacency_edges(page, eps_align)
            neighbors = set(graph.neighbors(cues[0].box_id, ADJACENCY))
            candidates = [b for b in page.boxes if b.text == gold.text and b.box_id in neighbors]
            if len(candidates) == 1 and candidates[0].box_id == gold.box_id:
                correct += 1
    return correct / total if total else 0.0


def section_edge_coverage(docs, eps_align: float = 1.0) -> float:
    """Fraction of boxes with a larger-font box above them that could serve as
    a section title, excluding name headers and the titles themselves."""
    from .layoutgraph import SECTION_TITLE, add_section_title_edges

    total, covered = 0, 0
    for doc in docs:
        for page in doc.pages:
            graph = add_section_title_edges(page, build_adjacency_edges(page, eps_align))
            max_size = max(b.font_size for b in page.boxes)
            for box in page.boxes:
                is_title = any(s.entity_type in ("SectionTitle", "Name") for s in box.spans)
                if is_title or box.font_size == max_size:
                    continue
                total += 1
                if graph.neighbors(box.box_id, SECTION_TITLE):
                    covered += 1
    return covered / total if total else 0.0
