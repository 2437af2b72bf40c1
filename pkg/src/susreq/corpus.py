"""Input corpus: product SRS, sustainability taxonomy, and chunking.

Parses the three input documents into typed, validated structures and
prepares the chunks that feed the vector stores. All types are immutable
after construction and all operations are pure.
"""

from __future__ import annotations

import csv
import enum
import hashlib
import io
import json
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from susreq.errors import (
    DuplicateId,
    EmptyCell,
    FewerThanTwoSections,
    MalformedDocument,
    UnknownDimension,
)


class Dimension(enum.Enum):
    ENVIRONMENTAL = "Environmental"
    SOCIAL = "Social"
    TECHNICAL = "Technical"
    ECONOMIC = "Economic"

    @classmethod
    def parse(cls, raw: str) -> "Dimension":
        """Case-insensitive, whitespace-tolerant dimension lookup."""
        name = raw.strip().lower()
        for member in cls:
            if member.value.lower() == name:
                return member
        raise UnknownDimension(f"unknown dimension {raw!r}")


class Kind(enum.Enum):
    FR = "FR"
    NFR = "NFR"
    SR = "SR"


class Source(enum.Enum):
    PRODUCT_SCOPE = "ProductScope"
    TAXONOMY = "Taxonomy"
    STANDARD = "Standard"
    CONTEXT = "Context"
    CATALOG = "Catalog"


@dataclass(frozen=True)
class Requirement:
    """An FR, NFR, or SR. Dimension and category travel only with SRs."""

    id: str
    kind: Kind
    text: str
    dimension: Dimension | None = None
    category: str | None = None

    def __post_init__(self) -> None:
        if not self.text or not self.text.strip():
            raise ValueError(f"requirement {self.id}: empty text")
        has_sr_fields = self.dimension is not None and self.category is not None
        if self.kind is Kind.SR and not has_sr_fields:
            raise ValueError(f"requirement {self.id}: SR needs dimension and category")
        if self.kind is not Kind.SR and (self.dimension is not None or self.category is not None):
            raise ValueError(f"requirement {self.id}: only SRs carry dimension/category")


@dataclass(frozen=True)
class ScopeSection:
    name: str
    body: str

    def __post_init__(self) -> None:
        if not self.name.strip():
            raise ValueError("scope section needs a name")
        if not self.body.strip():
            raise ValueError(f"scope section {self.name!r} has an empty body")


@dataclass(frozen=True)
class ProjectSpec:
    project_id: str
    scope_sections: tuple[ScopeSection, ...]
    functional_reqs: tuple[Requirement, ...]
    nonfunctional_reqs: tuple[Requirement, ...]

    def __post_init__(self) -> None:
        if not self.scope_sections:
            raise MalformedDocument("a project needs at least one scope section")
        seen: set[str] = set()
        for req in (*self.functional_reqs, *self.nonfunctional_reqs):
            if req.id in seen:
                raise DuplicateId(f"duplicate requirement id {req.id!r}")
            seen.add(req.id)


@dataclass(frozen=True)
class TaxonomyEntry:
    requirement_text: str
    dimension: Dimension
    category: str

    def __post_init__(self) -> None:
        if not self.requirement_text.strip() or not self.category.strip():
            raise EmptyCell("taxonomy entry fields must be non-empty")


@dataclass(frozen=True)
class Chunk:
    chunk_id: str
    source: Source
    text: str
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError(f"chunk {self.chunk_id}: empty text")


@dataclass(frozen=True)
class CoherenceReport:
    pairwise_scores: dict[tuple[str, str], float]
    threshold: float
    passed: bool
    offending_pairs: tuple[tuple[str, str], ...]


# --- SRS parsing ----------------------------------------------------------

_REQ_LINE = re.compile(r"^\s*(FR|NFR)\s?(\d+)?\s*:\s*(\S.*)$")
_SECTION_LINE = re.compile(r"^##\s+(.+?)\s*$")
_TITLE_LINE = re.compile(r"^#\s+(.+?)\s*$")


def parse_srs(document: str, project_id: str | None = None) -> ProjectSpec:
    """Parse the plain-text or JSON SRS form into a ProjectSpec.

    The text form uses ``## <Section Name>`` scope headers and
    ``FR <n>: <text>`` / ``NFR <n>: <text>`` requirement lines; ids without
    a number are auto-assigned FR1..FRn / NFR1..NFRm in document order.
    A leading ``# <title>`` line names the project. Sections that contain
    only requirement lines are treated as requirement lists, not scope.
    """
    stripped = document.lstrip()
    if stripped.startswith("{"):
        return spec_from_json(json.loads(document), project_id=project_id)

    title: str | None = None
    sections: list[ScopeSection] = []
    frs: list[Requirement] = []
    nfrs: list[Requirement] = []
    current_name: str | None = None
    current_body: list[str] = []

    def flush_section() -> None:
        nonlocal current_name, current_body
        if current_name is not None:
            body = "\n".join(current_body).strip()
            if body:
                sections.append(ScopeSection(current_name, body))
        current_name = None
        current_body = []

    explicit_ids: set[str] = set()
    for line in document.splitlines():
        req_match = _REQ_LINE.match(line)
        if req_match:
            kind_token, number, text = req_match.groups()
            kind = Kind[kind_token]
            target = frs if kind is Kind.FR else nfrs
            if number:
                req_id = f"{kind_token}{number}"
                if req_id in explicit_ids:
                    raise DuplicateId(f"duplicate requirement id {req_id!r}")
                explicit_ids.add(req_id)
            else:
                req_id = f"{kind_token}{len(target) + 1}"
            target.append(Requirement(req_id, kind, text.strip()))
            continue
        section_match = _SECTION_LINE.match(line)
        if section_match:
            flush_section()
            current_name = section_match.group(1)
            continue
        title_match = _TITLE_LINE.match(line)
        if title_match and title is None and current_name is None:
            title = title_match.group(1)
            continue
        if current_name is not None:
            current_body.append(line)
    flush_section()

    if not sections:
        raise MalformedDocument("no scope sections found (expected '## <name>' headers)")
    if not frs:
        raise MalformedDocument("no functional requirements found (expected 'FR n: ...' lines)")
    return ProjectSpec(
        project_id=project_id or title or "project",
        scope_sections=tuple(sections),
        functional_reqs=tuple(frs),
        nonfunctional_reqs=tuple(nfrs),
    )


def spec_from_json(payload: dict, project_id: str | None = None) -> ProjectSpec:
    """Build a ProjectSpec from the equivalent JSON form."""
    try:
        sections = tuple(
            ScopeSection(s["name"], s["body"]) for s in payload["scope_sections"]
        )
        frs = tuple(
            Requirement(r["id"], Kind.FR, r["text"]) for r in payload["functional_reqs"]
        )
        nfrs = tuple(
            Requirement(r["id"], Kind.NFR, r["text"])
            for r in payload["nonfunctional_reqs"]
        )
    except (KeyError, TypeError) as exc:
        raise MalformedDocument(f"missing field in JSON SRS: {exc}") from exc
    if not frs:
        raise MalformedDocument("no functional requirements in JSON SRS")
    return ProjectSpec(
        project_id=project_id or payload.get("project_id", "project"),
        scope_sections=sections,
        functional_reqs=frs,
        nonfunctional_reqs=nfrs,
    )


def spec_to_json(spec: ProjectSpec) -> dict:
    return {
        "project_id": spec.project_id,
        "scope_sections": [{"name": s.name, "body": s.body} for s in spec.scope_sections],
        "functional_reqs": [{"id": r.id, "text": r.text} for r in spec.functional_reqs],
        "nonfunctional_reqs": [
            {"id": r.id, "text": r.text} for r in spec.nonfunctional_reqs
        ],
    }


def serialize_srs(spec: ProjectSpec) -> str:
    """Inverse of parse_srs for the text form (parse(serialize(x)) == x)."""
    lines = [f"# {spec.project_id}", ""]
    for section in spec.scope_sections:
        lines.append(f"## {section.name}")
        lines.append(section.body)
        lines.append("")
    if spec.functional_reqs:
        lines.append("## Functional Requirements")
        for req in spec.functional_reqs:
            lines.append(f"{req.id}: {req.text}")
        lines.append("")
    if spec.nonfunctional_reqs:
        lines.append("## Non-functional Requirements")
        for req in spec.nonfunctional_reqs:
            lines.append(f"{req.id}: {req.text}")
        lines.append("")
    return "\n".join(lines)


# --- taxonomy parsing ------------------------------------------------------

_TAXONOMY_HEADER = ("requirement", "dimension", "category")


def parse_taxonomy(table: str) -> list[TaxonomyEntry]:
    """Parse the taxonomy CSV (header: requirement,dimension,category).

    One entry per row, order preserved. An empty file is a valid empty
    taxonomy; downstream stages fail fast on it instead.
    """
    reader = csv.reader(io.StringIO(table))
    rows = [row for row in reader if any(cell.strip() for cell in row)]
    if not rows:
        return []
    header = tuple(cell.strip().lower() for cell in rows[0])
    if header != _TAXONOMY_HEADER:
        raise MalformedDocument(
            f"taxonomy header must be {','.join(_TAXONOMY_HEADER)!r}, got {rows[0]!r}"
        )
    entries: list[TaxonomyEntry] = []
    for line_no, row in enumerate(rows[1:], start=2):
        if len(row) != 3:
            raise EmptyCell(f"taxonomy line {line_no}: expected 3 cells, got {len(row)}")
        requirement, dimension, category = (cell.strip() for cell in row)
        if not requirement or not dimension or not category:
            raise EmptyCell(f"taxonomy line {line_no}: empty cell")
        entries.append(TaxonomyEntry(requirement, Dimension.parse(dimension), category))
    return entries


# --- chunking ----------------------------------------------------------------

CONTEXTUAL_TEMPLATE = (
    "The requirement is to {requirement_text} under the dimension {dimension} "
    "and falls in the category of {category}"
)


def contextualize(entry: TaxonomyEntry, *, ordinal: int | None = None) -> Chunk:
    """Render a taxonomy entry as its contextual string chunk.

    The chunk id is the row ordinal when given (stable, readable), otherwise
    a content hash; distinct entries always get distinct ids either way.
    """
    text = CONTEXTUAL_TEMPLATE.format(
        requirement_text=entry.requirement_text,
        dimension=entry.dimension.value,
        category=entry.category,
    )
    if ordinal is not None:
        chunk_id = f"tax-{ordinal:04d}"
    else:
        chunk_id = "tax-" + hashlib.sha256(text.encode("utf-8")).hexdigest()[:12]
    return Chunk(
        chunk_id=chunk_id,
        source=Source.TAXONOMY,
        text=text,
        metadata={
            "requirement": entry.requirement_text,
            "dimension": entry.dimension.value,
            "category": entry.category,
        },
    )


def chunk_taxonomy(entries: Sequence[TaxonomyEntry]) -> list[Chunk]:
    return [contextualize(entry, ordinal=i + 1) for i, entry in enumerate(entries)]


def chunk_scope(spec: ProjectSpec) -> list[Chunk]:
    """One chunk per scope section; chunk text is the section body verbatim."""
    return [
        Chunk(
            chunk_id=f"scope-{i:04d}",
            source=Source.PRODUCT_SCOPE,
            text=section.body,
            metadata={"section": section.name},
        )
        for i, section in enumerate(spec.scope_sections, start=1)
    ]


def coherence_check(
    sections: Iterable[ScopeSection],
    threshold: float = 0.5,
    embedder=None,
) -> CoherenceReport:
    """Pairwise cosine similarity across scope sections.

    The report passes only when every unordered pair clears the threshold
    (strictest reading: per-pair minimum, not the mean).
    """
    from susreq.semindex import cosine as _cosine  # local import avoids a cycle

    if embedder is None:
        raise ValueError("coherence_check requires an embedder")
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must be in [0, 1], got {threshold}")
    sections = list(sections)
    if len(sections) < 2:
        raise FewerThanTwoSections("coherence needs at least two sections")
    vectors = [embedder.embed(s.body) for s in sections]
    scores: dict[tuple[str, str], float] = {}
    offending: list[tuple[str, str]] = []
    for i in range(len(sections)):
        for j in range(i + 1, len(sections)):
            key = (sections[i].name, sections[j].name)
            score = _cosine(vectors[i], vectors[j])
            scores[key] = score
            if score < threshold:
                offending.append(key)
    return CoherenceReport(
        pairwise_scores=scores,
        threshold=threshold,
        passed=not offending,
        offending_pairs=tuple(offending),
    )
