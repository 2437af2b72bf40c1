"""Standards knowledge graph: extraction, validation, edits, and retrieval.

The graph holds Goal/Target/Indicator entities connected by hasTarget,
isMeasuredBy and relatesTo relations. Extraction asks a chat provider once
with the one-shot graph prompt; the parsed document then goes through
ontology validation and (optionally) a human edit script before it is
embedded into a retrievable store. Built graphs are immutable.
"""

from __future__ import annotations

import datetime
import enum
import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

from susreq.agents import ChatProvider, prompt_hash
from susreq.embeddings import EmbeddingProvider
from susreq.errors import (
    EditProducesInvalidGraph,
    EditTargetMissing,
    EmptyGraph,
    UnparseableModelOutput,
)
from susreq.prompts import render_prompt
from susreq.semindex import SemanticIndex


class EntityKind(enum.Enum):
    GOAL = "Goal"
    TARGET = "Target"
    INDICATOR = "Indicator"


class RelationKind(enum.Enum):
    HAS_TARGET = "hasTarget"
    IS_MEASURED_BY = "isMeasuredBy"
    RELATES_TO = "relatesTo"


# domain/range rules: hasTarget connects a Goal to a Target, isMeasuredBy a
# Target to an Indicator, relatesTo anything to anything (except itself)
_DOMAIN: dict[RelationKind, EntityKind | None] = {
    RelationKind.HAS_TARGET: EntityKind.GOAL,
    RelationKind.IS_MEASURED_BY: EntityKind.TARGET,
    RelationKind.RELATES_TO: None,
}
_RANGE: dict[RelationKind, EntityKind | None] = {
    RelationKind.HAS_TARGET: EntityKind.TARGET,
    RelationKind.IS_MEASURED_BY: EntityKind.INDICATOR,
    RelationKind.RELATES_TO: None,
}


@dataclass(frozen=True)
class KGEntity:
    id: str
    kind: EntityKind
    name: str
    description: str | None = None
    start_date: str | None = None
    end_date: str | None = None
    unit_of_measure: str | None = None

    def rendered(self) -> str:
        """Embeddable text: 'kind name: description'."""
        base = f"{self.kind.value} {self.name}"
        return f"{base}: {self.description}" if self.description else base


@dataclass(frozen=True)
class KGRelation:
    from_id: str
    to_id: str
    kind: RelationKind

    def key(self) -> tuple[str, str, str]:
        return (self.from_id, self.to_id, self.kind.value)


@dataclass(frozen=True)
class GraphDoc:
    """Serialized exchange form of the graph, pre-validation."""

    entities: tuple[KGEntity, ...]
    relations: tuple[KGRelation, ...]
    raw_model_text: str | None = None
    provenance: dict = field(default_factory=dict)
    edit_log: tuple[dict, ...] = ()

    def entity_by_id(self) -> dict[str, KGEntity]:
        mapping: dict[str, KGEntity] = {}
        for entity in self.entities:
            mapping.setdefault(entity.id, entity)
        return mapping


@dataclass(frozen=True)
class ValidationIssue:
    code: str
    subject: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    errors: tuple[ValidationIssue, ...]
    warnings: tuple[ValidationIssue, ...]

    @property
    def valid(self) -> bool:
        return not self.errors

    def to_jsonable(self) -> dict:
        return {
            "valid": self.valid,
            "errors": [vars(e) for e in self.errors],
            "warnings": [vars(w) for w in self.warnings],
        }


# --- parsing -----------------------------------------------------------------


def _strip_code_fences(text: str) -> str:
    fenced = re.search(r"```(?:json)?\s*(.*?)```", text, re.DOTALL)
    if fenced:
        return fenced.group(1)
    return text


def _outermost_json(text: str) -> str:
    start = text.find("{")
    end = text.rfind("}")
    if start == -1 or end == -1 or end <= start:
        raise UnparseableModelOutput("no JSON object in model output")
    return text[start : end + 1]


def parse_graph_json(text: str) -> GraphDoc:
    """Parse model output into a GraphDoc.

    Accepts the object form {"entities": [...], "relationships": [...]},
    tolerating code fences and surrounding prose. Structural problems raise
    UnparseableModelOutput; ontology problems are left for validate().
    """
    try:
        payload = json.loads(_outermost_json(_strip_code_fences(text)))
    except ValueError as exc:
        raise UnparseableModelOutput(f"model output is not JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise UnparseableModelOutput("expected a JSON object with entities/relationships")
    raw_entities = payload.get("entities")
    raw_relations = payload.get("relationships")
    if not isinstance(raw_entities, list) or not isinstance(raw_relations, list):
        raise UnparseableModelOutput("missing entities or relationships list")

    entities = []
    for raw in raw_entities:
        try:
            entities.append(
                KGEntity(
                    id=str(raw["id"]),
                    kind=EntityKind(raw["type"]),
                    name=str(raw.get("name") or ""),
                    description=raw.get("description"),
                    start_date=raw.get("startDate"),
                    end_date=raw.get("endDate"),
                    unit_of_measure=raw.get("unitOfMeasure"),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise UnparseableModelOutput(f"bad entity {raw!r}: {exc}") from exc
    relations = []
    for raw in raw_relations:
        try:
            relations.append(
                KGRelation(
                    from_id=str(raw["from"]),
                    to_id=str(raw["to"]),
                    kind=RelationKind(raw["type"]),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise UnparseableModelOutput(f"bad relationship {raw!r}: {exc}") from exc
    return GraphDoc(entities=tuple(entities), relations=tuple(relations), raw_model_text=text)


def rekey_duplicates(doc: GraphDoc) -> GraphDoc:
    """Re-key duplicate entity ids deterministically as <kind-initial><n>.

    Model ids are kept when unique; the remap table lands in provenance.
    Relations keep pointing at the first holder of a duplicated id.
    """
    seen: set[str] = set()
    remap: dict[str, str] = {}
    counters = {kind: 0 for kind in EntityKind}
    new_entities = []
    for entity in doc.entities:
        if entity.id in seen:
            initial = entity.kind.value[0]
            counters[entity.kind] += 1
            candidate = f"{initial}{counters[entity.kind]}"
            while candidate in seen:
                counters[entity.kind] += 1
                candidate = f"{initial}{counters[entity.kind]}"
            remap[entity.id] = candidate
            entity = replace(entity, id=candidate)
        seen.add(entity.id)
        new_entities.append(entity)
    if not remap:
        return doc
    provenance = dict(doc.provenance)
    provenance["id_remap"] = remap
    return replace(doc, entities=tuple(new_entities), provenance=provenance)


_REPAIR_INSTRUCTION = (
    "\n\nYour previous reply could not be parsed. Reply again with ONLY the JSON "
    'object {"entities": [...], "relationships": [{"from": ..., "to": ..., '
    '"type": ...}]} and no other text.'
)


def extract_graph(standard_text: str, chat_provider: ChatProvider) -> GraphDoc:
    """One-shot graph extraction from a standards document.

    Renders the extraction prompt with the document inserted, asks the
    provider once, and parses the reply; one repair re-ask on unparseable
    output, then UnparseableModelOutput. The raw model text is retained on
    the document for audit.
    """
    if not standard_text or not standard_text.strip():
        raise ValueError("standard document is empty")
    prompt = render_prompt("graph_extraction", {"document": standard_text})
    model_text = chat_provider.complete(prompt)
    try:
        doc = parse_graph_json(model_text)
    except UnparseableModelOutput:
        model_text = chat_provider.complete(prompt + _REPAIR_INSTRUCTION)
        doc = parse_graph_json(model_text)
    doc = rekey_duplicates(doc)
    provenance = dict(doc.provenance)
    provenance.update(
        {"provider_id": chat_provider.provider_id, "prompt_hash": prompt_hash(prompt)}
    )
    return replace(doc, provenance=provenance)


# --- validation ------------------------------------------------------------


def _is_iso_date(value: str) -> bool:
    try:
        datetime.date.fromisoformat(value)
        return True
    except ValueError:
        return False


def validate(doc: GraphDoc) -> ValidationReport:
    """Ontology validation; every violation is reported, none raises."""
    errors: list[ValidationIssue] = []
    warnings: list[ValidationIssue] = []
    by_id: dict[str, KGEntity] = {}
    for entity in doc.entities:
        if entity.id in by_id:
            errors.append(
                ValidationIssue("DuplicateId", entity.id, f"entity id {entity.id!r} reused")
            )
        else:
            by_id[entity.id] = entity
        if not entity.name.strip():
            errors.append(
                ValidationIssue("EmptyName", entity.id, f"entity {entity.id!r} has no name")
            )
        if entity.unit_of_measure is not None and entity.kind is not EntityKind.INDICATOR:
            errors.append(
                ValidationIssue(
                    "MisplacedUnitOfMeasure",
                    entity.id,
                    f"{entity.kind.value} {entity.id!r} carries unitOfMeasure "
                    "(only Indicators may)",
                )
            )
        for label, value in (("startDate", entity.start_date), ("endDate", entity.end_date)):
            if value is not None and not _is_iso_date(value):
                warnings.append(
                    ValidationIssue(
                        "NonIsoDate", entity.id, f"{label} {value!r} is not ISO-8601"
                    )
                )
    for relation in doc.relations:
        subject = f"{relation.from_id}-{relation.kind.value}->{relation.to_id}"
        missing = False
        for endpoint in (relation.from_id, relation.to_id):
            if endpoint not in by_id:
                errors.append(
                    ValidationIssue(
                        "DanglingEndpoint", subject, f"endpoint {endpoint!r} not in entities"
                    )
                )
                missing = True
        if missing:
            continue
        if relation.from_id == relation.to_id:
            errors.append(ValidationIssue("SelfLoop", subject, "self-loops are not allowed"))
            continue
        domain = _DOMAIN[relation.kind]
        if domain is not None and by_id[relation.from_id].kind is not domain:
            errors.append(
                ValidationIssue(
                    "RelationDomainViolation",
                    subject,
                    f"{relation.kind.value} must start from a {domain.value}, "
                    f"got {by_id[relation.from_id].kind.value}",
                )
            )
        range_ = _RANGE[relation.kind]
        if range_ is not None and by_id[relation.to_id].kind is not range_:
            errors.append(
                ValidationIssue(
                    "RelationRangeViolation",
                    subject,
                    f"{relation.kind.value} must point to a {range_.value}, "
                    f"got {by_id[relation.to_id].kind.value}",
                )
            )
    return ValidationReport(errors=tuple(errors), warnings=tuple(warnings))


# --- human edits --------------------------------------------------------------

_ENTITY_FIELDS = {
    "id": "id",
    "type": "kind",
    "name": "name",
    "description": "description",
    "startDate": "start_date",
    "endDate": "end_date",
    "unitOfMeasure": "unit_of_measure",
}


def _entity_from_payload(payload: dict) -> KGEntity:
    try:
        return KGEntity(
            id=str(payload["id"]),
            kind=EntityKind(payload["type"]),
            name=str(payload["name"]),
            description=payload.get("description"),
            start_date=payload.get("startDate"),
            end_date=payload.get("endDate"),
            unit_of_measure=payload.get("unitOfMeasure"),
        )
    except (KeyError, ValueError) as exc:
        raise EditTargetMissing(f"bad entity payload {payload!r}: {exc}") from exc


def apply_edits(doc: GraphDoc, edits: Sequence[dict]) -> GraphDoc:
    """Apply a human edit script atomically.

    Ops: add_entity, remove_entity (cascades to incident relations),
    modify_entity, add_relation, remove_relation. The edited document must
    still validate; otherwise the whole script is rejected and the input
    document is returned unchanged (EditProducesInvalidGraph).
    """
    entities = list(doc.entities)
    relations = list(doc.relations)
    log: list[dict] = list(doc.edit_log)

    def find_entity(entity_id: str) -> int:
        for i, entity in enumerate(entities):
            if entity.id == entity_id:
                return i
        raise EditTargetMissing(f"no entity {entity_id!r}")

    for edit in edits:
        op = edit.get("op")
        payload = edit.get("payload", {})
        if op == "add_entity":
            entity = _entity_from_payload(payload)
            if any(e.id == entity.id for e in entities):
                raise EditProducesInvalidGraph(f"entity {entity.id!r} already exists")
            entities.append(entity)
        elif op == "remove_entity":
            idx = find_entity(str(payload["id"]))
            removed = entities.pop(idx)
            relations = [
                r for r in relations if removed.id not in (r.from_id, r.to_id)
            ]
        elif op == "modify_entity":
            idx = find_entity(str(payload["id"]))
            current = entities[idx]
            changes = {}
            for json_key, attr in _ENTITY_FIELDS.items():
                if json_key in payload and json_key != "id":
                    value = payload[json_key]
                    changes[attr] = EntityKind(value) if attr == "kind" else value
            entities[idx] = replace(current, **changes)
        elif op == "add_relation":
            try:
                relation = KGRelation(
                    str(payload["from"]), str(payload["to"]), RelationKind(payload["type"])
                )
            except (KeyError, ValueError) as exc:
                raise EditTargetMissing(f"bad relation payload {payload!r}: {exc}") from exc
            ids = {e.id for e in entities}
            if relation.from_id not in ids or relation.to_id not in ids:
                raise EditTargetMissing(
                    f"relation endpoint missing for {relation.key()}"
                )
            relations.append(relation)
        elif op == "remove_relation":
            key = (str(payload["from"]), str(payload["to"]), str(payload["type"]))
            for i, relation in enumerate(relations):
                if relation.key() == key:
                    del relations[i]
                    break
            else:
                raise EditTargetMissing(f"no relation {key}")
        else:
            raise EditTargetMissing(f"unknown edit op {op!r}")
        log.append({"op": op, "payload": payload})

    edited = replace(
        doc, entities=tuple(entities), relations=tuple(relations), edit_log=tuple(log)
    )
    report = validate(edited)
    if not report.valid:
        raise EditProducesInvalidGraph(
            "; ".join(f"{e.code}({e.subject})" for e in report.errors)
        )
    return edited


# --- (de)serialization ---------------------------------------------------------


def doc_to_jsonable(doc: GraphDoc) -> dict:
    entities = []
    for entity in doc.entities:
        raw: dict = {"id": entity.id, "type": entity.kind.value, "name": entity.name}
        if entity.description is not None:
            raw["description"] = entity.description
        if entity.start_date is not None:
            raw["startDate"] = entity.start_date
        if entity.end_date is not None:
            raw["endDate"] = entity.end_date
        if entity.unit_of_measure is not None:
            raw["unitOfMeasure"] = entity.unit_of_measure
        entities.append(raw)
    return {
        "entities": entities,
        "relationships": [
            {"from": r.from_id, "to": r.to_id, "type": r.kind.value} for r in doc.relations
        ],
        "provenance": doc.provenance,
        "edit_log": list(doc.edit_log),
    }


def doc_from_jsonable(payload: dict) -> GraphDoc:
    doc = parse_graph_json(json.dumps(payload))
    return replace(
        doc,
        raw_model_text=None,
        provenance=dict(payload.get("provenance", {})),
        edit_log=tuple(payload.get("edit_log", [])),
    )


def save_doc(doc: GraphDoc, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(doc_to_jsonable(doc), indent=2, sort_keys=True), encoding="utf-8"
    )


def load_doc(path: str | Path) -> GraphDoc:
    return doc_from_jsonable(json.loads(Path(path).read_text(encoding="utf-8")))


# --- built graph ---------------------------------------------------------------


def _relation_record_id(relation: KGRelation) -> str:
    return f"rel::{relation.from_id}::{relation.kind.value}::{relation.to_id}"


@dataclass(frozen=True)
class SubgraphHit:
    entities: tuple[KGEntity, ...]
    relations: tuple[KGRelation, ...]
    scores: dict[str, float]


class KnowledgeGraph:
    """Validated graph plus its embedding store; immutable once built."""

    def __init__(self, doc: GraphDoc, index: SemanticIndex) -> None:
        self.doc = doc
        self.index = index
        self._entities = doc.entity_by_id()

    @property
    def entity_count(self) -> int:
        return len(self.doc.entities)

    @property
    def relation_count(self) -> int:
        return len(self.doc.relations)

    def entity_ids(self) -> list[str]:
        return [e.id for e in self.doc.entities]

    def retrieve_subgraph(self, query_text: str, k: int) -> SubgraphHit:
        """Top-k entities by cosine plus every relation fully inside the hit set."""
        if k < 1:
            raise ValueError("k must be >= 1")
        if not self.doc.entities:
            raise EmptyGraph("graph has no entities")
        hits = [
            h
            for h in self.index.query(query_text, k=len(self.doc.entities))
            if not h.record_id.startswith("rel::")
        ][:k]
        hit_ids = {h.record_id for h in hits}
        relations = tuple(
            r for r in self.doc.relations if r.from_id in hit_ids and r.to_id in hit_ids
        )
        return SubgraphHit(
            entities=tuple(self._entities[h.record_id] for h in hits),
            relations=relations,
            scores={h.record_id: h.score for h in hits},
        )

    def render_hits(self, hit: SubgraphHit) -> str:
        """Observation text for the retriever tool; entities cite their ids."""
        lines = [
            f"[{e.id}] (score={hit.scores[e.id]:.4f}) {e.rendered()}" for e in hit.entities
        ]
        by_id = self._entities
        for relation in hit.relations:
            lines.append(
                f"{by_id[relation.from_id].name} {relation.kind.value} "
                f"{by_id[relation.to_id].name}"
            )
        return "\n".join(lines) if lines else "No matching records."


def build(doc: GraphDoc, embedder: EmbeddingProvider) -> KnowledgeGraph:
    """Embed every entity and relation rendering into a retrievable store.

    Refuses invalid documents so validation findings are always surfaced
    before a graph can be queried.
    """
    report = validate(doc)
    if not report.valid:
        raise EditProducesInvalidGraph(
            "cannot build an invalid graph: "
            + "; ".join(f"{e.code}({e.subject})" for e in report.errors)
        )
    index = SemanticIndex(embedder)
    by_id = doc.entity_by_id()
    for entity in doc.entities:
        index.add_record(
            entity.id,
            entity.rendered(),
            {"kind": entity.kind.value, "name": entity.name, "record": "entity"},
        )
    for relation in doc.relations:
        rendered = (
            f"{by_id[relation.from_id].name} {relation.kind.value} "
            f"{by_id[relation.to_id].name}"
        )
        index.add_record(
            _relation_record_id(relation),
            rendered,
            {"kind": relation.kind.value, "record": "relation"},
        )
    return KnowledgeGraph(doc, index)


def kg_retriever_tool(graph: KnowledgeGraph, *, k: int = 4):
    """Tool the context agents use to query the graph."""
    from susreq.agents import Tool

    def handler(query: str) -> str:
        return graph.render_hits(graph.retrieve_subgraph(query, k=k))

    return Tool(
        name="kg_retriever",
        description=(
            "Search the sustainability knowledge graph for goals, targets and "
            "indicators related to the query; results cite entity ids in brackets."
        ),
        handler=handler,
    )


def extract_entity_refs(graph: KnowledgeGraph, text: str) -> list[str]:
    """Entity ids cited in free text, in graph order (word-boundary match)."""
    found = []
    for entity_id in graph.entity_ids():
        if re.search(rf"(?<![\w-]){re.escape(entity_id)}(?![\w-])", text):
            found.append(entity_id)
    return found


def count_incident(doc: GraphDoc, entity_id: str) -> int:
    """Number of relations touching entity_id (either endpoint)."""
    return sum(1 for r in doc.relations if entity_id in (r.from_id, r.to_id))


def worked_example_ids(doc: GraphDoc, kinds: Iterable[EntityKind]) -> list[str]:
    wanted = set(kinds)
    return [e.id for e in doc.entities if e.kind in wanted]
