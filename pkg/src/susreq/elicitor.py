"""Stage 1: derive the product-relevant SR set from taxonomy plus graph context.

Per scope chunk, a context agent queries the knowledge graph and leaves a
memory entry; a synthesis loop consolidates them into the product context.
A second per-chunk agent then nominates taxonomy entries (by retriever
record id — SRs are never free text, so nothing outside the taxonomy can be
elicited), and the expert approval loop turns approved candidates into the
elicited SR set.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field, replace

from susreq.agents import (
    AgentTranscript,
    BufferMemory,
    ChatProvider,
    ToolRegistry,
    retriever_tool,
    run_react,
    synthesize,
)
from susreq.corpus import Chunk, Dimension, Kind, Requirement, TaxonomyEntry
from susreq.errors import (
    ApproveWithZeroApprovedCandidates,
    ChunkLoopFailed,
    SynthesisRefViolation,
    UnknownCandidateRef,
)
from susreq.kg import KnowledgeGraph, extract_entity_refs, kg_retriever_tool
from susreq.prompts import render_prompt
from susreq.review import ReviewAction, ReviewDecision
from susreq.semindex import SemanticIndex


class CandidateStatus(enum.Enum):
    PROPOSED = "Proposed"
    APPROVED = "Approved"
    REJECTED = "Rejected"


@dataclass(frozen=True)
class ContextItem:
    """Per-chunk context: the graph entities the agent tied to the chunk."""

    chunk_id: str
    goals: tuple[str, ...]
    targets: tuple[str, ...]
    indicators: tuple[str, ...]
    relationships: tuple[tuple[str, str, str], ...]
    rationale_text: str

    def all_refs(self) -> set[str]:
        return set(self.goals) | set(self.targets) | set(self.indicators)

    def to_jsonable(self) -> dict:
        return {
            "chunk_id": self.chunk_id,
            "goals": list(self.goals),
            "targets": list(self.targets),
            "indicators": list(self.indicators),
            "relationships": [list(r) for r in self.relationships],
            "rationale_text": self.rationale_text,
        }


@dataclass(frozen=True)
class GeneratedContext:
    items: tuple[ContextItem, ...]
    synthesis_text: str
    synthesis_refs: tuple[str, ...]
    transcripts: tuple[AgentTranscript, ...]


@dataclass(frozen=True)
class CandidateSR:
    taxonomy_record_id: str
    entry: TaxonomyEntry
    rationale: str
    supporting_context: tuple[str, ...]
    status: CandidateStatus = CandidateStatus.PROPOSED

    def to_jsonable(self) -> dict:
        return {
            "taxonomy_record_id": self.taxonomy_record_id,
            "requirement": self.entry.requirement_text,
            "dimension": self.entry.dimension.value,
            "category": self.entry.category,
            "rationale": self.rationale,
            "supporting_context": list(self.supporting_context),
            "status": self.status.value,
        }


def candidate_from_jsonable(payload: dict) -> CandidateSR:
    return CandidateSR(
        taxonomy_record_id=payload["taxonomy_record_id"],
        entry=TaxonomyEntry(
            requirement_text=payload["requirement"],
            dimension=Dimension.parse(payload["dimension"]),
            category=payload["category"],
        ),
        rationale=payload["rationale"],
        supporting_context=tuple(payload["supporting_context"]),
        status=CandidateStatus(payload.get("status", "Proposed")),
    )


@dataclass(frozen=True)
class ElicitedSRSet:
    project_id: str
    members: tuple[Requirement, ...]
    round: int
    approval_record: str

    def __post_init__(self) -> None:
        if not self.members:
            raise ApproveWithZeroApprovedCandidates("elicited SR set cannot be empty")

    def dimension_counts(self) -> dict[str, int]:
        """SRs per dimension; always sums to the set size."""
        counts = {dim.value: 0 for dim in Dimension}
        for member in self.members:
            assert member.dimension is not None
            counts[member.dimension.value] += 1
        return counts

    def to_jsonable(self) -> dict:
        return {
            "project_id": self.project_id,
            "round": self.round,
            "approval_record": self.approval_record,
            "members": [
                {
                    "id": m.id,
                    "text": m.text,
                    "dimension": m.dimension.value if m.dimension else None,
                    "category": m.category,
                }
                for m in self.members
            ],
        }


def sr_set_from_jsonable(payload: dict) -> ElicitedSRSet:
    return ElicitedSRSet(
        project_id=payload["project_id"],
        members=tuple(
            Requirement(
                id=m["id"],
                kind=Kind.SR,
                text=m["text"],
                dimension=Dimension.parse(m["dimension"]),
                category=m["category"],
            )
            for m in payload["members"]
        ),
        round=payload["round"],
        approval_record=payload["approval_record"],
    )


@dataclass(frozen=True)
class ElicitationRound:
    """A re-run request: new candidates, incremented round."""

    round: int
    candidates: tuple[CandidateSR, ...]


def _classify_refs(
    graph: KnowledgeGraph, refs: list[str]
) -> tuple[tuple[str, ...], tuple[str, ...], tuple[str, ...]]:
    by_id = graph.doc.entity_by_id()
    goals, targets, indicators = [], [], []
    for ref in refs:
        kind = by_id[ref].kind.value
        (goals if kind == "Goal" else targets if kind == "Target" else indicators).append(ref)
    return tuple(goals), tuple(targets), tuple(indicators)


def generate_context(
    chunks: list[Chunk],
    graph: KnowledgeGraph,
    provider: ChatProvider,
    *,
    context_index: SemanticIndex | None = None,
    memory: BufferMemory | None = None,
    max_steps: int = 8,
    strict: bool = True,
) -> GeneratedContext:
    """Run the per-chunk context loops plus the final synthesis loop.

    One memory entry is stored per chunk; the synthesis final answer is the
    consolidated context. In strict mode any failed chunk loop aborts the
    stage naming the chunk; lenient mode collects what succeeded. Entity
    references in answers must resolve in the graph by construction (they
    are extracted by known-id match); synthesis references outside the
    per-chunk union are a validation failure.
    """
    tools = ToolRegistry([kg_retriever_tool(graph)])
    memory = memory if memory is not None else BufferMemory()
    items: list[ContextItem] = []
    transcripts: list[AgentTranscript] = []

    for chunk in chunks:
        prompt = render_prompt(
            "context_iterative",
            {
                "tools": tools.render_tools(),
                "tool_names": tools.render_tool_names(),
                "chunk_id": chunk.chunk_id,
                "input": chunk.text,
                "agent_scratchpad": "",
            },
        )
        transcript = run_react(provider, prompt, tools, max_steps=max_steps)
        transcripts.append(transcript)
        if transcript.status != "ok" or transcript.final_answer is None:
            if strict:
                raise ChunkLoopFailed(
                    f"context loop failed for chunk {chunk.chunk_id}: "
                    f"{transcript.failure_reason}"
                )
            continue
        answer = transcript.final_answer
        memory.append(chunk.chunk_id, answer)
        refs = extract_entity_refs(graph, answer)
        goals, targets, indicators = _classify_refs(graph, refs)
        ref_set = set(refs)
        relationships = tuple(
            r.key()
            for r in graph.doc.relations
            if r.from_id in ref_set and r.to_id in ref_set
        )
        items.append(
            ContextItem(
                chunk_id=chunk.chunk_id,
                goals=goals,
                targets=targets,
                indicators=indicators,
                relationships=relationships,
                rationale_text=answer,
            )
        )

    synthesis_text, synthesis_transcript = synthesize(provider, memory, tools, max_steps=max_steps)
    transcripts.append(synthesis_transcript)
    synthesis_refs = tuple(extract_entity_refs(graph, synthesis_text))
    union = set().union(*(item.all_refs() for item in items)) if items else set()
    stray = [ref for ref in synthesis_refs if ref not in union]
    if stray and strict:
        raise SynthesisRefViolation(
            f"synthesis cites entities absent from per-chunk results: {', '.join(stray)}"
        )

    if context_index is not None:
        for item in items:
            context_index.add_record(
                f"ctx-{item.chunk_id}",
                item.rationale_text,
                {"chunk_id": item.chunk_id, "record": "context"},
            )
        context_index.add_record(
            "ctx-synthesis", synthesis_text, {"record": "synthesis"}
        )

    return GeneratedContext(
        items=tuple(items),
        synthesis_text=synthesis_text,
        synthesis_refs=synthesis_refs,
        transcripts=tuple(transcripts),
    )


def _taxonomy_entry_from_record(record) -> TaxonomyEntry:
    meta = record.metadata
    return TaxonomyEntry(
        requirement_text=meta["requirement"],
        dimension=Dimension.parse(meta["dimension"]),
        category=meta["category"],
    )


def extract_record_refs(index: SemanticIndex, text: str) -> list[str]:
    """Record ids cited in free text, in index order (word-boundary match)."""
    found = []
    for record in index.records():
        if re.search(rf"(?<![\w-]){re.escape(record.record_id)}(?![\w-])", text):
            found.append(record.record_id)
    return found


def render_feedback(feedback_rounds: list[str]) -> str:
    """The 'Expert feedback' block; all prior rounds accumulate."""
    if not feedback_rounds:
        return "None."
    return "\n".join(
        f"- round {i}: {text}" for i, text in enumerate(feedback_rounds, start=1)
    )


def derive_srs(
    chunks: list[Chunk],
    context_index: SemanticIndex,
    taxonomy_index: SemanticIndex,
    provider: ChatProvider,
    *,
    feedback_rounds: list[str] | None = None,
    max_steps: int = 8,
    strict: bool = True,
) -> tuple[list[CandidateSR], list[AgentTranscript]]:
    """Per-chunk SR nomination with the context and taxonomy retrievers.

    Candidates are deduplicated by taxonomy entry identity: the same row
    nominated from several chunks yields one candidate with all supporting
    context refs. Every candidate carries the nominating rationale.
    """
    tools = ToolRegistry(
        [
            retriever_tool(
                "context_retriever",
                "Recall the sustainability goals, targets and indicators already "
                "derived for this product.",
                context_index,
            ),
            retriever_tool(
                "taxonomy_retriever",
                "Find sustainability requirements in the taxonomy that are "
                "semantically related to the query; results cite record ids in brackets.",
                taxonomy_index,
            ),
        ]
    )
    transcripts: list[AgentTranscript] = []
    by_record: dict[str, CandidateSR] = {}
    feedback_block = render_feedback(feedback_rounds or [])

    for chunk in chunks:
        prompt = render_prompt(
            "sr_derivation",
            {
                "tools": tools.render_tools(),
                "tool_names": tools.render_tool_names(),
                "chunk_id": chunk.chunk_id,
                "feedback": feedback_block,
                "input": chunk.text,
                "agent_scratchpad": "",
            },
        )
        transcript = run_react(provider, prompt, tools, max_steps=max_steps)
        transcripts.append(transcript)
        if transcript.status != "ok" or transcript.final_answer is None:
            if strict:
                raise ChunkLoopFailed(
                    f"derivation loop failed for chunk {chunk.chunk_id}: "
                    f"{transcript.failure_reason}"
                )
            continue
        answer = transcript.final_answer
        for record_id in extract_record_refs(taxonomy_index, answer):
            existing = by_record.get(record_id)
            if existing is None:
                by_record[record_id] = CandidateSR(
                    taxonomy_record_id=record_id,
                    entry=_taxonomy_entry_from_record(taxonomy_index.get(record_id)),
                    rationale=answer,
                    supporting_context=(chunk.chunk_id,),
                )
            else:
                rationale = existing.rationale
                if answer not in rationale:
                    rationale = rationale + "\n\n" + answer
                by_record[record_id] = replace(
                    existing,
                    rationale=rationale,
                    supporting_context=existing.supporting_context + (chunk.chunk_id,),
                )

    candidates = sorted(by_record.values(), key=lambda c: c.taxonomy_record_id)
    return candidates, transcripts


def validate_candidates(
    candidates: list[CandidateSR], taxonomy_index: SemanticIndex
) -> None:
    """Referential integrity gate before candidates are persisted."""
    for candidate in candidates:
        if candidate.taxonomy_record_id not in taxonomy_index:
            raise UnknownCandidateRef(
                f"candidate references unknown taxonomy record "
                f"{candidate.taxonomy_record_id!r}"
            )
        if not candidate.rationale.strip():
            raise UnknownCandidateRef(
                f"candidate {candidate.taxonomy_record_id!r} has an empty rationale"
            )
        if not candidate.supporting_context:
            raise UnknownCandidateRef(
                f"candidate {candidate.taxonomy_record_id!r} has no supporting context"
            )


@dataclass(frozen=True)
class ReviewOutcome:
    sr_set: ElicitedSRSet | None = None
    next_round: ElicitationRound | None = None
    candidates: tuple[CandidateSR, ...] = ()


def review_round(
    candidates: list[CandidateSR],
    decision: ReviewDecision,
    *,
    project_id: str,
    round_index: int,
    rerun=None,
) -> ReviewOutcome:
    """Apply one expert decision to a proposed candidate list.

    Approve freezes the approved subset (listed in subject_refs
    ``approved_ids``; an omitted list approves everything) into the
    elicited SR set. RequestChanges re-runs the derivation with the
    feedback text injected and the round incremented.
    """
    if decision.action is ReviewAction.REQUEST_CHANGES:
        if rerun is None:
            raise ValueError("RequestChanges needs a rerun callable")
        new_candidates = rerun(decision.feedback)
        return ReviewOutcome(
            next_round=ElicitationRound(round_index + 1, tuple(new_candidates))
        )
    if decision.action is not ReviewAction.APPROVE:
        raise ValueError(f"unsupported decision {decision.action.value} for SR approval")

    approved_ids = decision.subject_refs.get("approved_ids")
    if approved_ids is None:
        approved_ids = [c.taxonomy_record_id for c in candidates]
    approved_set = set(approved_ids)
    reviewed = tuple(
        replace(
            c,
            status=CandidateStatus.APPROVED
            if c.taxonomy_record_id in approved_set
            else CandidateStatus.REJECTED,
        )
        for c in candidates
    )
    approved = [c for c in reviewed if c.status is CandidateStatus.APPROVED]
    if not approved:
        raise ApproveWithZeroApprovedCandidates(
            "approval would leave the SR set empty; reject with feedback instead"
        )
    members = tuple(
        Requirement(
            id=f"SR{i}",
            kind=Kind.SR,
            text=c.entry.requirement_text,
            dimension=c.entry.dimension,
            category=c.entry.category,
        )
        for i, c in enumerate(approved, start=1)
    )
    sr_set = ElicitedSRSet(
        project_id=project_id,
        members=members,
        round=round_index,
        approval_record=decision.decision_id,
    )
    return ReviewOutcome(sr_set=sr_set, candidates=reviewed)
