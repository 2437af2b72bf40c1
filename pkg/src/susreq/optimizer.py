"""Stage 3: revise FRs/NFRs that negatively correlate with an SR.

Each negative mixed verdict becomes an optimization task carrying the SRs
that conflict with the violated SR and also touch the same requirement.
The revision prompt yields three labeled candidates plus a recommendation;
revalidation re-classifies the revised pair and measures how far the text
drifted from the original. Analyst decisions close the loop. SR texts are
never touched; only FR/NFR texts are revised, and originals are kept with
a superseded-by link.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

from susreq.agents import AgentTranscript, ChatProvider, prompt_hash
from susreq.corpus import Requirement
from susreq.embeddings import EmbeddingProvider
from susreq.errors import (
    SchemaViolation,
    UnparseableProposal,
    WrongTaskState,
)
from susreq.prompts import render_prompt
from susreq.relations import (
    PairKind,
    Relation,
    RelationVerdict,
    RequirementPair,
)
from susreq.review import ReviewAction, ReviewDecision
from susreq.semindex import cosine


class TaskStatus(enum.Enum):
    PENDING = "Pending"
    PROPOSED = "Proposed"
    REVALIDATED = "Revalidated"
    ACCEPTED = "Accepted"
    REJECTED = "Rejected"


class CandidateLabel(enum.Enum):
    MINIMAL = "Minimal"
    MODERATE = "Moderate"
    ALTERNATIVE = "Alternative"


class Level(enum.Enum):
    LOW = "Low"
    MEDIUM = "Medium"
    HIGH = "High"


_PERCENTAGE = re.compile(r"^\d+(\.\d+)?\s*%$")


@dataclass(frozen=True)
class RevisionCandidate:
    label: CandidateLabel
    revised_text: str
    preservation_score: int
    estimated_sr_impact_reduction: str
    confidence: Level
    acceptance_criteria: tuple[str, ...]
    residual_risks: tuple[str, ...]

    def to_jsonable(self) -> dict:
        return {
            "label": self.label.value,
            "revised_requirement": self.revised_text,
            "preservation_score": self.preservation_score,
            "estimated_SR_impact_reduction": self.estimated_sr_impact_reduction,
            "confidence": self.confidence.value,
            "acceptance_criteria": list(self.acceptance_criteria),
            "residual_risks": list(self.residual_risks),
        }


@dataclass(frozen=True)
class RevisionProposal:
    original_requirement: str
    requirement_type: str  # "FR" | "NFR"
    sustainability_requirement: str
    candidates: tuple[RevisionCandidate, ...]
    recommended_text: str
    recommended_justification: str

    def to_jsonable(self) -> dict:
        return {
            "original_requirement": self.original_requirement,
            "requirement_type": self.requirement_type,
            "sustainability_requirement": self.sustainability_requirement,
            "candidates": [c.to_jsonable() for c in self.candidates],
            "recommended": {
                "revised_requirement": self.recommended_text,
                "justification": self.recommended_justification,
            },
        }


def _require(payload: dict, key: str):
    if key not in payload:
        raise SchemaViolation(f"missing field {key!r}")
    return payload[key]


def parse_revision_proposal(text: str) -> RevisionProposal:
    """Parse and schema-check one optimizer reply.

    Exactly three candidates labeled Minimal/Moderate/Alternative;
    preservation_score an integer in 0..100; confidence one of
    Low/Medium/High; impact reduction a level or a percentage; the
    recommendation must equal one candidate's revised text. Violations
    raise SchemaViolation, non-JSON raises UnparseableProposal.
    """
    fenced = re.search(r"```(?:json)?\s*(.*?)```", text, re.DOTALL)
    raw = fenced.group(1) if fenced else text
    start, end = raw.find("{"), raw.rfind("}")
    if start == -1 or end <= start:
        raise UnparseableProposal("no JSON object in optimizer reply")
    try:
        payload = json.loads(raw[start : end + 1])
    except ValueError as exc:
        raise UnparseableProposal(f"optimizer reply is not JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise UnparseableProposal("optimizer reply is not a JSON object")

    raw_candidates = _require(payload, "candidates")
    if not isinstance(raw_candidates, list) or len(raw_candidates) != 3:
        raise SchemaViolation(
            f"expected exactly 3 candidates, got "
            f"{len(raw_candidates) if isinstance(raw_candidates, list) else type(raw_candidates).__name__}"
        )
    candidates = []
    for raw_candidate in raw_candidates:
        try:
            label = CandidateLabel(_require(raw_candidate, "label"))
        except ValueError as exc:
            raise SchemaViolation(str(exc)) from exc
        score = _require(raw_candidate, "preservation_score")
        if isinstance(score, bool) or not isinstance(score, int) or not 0 <= score <= 100:
            raise SchemaViolation(
                f"candidate {label.value}: preservation_score must be an integer "
                f"in 0..100, got {score!r}"
            )
        impact = str(_require(raw_candidate, "estimated_SR_impact_reduction")).strip()
        if impact not in ("Low", "Medium", "High") and not _PERCENTAGE.match(impact):
            raise SchemaViolation(
                f"candidate {label.value}: impact reduction must be "
                f"Low/Medium/High or a percentage, got {impact!r}"
            )
        try:
            confidence = Level(_require(raw_candidate, "confidence"))
        except ValueError as exc:
            raise SchemaViolation(f"candidate {label.value}: {exc}") from exc
        criteria = _require(raw_candidate, "acceptance_criteria")
        risks = _require(raw_candidate, "residual_risks")
        if not isinstance(criteria, list) or not isinstance(risks, list):
            raise SchemaViolation(
                f"candidate {label.value}: acceptance_criteria and residual_risks "
                "must be lists"
            )
        revised = str(_require(raw_candidate, "revised_requirement")).strip()
        if not revised:
            raise SchemaViolation(f"candidate {label.value}: empty revised_requirement")
        candidates.append(
            RevisionCandidate(
                label=label,
                revised_text=revised,
                preservation_score=score,
                estimated_sr_impact_reduction=impact,
                confidence=confidence,
                acceptance_criteria=tuple(str(c) for c in criteria),
                residual_risks=tuple(str(r) for r in risks),
            )
        )
    labels = {c.label for c in candidates}
    if labels != set(CandidateLabel):
        raise SchemaViolation(
            f"candidate labels must be exactly Minimal/Moderate/Alternative, "
            f"got {sorted(l.value for l in labels)}"
        )

    recommended = _require(payload, "recommended")
    if not isinstance(recommended, dict):
        raise SchemaViolation("recommended must be an object")
    recommended_text = str(_require(recommended, "revised_requirement")).strip()
    if recommended_text not in {c.revised_text for c in candidates}:
        raise SchemaViolation(
            "recommended.revised_requirement does not match any candidate"
        )
    return RevisionProposal(
        original_requirement=str(_require(payload, "original_requirement")),
        requirement_type=str(_require(payload, "requirement_type")),
        sustainability_requirement=str(_require(payload, "sustainability_requirement")),
        candidates=tuple(candidates),
        recommended_text=recommended_text,
        recommended_justification=str(recommended.get("justification", "")),
    )


@dataclass
class OptimizationTask:
    """One negative mixed pair on its way through the revision loop."""

    pair: RequirementPair
    verdict: RelationVerdict
    constraint_srs: tuple[Requirement, ...] = ()
    status: TaskStatus = TaskStatus.PENDING
    proposal: RevisionProposal | None = None
    proposal_prompt_hash: str | None = None
    similarity_to_original: float | None = None
    revalidation: RelationVerdict | None = None
    revalidation_success: bool | None = None
    revisable: bool = False
    rounds: int = 0
    feedback: list[str] = field(default_factory=list)
    accepted_risk: bool = False
    final_text: str | None = None

    @property
    def task_id(self) -> str:
        return self.pair.pair_id

    @property
    def requirement(self) -> Requirement:
        return self.pair.left

    @property
    def sr(self) -> Requirement:
        return self.pair.right

    def to_jsonable(self) -> dict:
        return {
            "task_id": self.task_id,
            "pair_id": self.pair.pair_id,
            "requirement": {"id": self.requirement.id, "text": self.requirement.text},
            "requirement_kind": self.requirement.kind.value,
            "sr": {"id": self.sr.id, "text": self.sr.text},
            "constraint_srs": [{"id": s.id, "text": s.text} for s in self.constraint_srs],
            "verdict": self.verdict.to_jsonable(),
            "status": self.status.value,
            "proposal": self.proposal.to_jsonable() if self.proposal else None,
            "proposal_prompt_hash": self.proposal_prompt_hash,
            "similarity_to_original": self.similarity_to_original,
            "revalidation": self.revalidation.to_jsonable() if self.revalidation else None,
            "revalidation_success": self.revalidation_success,
            "revisable": self.revisable,
            "rounds": self.rounds,
            "feedback": list(self.feedback),
            "accepted_risk": self.accepted_risk,
            "final_text": self.final_text,
        }


def proposal_from_jsonable(payload: dict) -> RevisionProposal:
    # the artifact form is exactly the model-output schema
    return parse_revision_proposal(json.dumps(payload))


def task_from_jsonable(payload: dict, pairs_by_id: dict[str, RequirementPair]) -> OptimizationTask:
    pair = pairs_by_id[payload["pair_id"]]
    task = OptimizationTask(
        pair=pair,
        verdict=RelationVerdict.from_jsonable(payload["verdict"]),
        constraint_srs=tuple(
            pairs_by_id[f"{pair.left.id}::{sr['id']}"].right
            for sr in payload["constraint_srs"]
            if f"{pair.left.id}::{sr['id']}" in pairs_by_id
        ),
        status=TaskStatus(payload["status"]),
        proposal=proposal_from_jsonable(payload["proposal"]) if payload.get("proposal") else None,
        proposal_prompt_hash=payload.get("proposal_prompt_hash"),
        similarity_to_original=payload.get("similarity_to_original"),
        revalidation=RelationVerdict.from_jsonable(payload["revalidation"])
        if payload.get("revalidation")
        else None,
        revalidation_success=payload.get("revalidation_success"),
        revisable=payload.get("revisable", False),
        rounds=payload.get("rounds", 0),
        feedback=list(payload.get("feedback", [])),
        accepted_risk=payload.get("accepted_risk", False),
        final_text=payload.get("final_text"),
    )
    return task


def find_negative_pairs(
    verdicts: Sequence[RelationVerdict],
    related_pairs: Sequence[RequirementPair],
    *,
    run_index: int = 1,
) -> list[OptimizationTask]:
    """One task per Negative FR_SR/NFR_SR verdict.

    constraint_srs holds every SR that (a) has a Negative SR_SR verdict with
    the task's SR and (b) is itself related to the task's requirement.
    """
    pairs_by_id = {p.pair_id: p for p in related_pairs}
    run_verdicts = [v for v in verdicts if v.run_index == run_index]

    # SR pairs with a negative verdict, in both directions.
    sr_conflicts: dict[str, set[str]] = {}
    for verdict in run_verdicts:
        pair = pairs_by_id.get(verdict.pair_id)
        if pair is None or pair.pair_kind is not PairKind.SR_SR:
            continue
        if verdict.relation is Relation.NEGATIVE:
            sr_conflicts.setdefault(pair.left.id, set()).add(pair.right.id)
            sr_conflicts.setdefault(pair.right.id, set()).add(pair.left.id)

    # SRs related to each FR/NFR via the related-pair set.
    related_srs: dict[str, dict[str, Requirement]] = {}
    for pair in related_pairs:
        if pair.pair_kind in (PairKind.FR_SR, PairKind.NFR_SR):
            related_srs.setdefault(pair.left.id, {})[pair.right.id] = pair.right

    tasks: list[OptimizationTask] = []
    for verdict in run_verdicts:
        pair = pairs_by_id.get(verdict.pair_id)
        if pair is None or pair.pair_kind is PairKind.SR_SR:
            continue
        if verdict.relation is not Relation.NEGATIVE:
            continue
        conflicting = sr_conflicts.get(pair.right.id, set())
        reachable = related_srs.get(pair.left.id, {})
        constraints = tuple(
            reachable[sr_id] for sr_id in sorted(conflicting) if sr_id in reachable
        )
        tasks.append(
            OptimizationTask(pair=pair, verdict=verdict, constraint_srs=constraints)
        )
    tasks.sort(key=lambda t: t.task_id)
    return tasks


def _render_constraints(task: OptimizationTask) -> str:
    if not task.constraint_srs:
        return "None."
    return "\n".join(f"- {sr.id}: {sr.text}" for sr in task.constraint_srs)


def propose_revision(
    task: OptimizationTask, provider: ChatProvider
) -> tuple[OptimizationTask, str]:
    """Ask the provider for a revision proposal; task moves to Proposed.

    One repair re-ask on an invalid reply, then the parse error propagates.
    Returns the updated task and the raw model text (kept for audit).
    """
    if task.status not in (TaskStatus.PENDING, TaskStatus.PROPOSED, TaskStatus.REVALIDATED):
        raise WrongTaskState(f"task {task.task_id} is {task.status.value}; cannot propose")
    prompt = render_prompt(
        "revision_optimizer",
        {
            "requirement_a": f"{task.requirement.id}: {task.requirement.text}",
            "requirement_type": task.requirement.kind.value,
            "sustainability_requirement": f"{task.sr.id}: {task.sr.text}",
            "conflicting_relations": _render_constraints(task),
            "feedback": "\n".join(f"- {f}" for f in task.feedback) or "None.",
        },
    )
    model_text = provider.complete(prompt)
    try:
        proposal = parse_revision_proposal(model_text)
    except (UnparseableProposal, SchemaViolation) as first_error:
        repair = (
            prompt
            + "\n\nYour previous reply was rejected: "
            + str(first_error)
            + "\nReply again with ONLY the JSON object in the required schema."
        )
        model_text = provider.complete(repair)
        proposal = parse_revision_proposal(model_text)
    task.proposal = proposal
    task.proposal_prompt_hash = prompt_hash(prompt)
    task.status = TaskStatus.PROPOSED
    task.rounds += 1
    # a fresh proposal invalidates any earlier revalidation
    task.similarity_to_original = None
    task.revalidation = None
    task.revalidation_success = None
    task.revisable = False
    return task, model_text


def revalidate(
    task: OptimizationTask,
    embedder: EmbeddingProvider,
    classify_fn: Callable[[RequirementPair], RelationVerdict],
) -> OptimizationTask:
    """Two-step validation of a proposed revision.

    (a) cosine similarity between the original and the recommended revision
    is stored; (b) the (revised requirement, SR) pair is re-classified.
    Positive or Neutral means success (Neutral is flagged revisable);
    Negative means the task may be re-proposed.
    """
    if task.status not in (TaskStatus.PROPOSED, TaskStatus.REVALIDATED) or task.proposal is None:
        raise WrongTaskState(f"task {task.task_id} is {task.status.value}; cannot revalidate")
    revised_text = task.proposal.recommended_text
    task.similarity_to_original = cosine(
        embedder.embed(task.requirement.text), embedder.embed(revised_text)
    )
    revised_pair = replace(
        task.pair,
        pair_id=f"{task.pair.pair_id}::rev{task.rounds}",
        left=replace(task.requirement, text=revised_text),
        similarity=None,
    )
    verdict = classify_fn(revised_pair)
    task.revalidation = verdict
    task.revalidation_success = verdict.relation in (Relation.POSITIVE, Relation.NEUTRAL)
    task.revisable = verdict.relation is Relation.NEUTRAL
    task.status = TaskStatus.REVALIDATED
    return task


def analyst_review(
    task: OptimizationTask,
    decision: ReviewDecision,
    *,
    repropose: Callable[[OptimizationTask], OptimizationTask] | None = None,
    reproposal_limit: int = 3,
) -> OptimizationTask:
    """Apply one analyst decision to a revalidated task.

    Accept freezes the recommended revision (original preserved with a
    superseded-by link in the final requirements). RequestChanges re-runs
    the proposal with the feedback appended, bounded by reproposal_limit;
    past the limit the task stays Revalidated for explicit sign-off.
    Reject restores the original and flags the pair as accepted risk.
    """
    if task.status is not TaskStatus.REVALIDATED:
        raise WrongTaskState(
            f"task {task.task_id} is {task.status.value}; decisions apply to "
            "Revalidated tasks"
        )
    if decision.action is ReviewAction.APPROVE:
        assert task.proposal is not None
        task.status = TaskStatus.ACCEPTED
        task.final_text = task.proposal.recommended_text
        return task
    if decision.action is ReviewAction.REJECT:
        task.status = TaskStatus.REJECTED
        task.accepted_risk = True
        task.final_text = task.requirement.text
        return task
    # RequestChanges
    assert decision.feedback is not None
    task.feedback.append(decision.feedback)
    if task.rounds >= reproposal_limit:
        raise WrongTaskState(
            f"task {task.task_id} reached the re-proposal limit ({reproposal_limit}); "
            "explicit Accept or Reject required"
        )
    if repropose is None:
        raise ValueError("RequestChanges needs a repropose callable")
    return repropose(task)


@dataclass(frozen=True)
class CompletenessReport:
    satisfied_srs: tuple[str, ...]
    unsatisfied_srs: tuple[str, ...]
    satisfied_definition: str
    evidence: dict[str, tuple[str, ...]]

    def to_jsonable(self) -> dict:
        return {
            "satisfied_srs": list(self.satisfied_srs),
            "unsatisfied_srs": list(self.unsatisfied_srs),
            "satisfied_definition": self.satisfied_definition,
            "evidence": {k: list(v) for k, v in self.evidence.items()},
        }


_POSITIVE_DEFINITION = (
    "an SR is satisfied iff it appears in at least one FR/NFR related pair "
    "whose final (post-optimization) verdict is Positive"
)
_LITERAL_DEFINITION = (
    "an SR is satisfied iff it appears in at least one FR/NFR related pair, "
    "regardless of the verdict"
)


def completeness_check(
    sr_set,
    final_verdicts: Sequence[RelationVerdict],
    related_pairs: Sequence[RequirementPair],
    *,
    predicate: str = "positive",
) -> CompletenessReport:
    """Partition the elicited SRs into satisfied and unsatisfied.

    The default predicate requires at least one Positive FR/NFR pair; the
    'literal' predicate counts bare membership in a related pair. The two
    lists always partition the SR set exactly.
    """
    if predicate not in ("positive", "literal"):
        raise ValueError(f"unknown completeness predicate {predicate!r}")
    pairs_by_id = {p.pair_id: p for p in related_pairs}
    evidence: dict[str, list[str]] = {sr.id: [] for sr in sr_set.members}

    if predicate == "literal":
        for pair in related_pairs:
            if pair.pair_kind in (PairKind.FR_SR, PairKind.NFR_SR):
                if pair.right.id in evidence:
                    evidence[pair.right.id].append(pair.pair_id)
    else:
        for verdict in final_verdicts:
            pair = pairs_by_id.get(verdict.pair_id)
            if pair is None or pair.pair_kind is PairKind.SR_SR:
                continue
            if verdict.relation is Relation.POSITIVE and pair.right.id in evidence:
                evidence[pair.right.id].append(verdict.pair_id)

    satisfied = tuple(sr.id for sr in sr_set.members if evidence[sr.id])
    unsatisfied = tuple(sr.id for sr in sr_set.members if not evidence[sr.id])
    return CompletenessReport(
        satisfied_srs=satisfied,
        unsatisfied_srs=unsatisfied,
        satisfied_definition=_POSITIVE_DEFINITION
        if predicate == "positive"
        else _LITERAL_DEFINITION,
        evidence={k: tuple(v) for k, v in evidence.items()},
    )


def final_verdicts_after_optimization(
    verdicts: Sequence[RelationVerdict],
    tasks: Sequence[OptimizationTask],
    *,
    run_index: int = 1,
) -> list[RelationVerdict]:
    """Original run verdicts with accepted revisions' revalidation outcomes
    substituted for their pairs."""
    overrides = {
        t.pair.pair_id: t.revalidation
        for t in tasks
        if t.status is TaskStatus.ACCEPTED and t.revalidation is not None
    }
    out = []
    for verdict in verdicts:
        if verdict.run_index != run_index:
            continue
        override = overrides.get(verdict.pair_id)
        if override is not None:
            out.append(replace(override, pair_id=verdict.pair_id, run_index=run_index))
        else:
            out.append(verdict)
    return out
