"""Stage 2: pair generation, similarity filtering, and relation classification.

Every FR and NFR is paired with each elicited SR, plus all SR-SR pairs;
pairs above the similarity threshold are classified by coordinator-routed
specialist agents (sustainability agent for SR-SR, mixed agent otherwise)
with catalog retriever tools. Catalog hits the agent received are recorded
as verdict provenance for the trustworthiness audit.
"""

from __future__ import annotations

import enum
import itertools
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

from susreq.agents import (
    AgentTranscript,
    ChatProvider,
    ToolRegistry,
    retriever_tool,
    run_react,
)
from susreq.corpus import Dimension, Kind, Requirement
from susreq.embeddings import EmbeddingProvider
from susreq.errors import (
    DegenerateLabels,
    EmptySRSet,
    RoutingError,
    UnparseableVerdict,
)
from susreq.prompts import render_prompt
from susreq.semindex import SemanticIndex, cosine


class PairKind(enum.Enum):
    SR_SR = "SR_SR"
    FR_SR = "FR_SR"
    NFR_SR = "NFR_SR"


class Relation(enum.Enum):
    POSITIVE = "Positive"
    NEGATIVE = "Negative"
    NEUTRAL = "Neutral"


@dataclass(frozen=True)
class RequirementPair:
    pair_id: str
    left: Requirement
    right: Requirement
    pair_kind: PairKind
    similarity: float | None = None

    def to_jsonable(self) -> dict:
        def member(req: Requirement) -> dict:
            return {
                "id": req.id,
                "kind": req.kind.value,
                "text": req.text,
                "dimension": req.dimension.value if req.dimension else None,
                "category": req.category,
            }

        return {
            "pair_id": self.pair_id,
            "left": member(self.left),
            "right": member(self.right),
            "pair_kind": self.pair_kind.value,
            "similarity": self.similarity,
        }


@dataclass(frozen=True)
class RelationVerdict:
    pair_id: str
    relation: Relation
    reason: str
    catalog_refs: tuple[str, ...] = ()
    transcript_ref: str | None = None
    run_index: int = 1

    def __post_init__(self) -> None:
        if not self.reason.strip():
            raise ValueError(f"verdict for {self.pair_id}: empty reason")

    @property
    def catalog_referred(self) -> bool:
        return bool(self.catalog_refs)

    def to_jsonable(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "relation": self.relation.value,
            "reason": self.reason,
            "catalog_refs": list(self.catalog_refs),
            "transcript_ref": self.transcript_ref,
            "run_index": self.run_index,
        }

    @classmethod
    def from_jsonable(cls, payload: dict) -> "RelationVerdict":
        return cls(
            pair_id=payload["pair_id"],
            relation=Relation(payload["relation"]),
            reason=payload["reason"],
            catalog_refs=tuple(payload.get("catalog_refs", [])),
            transcript_ref=payload.get("transcript_ref"),
            run_index=payload.get("run_index", 1),
        )


def pair_from_jsonable(payload: dict) -> RequirementPair:
    def member(raw: dict) -> Requirement:
        return Requirement(
            id=raw["id"],
            kind=Kind(raw["kind"]),
            text=raw["text"],
            dimension=Dimension.parse(raw["dimension"]) if raw.get("dimension") else None,
            category=raw.get("category"),
        )

    return RequirementPair(
        pair_id=payload["pair_id"],
        left=member(payload["left"]),
        right=member(payload["right"]),
        pair_kind=PairKind(payload["pair_kind"]),
        similarity=payload.get("similarity"),
    )


class CatalogId(enum.Enum):
    FR_DEPENDENCY = "FRDependency"
    NFR_CORRELATION = "NFRCorrelation"
    SR_CORRELATION = "SRCorrelation"


@dataclass
class CatalogSet:
    """The three knowledge catalogs, each indexed separately."""

    fr_dependency: SemanticIndex
    nfr_correlation: SemanticIndex
    sr_correlation: SemanticIndex

    def by_id(self, catalog_id: CatalogId) -> SemanticIndex:
        return {
            CatalogId.FR_DEPENDENCY: self.fr_dependency,
            CatalogId.NFR_CORRELATION: self.nfr_correlation,
            CatalogId.SR_CORRELATION: self.sr_correlation,
        }[catalog_id]


# --- pair generation -----------------------------------------------------------


def generate_pairs(
    frs: Sequence[Requirement],
    nfrs: Sequence[Requirement],
    srs: Sequence[Requirement],
) -> list[RequirementPair]:
    """All candidate pairs: |FR|*|SR| + |NFR|*|SR| + C(|SR|, 2).

    Deterministic order: FR_SR sorted by (fr.id, sr.id), then NFR_SR, then
    SR_SR with left.id < right.id. The SR is always the right member of a
    mixed pair; two FRs or two NFRs are never paired.
    """
    if not srs:
        raise EmptySRSet("pair generation needs at least one SR")
    for req, expected in itertools.chain(
        ((r, Kind.FR) for r in frs),
        ((r, Kind.NFR) for r in nfrs),
        ((r, Kind.SR) for r in srs),
    ):
        if req.kind is not expected:
            raise ValueError(f"{req.id} is a {req.kind.value}, expected {expected.value}")

    pairs: list[RequirementPair] = []
    for left in sorted(frs, key=lambda r: r.id):
        for right in sorted(srs, key=lambda r: r.id):
            pairs.append(
                RequirementPair(f"{left.id}::{right.id}", left, right, PairKind.FR_SR)
            )
    for left in sorted(nfrs, key=lambda r: r.id):
        for right in sorted(srs, key=lambda r: r.id):
            pairs.append(
                RequirementPair(f"{left.id}::{right.id}", left, right, PairKind.NFR_SR)
            )
    ordered_srs = sorted(srs, key=lambda r: r.id)
    for i, left in enumerate(ordered_srs):
        for right in ordered_srs[i + 1 :]:
            pairs.append(
                RequirementPair(f"{left.id}::{right.id}", left, right, PairKind.SR_SR)
            )
    return pairs


def filter_related(
    pairs: Sequence[RequirementPair],
    embedder: EmbeddingProvider,
    threshold: float = 0.65,
) -> list[RequirementPair]:
    """Keep exactly the pairs with cosine(left, right) >= threshold.

    Similarity is set on the kept pairs. Embeddings are computed once per
    distinct requirement text.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must be in [0, 1], got {threshold}")
    cache: dict[str, object] = {}

    def embed(text: str):
        if text not in cache:
            cache[text] = embedder.embed(text)
        return cache[text]

    kept: list[RequirementPair] = []
    for pair in pairs:
        similarity = cosine(embed(pair.left.text), embed(pair.right.text))
        if similarity >= threshold:
            kept.append(replace(pair, similarity=similarity))
    return kept


# --- threshold calibration --------------------------------------------------------

SWEEP_THRESHOLDS = tuple((50 + 5 * i) / 100 for i in range(9))  # 0.50 .. 0.90


@dataclass(frozen=True)
class SweepPoint:
    threshold: float
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class ThresholdCalibration:
    sweep: tuple[SweepPoint, ...]
    selected: float

    def to_jsonable(self) -> dict:
        return {
            "sweep": [vars(p) for p in self.sweep],
            "selected": self.selected,
        }


def calibrate_threshold(
    labeled_pairs: Sequence[tuple[str, str, int]],
    embedder: EmbeddingProvider,
) -> ThresholdCalibration:
    """Sweep thresholds 0.50..0.90 in steps of 0.05 over labeled pairs.

    Similarity >= t counts as predicted-related. The selected threshold is
    the F1 argmax, ties broken toward the lowest threshold. Needs both
    labels present (DegenerateLabels otherwise).
    """
    labels = {label for _, _, label in labeled_pairs}
    if labels != {0, 1}:
        raise DegenerateLabels(f"need both labels 0 and 1, got {sorted(labels)}")
    scored = [
        (cosine(embedder.embed(a), embedder.embed(b)), label)
        for a, b, label in labeled_pairs
    ]
    positives = sum(1 for _, label in scored if label == 1)
    sweep: list[SweepPoint] = []
    for threshold in SWEEP_THRESHOLDS:
        tp = sum(1 for sim, label in scored if sim >= threshold and label == 1)
        fp = sum(1 for sim, label in scored if sim >= threshold and label == 0)
        precision = tp / (tp + fp) if (tp + fp) else 0.0
        recall = tp / positives
        f1 = 2 * precision * recall / (precision + recall) if (precision + recall) else 0.0
        sweep.append(SweepPoint(threshold, precision, recall, f1))
    best = max(sweep, key=lambda p: (p.f1, -p.threshold))
    return ThresholdCalibration(sweep=tuple(sweep), selected=best.threshold)


def load_labeled_pairs_csv(text: str) -> list[tuple[str, str, int]]:
    """Calibration input: CSV with header text_a,text_b,label."""
    import csv
    import io

    reader = csv.reader(io.StringIO(text))
    rows = [row for row in reader if any(cell.strip() for cell in row)]
    if not rows or tuple(c.strip().lower() for c in rows[0]) != ("text_a", "text_b", "label"):
        raise ValueError("labeled-pair CSV needs header text_a,text_b,label")
    return [(a.strip(), b.strip(), int(label)) for a, b, label in rows[1:]]


# --- classification ---------------------------------------------------------------


def parse_verdict_block(text: str) -> tuple[Relation, str]:
    """Parse the four-field answer block into (relation, reason).

    The agent must commit to Positive/Negative/Neutral; anything else
    (including hedges like 'Mixed') is unparseable and triggers the repair
    re-ask upstream.
    """
    relation_at = text.find("Relation Type:")
    reason_at = text.find("Reason:")
    if relation_at == -1 or reason_at == -1 or reason_at < relation_at:
        raise UnparseableVerdict(f"missing Relation Type/Reason block in: {text[:80]!r}")
    relation_raw = text[relation_at + len("Relation Type:") : reason_at].strip()
    first_word = relation_raw.split()[0].strip(" .,-–") if relation_raw.split() else ""
    try:
        relation = Relation(first_word.capitalize())
    except ValueError:
        raise UnparseableVerdict(
            f"relation must be Positive, Negative or Neutral, got {relation_raw!r}"
        ) from None
    reason = text[reason_at + len("Reason:") :].strip()
    if not reason:
        raise UnparseableVerdict("empty reason")
    return relation, reason


def route_specialist(pair_kind: PairKind) -> str:
    """Coordinator routing: pair kind -> specialist template (total, exclusive)."""
    if pair_kind is PairKind.SR_SR:
        return "relation_sustainability"
    if pair_kind in (PairKind.FR_SR, PairKind.NFR_SR):
        return "relation_mixed"
    raise RoutingError(f"no specialist for pair kind {pair_kind!r}")


def _specialist_tools(
    pair_kind: PairKind, catalogs: CatalogSet, observed: list[str], k: int
) -> ToolRegistry:
    sr_tool = retriever_tool(
        "sustainability_correlation_catalog",
        "Known positive/negative correlations among sustainability categories.",
        catalogs.sr_correlation,
        k=k,
        observed_ids=observed,
    )
    if pair_kind is PairKind.SR_SR:
        return ToolRegistry([sr_tool])
    return ToolRegistry(
        [
            retriever_tool(
                "requirement_dependency_catalog",
                "Known dependency types among functional requirements.",
                catalogs.fr_dependency,
                k=k,
                observed_ids=observed,
            ),
            sr_tool,
            retriever_tool(
                "nfr_correlation_catalog",
                "Known absolute/relative conflicts among NFR categories.",
                catalogs.nfr_correlation,
                k=k,
                observed_ids=observed,
            ),
        ]
    )


def render_pair_input(pair: RequirementPair) -> str:
    return (
        f"Requirement 1 ({pair.left.id}): {pair.left.text}\n"
        f"Requirement 2 ({pair.right.id}): {pair.right.text}"
    )


_VERDICT_REPAIR = (
    "\nObservation: Your final answer did not contain a valid output block. Answer "
    "again ending with the block:\nRequirement 1:\nRequirement 2:\n"
    "Relation Type: (exactly one of Positive, Negative, Neutral)\nReason:\nThought: "
)


def classify(
    pair: RequirementPair,
    catalogs: CatalogSet,
    provider: ChatProvider,
    *,
    run_index: int = 1,
    max_steps: int = 8,
    retriever_k: int = 3,
) -> tuple[RelationVerdict, list[AgentTranscript]]:
    """Classify one related pair through its specialist agent.

    The coordinator routes by pair kind (a corrupted kind is a routing
    error, never a silent misclassification); the specialist runs a ReAct
    loop over the catalog tools and must answer with the four-field block.
    One repair re-ask on a malformed verdict, then UnparseableVerdict.
    catalog_refs records the catalog hits the agent actually received.
    """
    if not isinstance(pair.pair_kind, PairKind):
        raise RoutingError(f"pair {pair.pair_id}: invalid pair kind {pair.pair_kind!r}")
    template_id = route_specialist(pair.pair_kind)
    observed: list[str] = []
    tools = _specialist_tools(pair.pair_kind, catalogs, observed, retriever_k)
    prompt = render_prompt(
        template_id,
        {
            "tools": tools.render_tools(),
            "tool_names": tools.render_tool_names(),
            "input": render_pair_input(pair),
            "agent_scratchpad": "",
        },
    )
    transcripts: list[AgentTranscript] = []
    transcript = run_react(provider, prompt, tools, max_steps=max_steps)
    transcripts.append(transcript)
    if transcript.status != "ok" or transcript.final_answer is None:
        raise UnparseableVerdict(
            f"pair {pair.pair_id}: agent loop failed: {transcript.failure_reason}"
        )
    try:
        relation, reason = parse_verdict_block(transcript.final_answer)
    except UnparseableVerdict:
        transcript = run_react(
            provider, prompt + transcript.final_answer + _VERDICT_REPAIR, tools,
            max_steps=max_steps,
        )
        transcripts.append(transcript)
        if transcript.status != "ok" or transcript.final_answer is None:
            raise UnparseableVerdict(
                f"pair {pair.pair_id}: repair loop failed: {transcript.failure_reason}"
            ) from None
        relation, reason = parse_verdict_block(transcript.final_answer)

    seen: set[str] = set()
    refs = tuple(r for r in observed if not (r in seen or seen.add(r)))
    verdict = RelationVerdict(
        pair_id=pair.pair_id,
        relation=relation,
        reason=reason,
        catalog_refs=refs,
        transcript_ref=transcript.prompt_hash,
        run_index=run_index,
    )
    return verdict, transcripts


@dataclass
class ClassificationResult:
    verdicts: list[RelationVerdict] = field(default_factory=list)
    failures: list[dict] = field(default_factory=list)
    transcripts: list[AgentTranscript] = field(default_factory=list)

    def runs(self) -> list[int]:
        return sorted({v.run_index for v in self.verdicts})

    def for_run(self, run_index: int) -> list[RelationVerdict]:
        return [v for v in self.verdicts if v.run_index == run_index]


def classify_all(
    related_pairs: Sequence[RequirementPair],
    catalogs: CatalogSet,
    provider: ChatProvider,
    *,
    runs: int = 1,
    max_steps: int = 8,
    concurrency: int = 1,
    classify_fn: Callable | None = None,
) -> ClassificationResult:
    """Classify every related pair, `runs` times each.

    Verdicts come back sorted by (pair_id, run_index) regardless of
    completion order; per-(pair, run) failures are recorded without
    aborting the rest.
    """
    result = ClassificationResult()
    lock = threading.Lock()
    fn = classify_fn or classify

    def work(job: tuple[RequirementPair, int]) -> None:
        pair, run_index = job
        try:
            verdict, transcripts = fn(
                pair, catalogs, provider, run_index=run_index, max_steps=max_steps
            )
        except Exception as exc:
            with lock:
                result.failures.append(
                    {"pair_id": pair.pair_id, "run_index": run_index, "error": str(exc)}
                )
            return
        with lock:
            result.verdicts.append(verdict)
            result.transcripts.extend(transcripts)

    jobs = [
        (pair, run_index)
        for run_index in range(1, runs + 1)
        for pair in related_pairs
    ]
    if concurrency <= 1:
        for job in jobs:
            work(job)
    else:
        with ThreadPoolExecutor(max_workers=concurrency) as pool:
            list(pool.map(work, jobs))

    result.verdicts.sort(key=lambda v: (v.pair_id, v.run_index))
    result.failures.sort(key=lambda f: (f["pair_id"], f["run_index"]))
    return result
