"""Pipeline stages over a project's artifact store.

Each stage is resumable and hash-gated: re-running with unchanged inputs
either skips (signature match) or rewrites byte-identical artifacts.
Human decisions come from the append-only decision log; in batch mode a
decisions file can pre-supply them, in interactive mode the stage blocks
(or waits) until the review API delivers one.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path

from susreq import kg
from susreq.corpus import (
    Chunk,
    Kind,
    Requirement,
    Source,
    chunk_scope,
    chunk_taxonomy,
    coherence_check,
    parse_srs,
    parse_taxonomy,
    spec_from_json,
    spec_to_json,
)
from susreq.elicitor import (
    CandidateSR,
    candidate_from_jsonable,
    derive_srs,
    generate_context,
    review_round,
    sr_set_from_jsonable,
    validate_candidates,
)
from susreq.errors import (
    CoherenceGateFailed,
    EditProducesInvalidGraph,
    PendingReview,
    StageOrderViolation,
)
from susreq.optimizer import (
    TaskStatus,
    analyst_review,
    completeness_check,
    final_verdicts_after_optimization,
    find_negative_pairs,
    propose_revision,
    revalidate,
    task_from_jsonable,
)
from susreq.relations import (
    CatalogSet,
    RelationVerdict,
    classify,
    classify_all,
    filter_related,
    generate_pairs,
    pair_from_jsonable,
)
from susreq.review import ReviewAction, ReviewDecision
from susreq.semindex import SemanticIndex
from susreq.workbench.artifacts import ArtifactStore, Stage, canonical_dumps, sha256_file, sha256_text
from susreq.workbench.config import ProjectConfig, build_chat_provider, build_embedder


@dataclass(frozen=True)
class StageResult:
    name: str
    skipped: bool
    summary: str


def _signature(*parts) -> str:
    return sha256_text(canonical_dumps(list(parts)))


def _artifact_hash(store: ArtifactStore, name: str) -> str:
    return sha256_file(store.artifact_path(name))


# --- decision plumbing -----------------------------------------------------


def resolve_decision(
    store: ArtifactStore,
    config: ProjectConfig,
    review_id: str,
    *,
    wait: bool = False,
    timeout: float = 600.0,
) -> ReviewDecision | None:
    """Find the decision for a review: decision log first, then the batch
    decisions file; in wait mode, poll the log until the timeout."""
    decision = store.decision_for_review(review_id)
    if decision is not None:
        return decision
    decisions_file = config.policy.get("decisions_file")
    if decisions_file:
        for raw in json.loads(Path(decisions_file).read_text(encoding="utf-8")):
            candidate = ReviewDecision.from_jsonable(raw)
            if candidate.subject_refs.get("review_id") == review_id:
                store.append_decision(candidate)
                return candidate
    if wait:
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            decision = store.decision_for_review(review_id)
            if decision is not None:
                return decision
            time.sleep(0.25)
    return None


# --- init / ingest --------------------------------------------------------------


def init_project(config: ProjectConfig, project_dir: str | Path) -> StageResult:
    store = ArtifactStore(project_dir)
    store.initialize(config.to_jsonable())
    return StageResult("init", False, f"initialized project {config.project_id} at {store.root}")


def _load_spec(store: ArtifactStore):
    return spec_from_json(store.read_json("project_spec.json"))


def _scope_chunks_from_index(index: SemanticIndex) -> list[Chunk]:
    return [
        Chunk(
            chunk_id=rec.record_id,
            source=Source.PRODUCT_SCOPE,
            text=rec.text,
            metadata={k: v for k, v in rec.metadata.items() if k != "source"},
        )
        for rec in index.records()
    ]


def ingest(
    store: ArtifactStore,
    config: ProjectConfig,
    *,
    force: bool = False,
    allow_incoherent: bool = False,
) -> StageResult:
    """Parse SRS and taxonomy, gate on scope coherence, build DB_P and DB_T."""
    store.require_initialized()
    srs_text = config.srs_path.read_text(encoding="utf-8")
    taxonomy_text = config.taxonomy_path.read_text(encoding="utf-8")
    embedder = build_embedder(config)
    signature = _signature(
        "ingest", sha256_text(srs_text), sha256_text(taxonomy_text),
        config.coherence_threshold, embedder.provider_id, allow_incoherent,
    )
    outputs = ("project_spec.json", "taxonomy.json", "coherence.json", "db_p.idx", "db_t.idx")
    if not force and store.signature("ingest") == signature and all(
        store.has_artifact(name) for name in outputs
    ):
        return StageResult("ingest", True, "up to date")

    spec = parse_srs(srs_text, project_id=config.project_id)
    entries = parse_taxonomy(taxonomy_text)

    if len(spec.scope_sections) >= 2:
        report = coherence_check(spec.scope_sections, config.coherence_threshold, embedder)
        coherence_payload = {
            "threshold": report.threshold,
            "passed": report.passed,
            "pairwise_scores": {f"{a} | {b}": s for (a, b), s in report.pairwise_scores.items()},
            "offending_pairs": [list(p) for p in report.offending_pairs],
            "provider_id": embedder.provider_id,
        }
        if not report.passed and not allow_incoherent:
            store.write_json("coherence.json", coherence_payload)
            raise CoherenceGateFailed(
                "scope sections are not coherent (offending pairs: "
                + "; ".join(f"{a} vs {b}" for a, b in report.offending_pairs)
                + "); revise the document or pass --allow-incoherent"
            )
    else:
        coherence_payload = {
            "threshold": config.coherence_threshold,
            "passed": True,
            "skipped": "single scope section",
            "provider_id": embedder.provider_id,
        }

    db_p = SemanticIndex(embedder)
    for chunk in chunk_scope(spec):
        db_p.add(chunk)
    db_t = SemanticIndex(embedder)
    for chunk in chunk_taxonomy(entries):
        db_t.add(chunk)

    store.write_json("project_spec.json", spec_to_json(spec))
    store.write_json(
        "taxonomy.json",
        [
            {
                "requirement": e.requirement_text,
                "dimension": e.dimension.value,
                "category": e.category,
            }
            for e in entries
        ],
    )
    store.write_json("coherence.json", coherence_payload)
    db_p.persist(store.artifact_path("db_p.idx"))
    db_t.persist(store.artifact_path("db_t.idx"))
    store.set_signature("ingest", signature)
    return StageResult(
        "ingest",
        False,
        f"{len(spec.scope_sections)} scope sections, {len(spec.functional_reqs)} FRs, "
        f"{len(spec.nonfunctional_reqs)} NFRs, {len(entries)} taxonomy rows",
    )


# --- knowledge graph ----------------------------------------------------------


def kg_build(
    store: ArtifactStore,
    config: ProjectConfig,
    *,
    force: bool = False,
    edits_path: str | Path | None = None,
) -> StageResult:
    """Extract the standards graph, validate it, apply human edits, embed it."""
    store.require_initialized()
    store.require_artifact("db_p.idx", "ingest")
    standard_text = config.standard_doc_path.read_text(encoding="utf-8")
    edits = []
    edits_blob = ""
    if edits_path:
        edits_blob = Path(edits_path).read_text(encoding="utf-8")
        edits = json.loads(edits_blob)
    embedder = build_embedder(config)
    signature = _signature(
        "kg", sha256_text(standard_text), config.chat_provider_cfg,
        sha256_text(edits_blob), embedder.provider_id,
    )
    outputs = ("graph.json", "graph_validation.json", "kg.idx")
    if not force and store.signature("kg") == signature and all(
        store.has_artifact(name) for name in outputs
    ):
        return StageResult("kg", True, "up to date")

    provider = build_chat_provider(config)
    doc = kg.extract_graph(standard_text, provider)
    store.write_text("graph_raw.txt", doc.raw_model_text or "")
    if edits:
        doc = kg.apply_edits(doc, edits)
    report = kg.validate(doc)
    store.write_json("graph_validation.json", report.to_jsonable())
    if not report.valid:
        raise EditProducesInvalidGraph(
            "extracted graph is invalid; fix via an edit script: "
            + "; ".join(f"{e.code}({e.subject})" for e in report.errors)
        )
    graph = kg.build(doc, embedder)
    store.write_json("graph.json", kg.doc_to_jsonable(doc))
    graph.index.persist(store.artifact_path("kg.idx"))
    store.set_signature("kg", signature)
    return StageResult(
        "kg", False, f"{graph.entity_count} entities, {graph.relation_count} relations"
    )


def _load_graph(store: ArtifactStore, embedder) -> kg.KnowledgeGraph:
    doc = kg.doc_from_jsonable(store.read_json("graph.json"))
    index = SemanticIndex.load(store.artifact_path("kg.idx"), embedder)
    return kg.KnowledgeGraph(doc, index)


# --- elicitation ------------------------------------------------------------------


def elicit(
    store: ArtifactStore,
    config: ProjectConfig,
    *,
    force: bool = False,
    wait: bool = False,
    timeout: float = 600.0,
) -> StageResult:
    """Stage 1: context generation, SR derivation, expert approval loop."""
    store.require_initialized()
    store.require_artifact("db_p.idx", "ingest")
    store.require_artifact("db_t.idx", "ingest")
    store.require_artifact("graph.json", "kg build")

    embedder = build_embedder(config)
    signature = _signature(
        "elicit",
        _artifact_hash(store, "db_p.idx"),
        _artifact_hash(store, "db_t.idx"),
        _artifact_hash(store, "graph.json"),
        config.chat_provider_cfg,
        config.max_steps,
        config.policy["chunk_failure"],
    )
    if not force and store.signature("elicit") == signature and store.has_artifact("sr_set.json"):
        return StageResult("elicit", True, "up to date")

    provider = build_chat_provider(config)
    db_p = SemanticIndex.load(store.artifact_path("db_p.idx"), embedder)
    db_t = SemanticIndex.load(store.artifact_path("db_t.idx"), embedder)
    graph = _load_graph(store, embedder)
    chunks = _scope_chunks_from_index(db_p)
    strict = config.policy["chunk_failure"] == "strict"

    # context generation (reused across review rounds once persisted)
    if force or not (store.has_artifact("context.json") and store.has_artifact("context.idx")):
        context_index = SemanticIndex(embedder)
        generated = generate_context(
            chunks,
            graph,
            provider,
            context_index=context_index,
            max_steps=config.max_steps,
            strict=strict,
        )
        store.write_json(
            "context.json",
            {
                "items": [item.to_jsonable() for item in generated.items],
                "synthesis_text": generated.synthesis_text,
                "synthesis_refs": list(generated.synthesis_refs),
                "provenance": {
                    "provider_id": provider.provider_id,
                    "prompt_hashes": [t.prompt_hash for t in generated.transcripts],
                },
            },
        )
        context_index.persist(store.artifact_path("context.idx"))
        store.write_transcripts("context", generated.transcripts)
    else:
        context_index = SemanticIndex.load(store.artifact_path("context.idx"), embedder)

    round_index = 1
    feedback: list[str] = []
    while True:
        candidates_name = f"candidates-r{round_index}.json"
        if not force and store.has_artifact(candidates_name):
            candidates = [
                candidate_from_jsonable(c)
                for c in store.read_json(candidates_name)["candidates"]
            ]
        else:
            candidates, transcripts = derive_srs(
                chunks,
                context_index,
                db_t,
                provider,
                feedback_rounds=feedback,
                max_steps=config.max_steps,
                strict=strict,
            )
            validate_candidates(candidates, db_t)
            store.write_transcripts(f"derive-r{round_index}", transcripts)
            store.write_json(
                candidates_name,
                {
                    "round": round_index,
                    "review_id": f"sr-approval-r{round_index}",
                    "feedback_rounds": list(feedback),
                    "candidates": [c.to_jsonable() for c in candidates],
                    "provenance": {
                        "provider_id": provider.provider_id,
                        "prompt_hashes": [t.prompt_hash for t in transcripts],
                        "transcripts": f"derive-r{round_index}",
                    },
                },
            )

        review_id = f"sr-approval-r{round_index}"
        decision = resolve_decision(store, config, review_id, wait=wait, timeout=timeout)
        if decision is None:
            raise PendingReview(
                f"review {review_id} is pending; submit a decision via the review "
                "API or the decisions file, then re-run elicit"
            )
        if decision.action is ReviewAction.REQUEST_CHANGES:
            assert decision.feedback is not None
            feedback.append(decision.feedback)
            round_index += 1
            continue
        outcome = review_round(
            candidates,
            decision,
            project_id=config.project_id,
            round_index=round_index,
        )
        assert outcome.sr_set is not None
        payload = store.read_json(candidates_name)
        payload["candidates"] = [c.to_jsonable() for c in outcome.candidates]
        store.write_json(candidates_name, payload)
        store.write_json("sr_set.json", outcome.sr_set.to_jsonable())
        store.set_signature("elicit", signature)
        store.advance_stage(Stage.ELICITED)
        return StageResult(
            "elicit",
            False,
            f"{len(outcome.sr_set.members)} SRs approved in round {round_index}",
        )


# --- pairing and classification -----------------------------------------------------


def relate(store: ArtifactStore, config: ProjectConfig, *, force: bool = False) -> StageResult:
    """Stage 2a: generate candidate pairs and keep the semantically related."""
    store.require_initialized()
    store.require_artifact("project_spec.json", "ingest")
    store.require_artifact("sr_set.json", "elicit")
    embedder = build_embedder(config)
    signature = _signature(
        "relate",
        _artifact_hash(store, "project_spec.json"),
        _artifact_hash(store, "sr_set.json"),
        config.related_threshold,
        embedder.provider_id,
    )
    if not force and store.signature("relate") == signature and store.has_artifact(
        "related_pairs.json"
    ):
        return StageResult("relate", True, "up to date")

    spec = _load_spec(store)
    sr_set = sr_set_from_jsonable(store.read_json("sr_set.json"))
    pairs = generate_pairs(spec.functional_reqs, spec.nonfunctional_reqs, sr_set.members)
    related = filter_related(pairs, embedder, config.related_threshold)
    store.write_json(
        "related_pairs.json",
        {
            "possible_count": len(pairs),
            "threshold": config.related_threshold,
            "provider_id": embedder.provider_id,
            "pairs": [p.to_jsonable() for p in related],
        },
    )
    store.set_signature("relate", signature)
    store.advance_stage(Stage.RELATED)
    return StageResult("relate", False, f"{len(related)} related of {len(pairs)} possible pairs")


def _load_catalog_records(path: Path) -> list[dict]:
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".json":
        return [
            {"text": r["text"], "source_tag": str(r.get("source_tag", ""))}
            for r in json.loads(text)
        ]
    import csv
    import io

    reader = csv.reader(io.StringIO(text))
    rows = [row for row in reader if any(cell.strip() for cell in row)]
    if not rows or tuple(c.strip().lower() for c in rows[0])[:1] != ("text",):
        raise ValueError(f"catalog {path} needs a header starting with 'text'")
    records = []
    for row in rows[1:]:
        records.append(
            {"text": row[0].strip(), "source_tag": row[1].strip() if len(row) > 1 else ""}
        )
    return records


_CATALOG_PREFIX = {
    "fr_dependency": "frdep",
    "nfr_correlation": "nfrcor",
    "sr_correlation": "srcor",
}


def build_catalogs(config: ProjectConfig, embedder) -> CatalogSet:
    indexes = {}
    for key, path in config.catalog_paths.items():
        index = SemanticIndex(embedder)
        for i, record in enumerate(_load_catalog_records(path), start=1):
            index.add_record(
                f"{_CATALOG_PREFIX[key]}-{i:04d}",
                record["text"],
                {"source_tag": record["source_tag"], "catalog": key},
            )
        indexes[key] = index
    return CatalogSet(
        fr_dependency=indexes["fr_dependency"],
        nfr_correlation=indexes["nfr_correlation"],
        sr_correlation=indexes["sr_correlation"],
    )


def _load_related_pairs(store: ArtifactStore):
    payload = store.read_json("related_pairs.json")
    return [pair_from_jsonable(p) for p in payload["pairs"]], payload


def classify_stage(
    store: ArtifactStore, config: ProjectConfig, *, force: bool = False, runs: int | None = None
) -> StageResult:
    """Stage 2b: coordinator-routed classification of every related pair."""
    store.require_initialized()
    store.require_artifact("related_pairs.json", "relate")
    runs = runs or config.runs
    catalog_hashes = {k: sha256_file(p) for k, p in sorted(config.catalog_paths.items())}
    signature = _signature(
        "classify",
        _artifact_hash(store, "related_pairs.json"),
        catalog_hashes,
        config.chat_provider_cfg,
        runs,
        config.max_steps,
        config.concurrency,
    )
    if not force and store.signature("classify") == signature and store.has_artifact(
        "verdicts.json"
    ):
        return StageResult("classify", True, "up to date")

    embedder = build_embedder(config)
    provider = build_chat_provider(config)
    catalogs = build_catalogs(config, embedder)
    pairs, _ = _load_related_pairs(store)
    result = classify_all(
        pairs,
        catalogs,
        provider,
        runs=runs,
        max_steps=config.max_steps,
        concurrency=config.concurrency,
    )
    store.write_json(
        "verdicts.json",
        {
            "runs": runs,
            "provider_id": provider.provider_id,
            "verdicts": [v.to_jsonable() for v in result.verdicts],
            "failures": result.failures,
        },
    )
    store.write_transcripts("classify", result.transcripts)
    store.set_signature("classify", signature)
    store.advance_stage(Stage.CLASSIFIED)
    summary = f"{len(result.verdicts)} verdicts over {runs} run(s)"
    if result.failures:
        summary += f", {len(result.failures)} failures"
    return StageResult("classify", False, summary)


def _load_verdicts(store: ArtifactStore) -> list[RelationVerdict]:
    return [RelationVerdict.from_jsonable(v) for v in store.read_json("verdicts.json")["verdicts"]]


# --- optimization -------------------------------------------------------------------


def optimize(
    store: ArtifactStore,
    config: ProjectConfig,
    *,
    force: bool = False,
    wait: bool = False,
    timeout: float = 600.0,
) -> StageResult:
    """Stage 3: propose, revalidate, and review revisions for negative pairs."""
    store.require_initialized()
    store.require_artifact("verdicts.json", "classify")
    store.require_artifact("related_pairs.json", "relate")
    store.require_artifact("sr_set.json", "elicit")
    signature = _signature(
        "optimize",
        _artifact_hash(store, "verdicts.json"),
        _artifact_hash(store, "related_pairs.json"),
        config.chat_provider_cfg,
        config.policy["reproposal_limit"],
        config.max_steps,
    )
    if not force and store.signature("optimize") == signature and store.has_artifact(
        "final_requirements.json"
    ):
        return StageResult("optimize", True, "up to date")

    embedder = build_embedder(config)
    provider = build_chat_provider(config)
    catalogs = build_catalogs(config, embedder)
    pairs, _ = _load_related_pairs(store)
    pairs_by_id = {p.pair_id: p for p in pairs}
    verdicts = _load_verdicts(store)
    revalidation_transcripts: list = []

    def classify_one(pair) -> RelationVerdict:
        verdict, transcripts = classify(
            pair, catalogs, provider, run_index=1, max_steps=config.max_steps
        )
        revalidation_transcripts.extend(transcripts)
        return verdict

    if not force and store.has_artifact("proposals.json"):
        tasks = [
            task_from_jsonable(t, pairs_by_id) for t in store.read_json("proposals.json")["tasks"]
        ]
    else:
        tasks = find_negative_pairs(verdicts, pairs, run_index=1)

    def persist_tasks() -> None:
        store.write_json(
            "proposals.json",
            {
                "provider_id": provider.provider_id,
                "tasks": [t.to_jsonable() for t in tasks],
            },
        )

    for task in tasks:
        if task.status is TaskStatus.PENDING:
            propose_revision(task, provider)
            revalidate(task, embedder, classify_one)
    persist_tasks()

    def repropose(task):
        propose_revision(task, provider)
        return revalidate(task, embedder, classify_one)

    pending: list[str] = []
    limit = config.policy["reproposal_limit"]
    for task in tasks:
        while task.status is TaskStatus.REVALIDATED:
            at_limit = task.rounds >= limit
            review_id = (
                f"revision-{task.task_id}-signoff"
                if at_limit
                else f"revision-{task.task_id}-r{task.rounds}"
            )
            decision = resolve_decision(store, config, review_id, wait=wait, timeout=timeout)
            if decision is None:
                pending.append(review_id)
                break
            if decision.action is ReviewAction.REQUEST_CHANGES and at_limit:
                raise PendingReview(
                    f"task {task.task_id} reached the re-proposal limit ({limit}); "
                    f"review {review_id} accepts only Accept or Reject"
                )
            analyst_review(
                task,
                decision,
                repropose=repropose,
                reproposal_limit=limit,
            )
            persist_tasks()

    if revalidation_transcripts:
        store.write_transcripts("revalidate", revalidation_transcripts)
    if pending:
        raise PendingReview(
            "pending revision reviews: " + ", ".join(pending)
            + "; submit decisions and re-run optimize"
        )

    spec = _load_spec(store)
    sr_set = sr_set_from_jsonable(store.read_json("sr_set.json"))
    finals_by_req: dict[str, dict] = {}
    for task in tasks:
        if task.status is TaskStatus.ACCEPTED:
            finals_by_req[task.requirement.id] = {
                "text": task.final_text,
                "superseded_by": task.task_id,
                "similarity_to_original": task.similarity_to_original,
            }

    def final_entry(req: Requirement) -> dict:
        revised = finals_by_req.get(req.id)
        return {
            "id": req.id,
            "text": revised["text"] if revised else req.text,
            "original_text": req.text,
            "revised": revised is not None,
            "superseded_by": revised["superseded_by"] if revised else None,
        }

    store.write_json(
        "final_requirements.json",
        {
            "project_id": config.project_id,
            "functional": [final_entry(r) for r in spec.functional_reqs],
            "nonfunctional": [final_entry(r) for r in spec.nonfunctional_reqs],
            "srs": [
                {
                    "id": s.id,
                    "text": s.text,
                    "dimension": s.dimension.value if s.dimension else None,
                    "category": s.category,
                }
                for s in sr_set.members
            ],
            "provenance": {"provider_id": provider.provider_id},
        },
    )
    store.write_text("changelog.md", _render_changelog(config.project_id, tasks))
    store.set_signature("optimize", signature)
    store.advance_stage(Stage.OPTIMIZED)
    accepted = sum(1 for t in tasks if t.status is TaskStatus.ACCEPTED)
    rejected = sum(1 for t in tasks if t.status is TaskStatus.REJECTED)
    return StageResult(
        "optimize", False, f"{len(tasks)} tasks: {accepted} accepted, {rejected} rejected"
    )


def _render_changelog(project_id: str, tasks) -> str:
    lines = [f"# Requirement changes for {project_id}", ""]
    if not tasks:
        lines.append("No requirements needed revision.")
        lines.append("")
        return "\n".join(lines)
    for task in tasks:
        lines.append(f"## {task.requirement.id} vs {task.sr.id} ({task.status.value})")
        lines.append("")
        lines.append(f"- SR: {task.sr.text}")
        lines.append(f"- Original: {task.requirement.text}")
        if task.status is TaskStatus.ACCEPTED and task.final_text:
            lines.append(f"- Revised: {task.final_text}")
            if task.similarity_to_original is not None:
                lines.append(
                    f"- Similarity to original: {task.similarity_to_original:.4f}"
                )
            if task.revalidation is not None:
                lines.append(f"- Revalidation verdict: {task.revalidation.relation.value}")
            if task.revisable:
                lines.append("- Flagged revisable (revalidated Neutral)")
        elif task.status is TaskStatus.REJECTED:
            lines.append("- Revision rejected; original kept as accepted risk")
        lines.append("")
    return "\n".join(lines)


# --- completeness --------------------------------------------------------------------


def check(store: ArtifactStore, config: ProjectConfig) -> StageResult:
    """Completeness check over the post-optimization verdicts."""
    store.require_initialized()
    store.require_artifact("final_requirements.json", "optimize")
    store.require_artifact("proposals.json", "optimize")
    pairs, _ = _load_related_pairs(store)
    pairs_by_id = {p.pair_id: p for p in pairs}
    verdicts = _load_verdicts(store)
    tasks = [task_from_jsonable(t, pairs_by_id) for t in store.read_json("proposals.json")["tasks"]]
    sr_set = sr_set_from_jsonable(store.read_json("sr_set.json"))
    final = final_verdicts_after_optimization(verdicts, tasks)
    report = completeness_check(
        sr_set, final, pairs, predicate=config.policy["completeness_predicate"]
    )
    store.write_json("completeness.json", report.to_jsonable())
    store.advance_stage(Stage.COMPLETE)
    return StageResult(
        "check",
        False,
        f"{len(report.satisfied_srs)} satisfied, {len(report.unsatisfied_srs)} unsatisfied",
    )


# --- review queue (shared with the HTTP API) ------------------------------------------


def pending_reviews(store: ArtifactStore, config: ProjectConfig) -> list[dict]:
    """Reviews awaiting a decision, derived from artifacts + the decision log."""
    items: list[dict] = []
    if not store.initialized:
        return items
    # SR approval rounds
    round_index = 1
    while store.has_artifact(f"candidates-r{round_index}.json"):
        review_id = f"sr-approval-r{round_index}"
        decided = store.decision_for_review(review_id) is not None
        payload = store.read_json(f"candidates-r{round_index}.json")
        if not decided:
            items.append(
                {
                    "review_id": review_id,
                    "stage": "SRApproval",
                    "round": round_index,
                    "state": "pending",
                    "candidates": payload["candidates"],
                }
            )
        round_index += 1
    # revision reviews
    if store.has_artifact("proposals.json"):
        limit = config.policy["reproposal_limit"]
        for raw in store.read_json("proposals.json")["tasks"]:
            if raw["status"] != TaskStatus.REVALIDATED.value:
                continue
            at_limit = raw.get("rounds", 0) >= limit
            review_id = (
                f"revision-{raw['task_id']}-signoff"
                if at_limit
                else f"revision-{raw['task_id']}-r{raw['rounds']}"
            )
            if store.decision_for_review(review_id) is None:
                items.append(
                    {
                        "review_id": review_id,
                        "stage": "RevisionReview",
                        "state": "pending",
                        "signoff_only": at_limit,
                        "task": raw,
                    }
                )
    return items
