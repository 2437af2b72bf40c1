"""Validation audits over classification verdicts.

Consistency: do repeated runs agree on the verdict labels (labels only,
reason texts are free to vary)? Trust: how many verdicts cite retrieved
catalog records versus the model's own reasoning?
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from susreq.errors import StageOrderViolation
from susreq.relations import RelationVerdict
from susreq.workbench.artifacts import ArtifactStore
from susreq.workbench.config import ProjectConfig


@dataclass(frozen=True)
class ConsistencyAudit:
    runs: int
    pairs: int
    agreeing_pairs: int
    disagreements: tuple[dict, ...]

    @property
    def agreement_pct(self) -> float:
        return 100.0 * self.agreeing_pairs / self.pairs if self.pairs else 100.0

    def to_jsonable(self) -> dict:
        return {
            "runs": self.runs,
            "pairs": self.pairs,
            "agreeing_pairs": self.agreeing_pairs,
            "agreement_pct": self.agreement_pct,
            "disagreements": list(self.disagreements),
        }

    def render(self) -> str:
        return (
            f"consistency over {self.runs} runs: {self.agreeing_pairs}/{self.pairs} "
            f"pairs agree ({self.agreement_pct:.0f}%)"
        )


def consistency_audit(verdicts: Sequence[RelationVerdict], runs: int) -> ConsistencyAudit:
    """Compare verdict labels across runs; a pair agrees when every run
    produced the same relation for it."""
    by_pair: dict[str, dict[int, str]] = {}
    for verdict in verdicts:
        if verdict.run_index <= runs:
            by_pair.setdefault(verdict.pair_id, {})[verdict.run_index] = verdict.relation.value
    disagreements = []
    agreeing = 0
    for pair_id in sorted(by_pair):
        labels = by_pair[pair_id]
        observed = [labels.get(r) for r in range(1, runs + 1)]
        if len(set(observed)) == 1 and observed[0] is not None:
            agreeing += 1
        else:
            disagreements.append({"pair_id": pair_id, "labels": observed})
    return ConsistencyAudit(
        runs=runs,
        pairs=len(by_pair),
        agreeing_pairs=agreeing,
        disagreements=tuple(disagreements),
    )


@dataclass(frozen=True)
class TrustAudit:
    total: int
    catalog_referred: int

    @property
    def own_reasoning(self) -> int:
        return self.total - self.catalog_referred

    @property
    def catalog_referred_pct(self) -> float:
        return 100.0 * self.catalog_referred / self.total if self.total else 0.0

    def to_jsonable(self) -> dict:
        return {
            "total": self.total,
            "catalog_referred": self.catalog_referred,
            "catalog_referred_pct": self.catalog_referred_pct,
            "own_reasoning": self.own_reasoning,
        }

    def render(self) -> str:
        return (
            f"catalog-referred: {self.catalog_referred} "
            f"({self.catalog_referred_pct:.0f}%), own-reasoning: {self.own_reasoning}"
        )


def trust_audit(verdicts: Sequence[RelationVerdict], *, run_index: int = 1) -> TrustAudit:
    """A verdict counts as catalog-referred iff its catalog_refs is non-empty."""
    run = [v for v in verdicts if v.run_index == run_index]
    return TrustAudit(
        total=len(run),
        catalog_referred=sum(1 for v in run if v.catalog_referred),
    )


# --- store-level wrappers ---------------------------------------------------


def run_consistency_audit(
    store: ArtifactStore, config: ProjectConfig, runs: int
) -> ConsistencyAudit:
    """Audit stored verdicts; classify more runs first when needed."""
    from susreq.workbench.pipeline import classify_stage

    store.require_artifact("related_pairs.json", "relate")
    recorded_runs = 0
    if store.has_artifact("verdicts.json"):
        recorded_runs = store.read_json("verdicts.json")["runs"]
    if recorded_runs < runs:
        classify_stage(store, config, force=True, runs=runs)
    verdicts = [
        RelationVerdict.from_jsonable(v)
        for v in store.read_json("verdicts.json")["verdicts"]
    ]
    audit = consistency_audit(verdicts, runs)
    store.write_json("audit_consistency.json", audit.to_jsonable())
    return audit


def run_trust_audit(store: ArtifactStore) -> TrustAudit:
    if not store.has_artifact("verdicts.json"):
        raise StageOrderViolation("missing artifact verdicts.json — run `classify` first")
    verdicts = [
        RelationVerdict.from_jsonable(v)
        for v in store.read_json("verdicts.json")["verdicts"]
    ]
    audit = trust_audit(verdicts)
    store.write_json("audit_trust.json", audit.to_jsonable())
    return audit
