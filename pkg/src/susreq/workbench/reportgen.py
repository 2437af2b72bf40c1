"""Project report: deterministic markdown + JSON computed from artifacts only."""

from __future__ import annotations

from susreq.errors import StageOrderViolation
from susreq.workbench.artifacts import ArtifactStore


def build_report(store: ArtifactStore) -> dict:
    """Aggregate whatever stages have completed into one report payload."""
    store.require_initialized()
    report: dict = {
        "project_id": store.config_payload().get("project_id"),
        "stage": store.stage.value,
    }
    produced = False

    if store.has_artifact("coherence.json"):
        coherence = store.read_json("coherence.json")
        report["coherence"] = {
            "passed": coherence["passed"],
            "threshold": coherence["threshold"],
        }
        produced = True

    if store.has_artifact("graph.json"):
        graph = store.read_json("graph.json")
        report["knowledge_graph"] = {
            "entities": len(graph["entities"]),
            "relations": len(graph["relationships"]),
        }
        produced = True

    if store.has_artifact("sr_set.json"):
        sr_set = store.read_json("sr_set.json")
        counts = {"Environmental": 0, "Social": 0, "Technical": 0, "Economic": 0}
        for member in sr_set["members"]:
            counts[member["dimension"]] += 1
        report["sr_set"] = {
            "count": len(sr_set["members"]),
            "round": sr_set["round"],
            "dimension_counts": counts,
        }
        produced = True

    if store.has_artifact("related_pairs.json"):
        related = store.read_json("related_pairs.json")
        by_kind: dict[str, int] = {}
        for pair in related["pairs"]:
            by_kind[pair["pair_kind"]] = by_kind.get(pair["pair_kind"], 0) + 1
        report["pairs"] = {
            "possible": related["possible_count"],
            "related": len(related["pairs"]),
            "threshold": related["threshold"],
            "by_kind": by_kind,
        }
        produced = True

    if store.has_artifact("verdicts.json"):
        verdicts = store.read_json("verdicts.json")
        run1 = [v for v in verdicts["verdicts"] if v["run_index"] == 1]
        counts = {"Positive": 0, "Negative": 0, "Neutral": 0}
        for verdict in run1:
            counts[verdict["relation"]] += 1
        report["verdicts"] = {
            "runs": verdicts["runs"],
            "classified": len(run1),
            "counts": counts,
            "failures": len(verdicts["failures"]),
        }
        produced = True

    if store.has_artifact("proposals.json"):
        tasks = store.read_json("proposals.json")["tasks"]
        accepted = [t for t in tasks if t["status"] == "Accepted"]
        similarities = [
            t["similarity_to_original"]
            for t in accepted
            if t.get("similarity_to_original") is not None
        ]
        report["revisions"] = {
            "tasks": len(tasks),
            "accepted": len(accepted),
            "rejected": sum(1 for t in tasks if t["status"] == "Rejected"),
            "average_similarity": (
                sum(similarities) / len(similarities) if similarities else None
            ),
            "per_task": [
                {
                    "task_id": t["task_id"],
                    "status": t["status"],
                    "similarity_to_original": t.get("similarity_to_original"),
                    "revalidation": (t.get("revalidation") or {}).get("relation"),
                }
                for t in tasks
            ],
        }
        produced = True

    if store.has_artifact("completeness.json"):
        completeness = store.read_json("completeness.json")
        report["completeness"] = {
            "satisfied": len(completeness["satisfied_srs"]),
            "unsatisfied": len(completeness["unsatisfied_srs"]),
            "unsatisfied_srs": completeness["unsatisfied_srs"],
            "definition": completeness["satisfied_definition"],
        }
        produced = True

    if store.has_artifact("audit_consistency.json"):
        report["audit_consistency"] = store.read_json("audit_consistency.json")
        produced = True
    if store.has_artifact("audit_trust.json"):
        report["audit_trust"] = store.read_json("audit_trust.json")
        produced = True

    if not produced:
        raise StageOrderViolation("no stage artifacts yet — run at least ingest first")
    return report


def render_markdown(report: dict) -> str:
    lines = [f"# Project report: {report['project_id']}", "", f"Stage: {report['stage']}", ""]

    if "coherence" in report:
        c = report["coherence"]
        lines += [
            "## Scope coherence",
            "",
            f"- passed: {c['passed']} (threshold {c['threshold']})",
            "",
        ]
    if "knowledge_graph" in report:
        g = report["knowledge_graph"]
        lines += [
            "## Knowledge graph",
            "",
            f"- entities: {g['entities']}",
            f"- relations: {g['relations']}",
            "",
        ]
    if "sr_set" in report:
        s = report["sr_set"]
        lines += ["## Elicited sustainability requirements", ""]
        lines.append(f"- total: {s['count']} (approved in round {s['round']})")
        for dim, count in s["dimension_counts"].items():
            lines.append(f"- {dim}: {count}")
        lines.append("")
    if "pairs" in report:
        p = report["pairs"]
        lines += [
            "## Requirement pairs",
            "",
            f"- possible: {p['possible']}",
            f"- related (similarity >= {p['threshold']}): {p['related']}",
        ]
        for kind, count in sorted(p["by_kind"].items()):
            lines.append(f"- {kind}: {count}")
        lines.append("")
    if "verdicts" in report:
        v = report["verdicts"]
        lines += ["## Relation verdicts", ""]
        lines.append(f"- classified pairs: {v['classified']} over {v['runs']} run(s)")
        for label, count in v["counts"].items():
            lines.append(f"- {label}: {count}")
        if v["failures"]:
            lines.append(f"- failures: {v['failures']}")
        lines.append("")
    if "revisions" in report:
        r = report["revisions"]
        lines += ["## Revisions", ""]
        lines.append(f"- tasks: {r['tasks']} (accepted {r['accepted']}, rejected {r['rejected']})")
        if r["average_similarity"] is not None:
            lines.append(f"- average similarity to original: {r['average_similarity']:.4f}")
        for t in r["per_task"]:
            sim = (
                f"{t['similarity_to_original']:.4f}"
                if t.get("similarity_to_original") is not None
                else "n/a"
            )
            lines.append(
                f"- {t['task_id']}: {t['status']}, similarity {sim}, "
                f"revalidated {t.get('revalidation') or 'n/a'}"
            )
        lines.append("")
    if "completeness" in report:
        c = report["completeness"]
        lines += ["## Completeness", ""]
        lines.append(f"- satisfied SRs: {c['satisfied']}")
        lines.append(f"- unsatisfied SRs: {c['unsatisfied']}")
        if c["unsatisfied_srs"]:
            lines.append(f"- needing attention: {', '.join(c['unsatisfied_srs'])}")
        lines.append(f"- predicate: {c['definition']}")
        lines.append("")
    if "audit_consistency" in report:
        a = report["audit_consistency"]
        lines += [
            "## Consistency audit",
            "",
            f"- {a['agreeing_pairs']}/{a['pairs']} pairs agree over {a['runs']} runs "
            f"({a['agreement_pct']:.0f}%)",
            "",
        ]
    if "audit_trust" in report:
        a = report["audit_trust"]
        lines += [
            "## Trust audit",
            "",
            f"- catalog-referred: {a['catalog_referred']} ({a['catalog_referred_pct']:.0f}%), "
            f"own-reasoning: {a['own_reasoning']}",
            "",
        ]
    return "\n".join(lines)


def generate_report(store: ArtifactStore) -> dict:
    report = build_report(store)
    store.write_json("report.json", report)
    store.write_text("report.md", render_markdown(report))
    return report
