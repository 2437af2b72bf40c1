"""Review HTTP API plus static hosting for the dashboard.

The API is read-mostly: it exposes project status, pending reviews and
reports, and accepts exactly one kind of write — appending a ReviewDecision.
Pipeline mutations stay with the CLI commands (single writer per project);
decisions become visible to them immediately through the decision log.
"""

from __future__ import annotations

import datetime
import threading
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from susreq.errors import StageOrderViolation
from susreq.review import ReviewAction, ReviewDecision, ReviewStage
from susreq.workbench.artifacts import ArtifactStore
from susreq.workbench.config import ProjectConfig, load_config
from susreq.workbench.pipeline import pending_reviews
from susreq.workbench.reportgen import build_report

API_PREFIX = "/api/v1"


class DecisionBody(BaseModel):
    action: str
    feedback: str | None = None
    reviewer: str = "reviewer"
    approved_ids: list[str] | None = None


class _Project:
    def __init__(self, root: Path) -> None:
        self.store = ArtifactStore(root)
        self.config: ProjectConfig = load_config(root / "config.json")
        self.project_id = self.config.project_id
        self.lock = threading.Lock()


def create_app(
    project_dirs: list[str | Path],
    frontend_dir: str | Path | None = None,
) -> FastAPI:
    app = FastAPI(title="susreq review API")
    projects: dict[str, _Project] = {}
    for raw in project_dirs:
        project = _Project(Path(raw))
        if not project.store.initialized:
            raise StageOrderViolation(f"{raw} is not an initialized project")
        projects[project.project_id] = project

    def get_project(project_id: str) -> _Project:
        project = projects.get(project_id)
        if project is None:
            raise HTTPException(status_code=404, detail=f"unknown project {project_id!r}")
        return project

    def split_review_id(review_id: str) -> tuple[_Project, str]:
        project_id, sep, review_key = review_id.partition(":")
        if not sep:
            raise HTTPException(
                status_code=404,
                detail="review ids are '<project_id>:<review_key>'",
            )
        return get_project(project_id), review_key

    def find_review(project: _Project, review_key: str) -> dict | None:
        for item in pending_reviews(project.store, project.config):
            if item["review_id"] == review_key:
                return item
        return None

    @app.get(API_PREFIX + "/projects")
    def list_projects() -> list[dict]:
        return [
            {
                "project_id": p.project_id,
                "stage": p.store.stage.value,
                "pending_reviews": len(pending_reviews(p.store, p.config)),
            }
            for p in projects.values()
        ]

    @app.get(API_PREFIX + "/projects/{project_id}/status")
    def project_status(project_id: str) -> dict:
        project = get_project(project_id)
        return {
            "project_id": project.project_id,
            "stage": project.store.stage.value,
            "artifacts": project.store.manifest(),
            "pending_reviews": [
                {"review_id": f"{project_id}:{item['review_id']}", "stage": item["stage"]}
                for item in pending_reviews(project.store, project.config)
            ],
        }

    @app.get(API_PREFIX + "/projects/{project_id}/reviews")
    def list_reviews(project_id: str, state: str = "pending") -> list[dict]:
        project = get_project(project_id)
        if state != "pending":
            raise HTTPException(status_code=422, detail="only state=pending is supported")
        items = pending_reviews(project.store, project.config)
        for item in items:
            item["review_id"] = f"{project_id}:{item['review_id']}"
        return items

    @app.get(API_PREFIX + "/reviews/{review_id}")
    def get_review(review_id: str) -> dict:
        project, review_key = split_review_id(review_id)
        item = find_review(project, review_key)
        if item is None:
            if project.store.decision_for_review(review_key) is not None:
                decided = project.store.decision_for_review(review_key)
                assert decided is not None
                return {
                    "review_id": review_id,
                    "state": "decided",
                    "decision": decided.to_jsonable(),
                }
            raise HTTPException(status_code=404, detail=f"unknown review {review_id!r}")
        item["review_id"] = review_id
        # attach supporting context for SR approvals
        if item["stage"] == "SRApproval" and project.store.has_artifact("context.json"):
            item["context"] = project.store.read_json("context.json")
        return item

    @app.post(API_PREFIX + "/reviews/{review_id}/decision")
    def post_decision(review_id: str, body: DecisionBody) -> dict:
        project, review_key = split_review_id(review_id)
        try:
            action = ReviewAction(body.action)
        except ValueError:
            raise HTTPException(
                status_code=422,
                detail=f"action must be one of "
                f"{[a.value for a in ReviewAction]}, got {body.action!r}",
            ) from None
        if action is ReviewAction.REQUEST_CHANGES and not (body.feedback or "").strip():
            raise HTTPException(
                status_code=422, detail="RequestChanges requires non-empty feedback"
            )
        with project.lock:
            if project.store.decision_for_review(review_key) is not None:
                raise HTTPException(
                    status_code=409, detail=f"review {review_id!r} is already decided"
                )
            item = find_review(project, review_key)
            if item is None:
                raise HTTPException(status_code=404, detail=f"unknown review {review_id!r}")
            if item.get("signoff_only") and action is ReviewAction.REQUEST_CHANGES:
                raise HTTPException(
                    status_code=409,
                    detail="task reached the re-proposal limit; only Accept or Reject",
                )
            stage = (
                ReviewStage.SR_APPROVAL
                if item["stage"] == "SRApproval"
                else ReviewStage.REVISION_REVIEW
            )
            subject_refs: dict = {"review_id": review_key}
            if stage is ReviewStage.SR_APPROVAL and action is ReviewAction.APPROVE:
                if body.approved_ids is not None:
                    if not body.approved_ids:
                        raise HTTPException(
                            status_code=422,
                            detail="approving zero candidates would empty the SR set",
                        )
                    subject_refs["approved_ids"] = body.approved_ids
            decision = ReviewDecision(
                decision_id=f"dec-{project.project_id}-{review_key}",
                stage=stage,
                subject_refs=subject_refs,
                action=action,
                feedback=body.feedback,
                reviewer=body.reviewer,
                timestamp=datetime.datetime.now(datetime.timezone.utc).isoformat(),
            )
            project.store.append_decision(decision)
        return {"decision_id": decision.decision_id, "review_id": review_id}

    @app.get(API_PREFIX + "/projects/{project_id}/report")
    def project_report(project_id: str) -> dict:
        project = get_project(project_id)
        try:
            return build_report(project.store)
        except StageOrderViolation as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc

    if frontend_dir is not None and Path(frontend_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(frontend_dir), html=True), name="ui")

    return app
