"""Human review decisions, shared by the elicitation and optimization loops.

Decisions are append-only records; nothing in the pipeline ever rewrites
one. RequestChanges always carries feedback text.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field


class ReviewStage(enum.Enum):
    SR_APPROVAL = "SRApproval"
    REVISION_REVIEW = "RevisionReview"


class ReviewAction(enum.Enum):
    APPROVE = "Approve"
    REJECT = "Reject"
    REQUEST_CHANGES = "RequestChanges"


@dataclass(frozen=True)
class ReviewDecision:
    decision_id: str
    stage: ReviewStage
    subject_refs: dict[str, object] = field(default_factory=dict)
    action: ReviewAction = ReviewAction.APPROVE
    feedback: str | None = None
    reviewer: str = "reviewer"
    timestamp: str = ""

    def __post_init__(self) -> None:
        if self.action is ReviewAction.REQUEST_CHANGES and not (
            self.feedback and self.feedback.strip()
        ):
            raise ValueError("RequestChanges requires feedback text")

    def to_jsonable(self) -> dict:
        return {
            "decision_id": self.decision_id,
            "stage": self.stage.value,
            "subject_refs": self.subject_refs,
            "action": self.action.value,
            "feedback": self.feedback,
            "reviewer": self.reviewer,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_jsonable(cls, payload: dict) -> "ReviewDecision":
        return cls(
            decision_id=payload["decision_id"],
            stage=ReviewStage(payload["stage"]),
            subject_refs=dict(payload.get("subject_refs", {})),
            action=ReviewAction(payload["action"]),
            feedback=payload.get("feedback"),
            reviewer=payload.get("reviewer", "reviewer"),
            timestamp=payload.get("timestamp", ""),
        )
