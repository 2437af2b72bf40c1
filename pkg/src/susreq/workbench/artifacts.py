"""Per-project artifact store.

A project is a directory of canonical JSON files plus a manifest of content
hashes; no database. Serialization is deterministic (sorted keys, fixed
separators, no wall-clock data) so re-running a stage with unchanged inputs
rewrites byte-identical files. The decision log is append-only.
"""

from __future__ import annotations

import enum
import hashlib
import json
from pathlib import Path
from typing import Iterable

from susreq.errors import StageOrderViolation
from susreq.review import ReviewDecision


class Stage(enum.Enum):
    INIT = "Init"
    ELICITED = "Elicited"
    RELATED = "Related"
    CLASSIFIED = "Classified"
    OPTIMIZED = "Optimized"
    COMPLETE = "Complete"


_STAGE_ORDER = {stage: i for i, stage in enumerate(Stage)}


def canonical_dumps(payload) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class ArtifactStore:
    """Owns one project directory; the single writer for its state."""

    def __init__(self, root: str | Path) -> None:
        self.root = Path(root)
        self.artifacts_dir = self.root / "artifacts"
        self.transcripts_dir = self.root / "transcripts"
        self.decisions_path = self.root / "decisions.jsonl"
        self.state_path = self.root / "state.json"

    # --- lifecycle ------------------------------------------------------

    def initialize(self, config_jsonable: dict) -> None:
        self.artifacts_dir.mkdir(parents=True, exist_ok=True)
        self.transcripts_dir.mkdir(parents=True, exist_ok=True)
        (self.root / "config.json").write_text(
            json.dumps(config_jsonable, indent=2, sort_keys=True), encoding="utf-8"
        )
        if not self.state_path.exists():
            self._write_state({"stage": Stage.INIT.value, "signatures": {}, "manifest": {}})

    @property
    def initialized(self) -> bool:
        return self.state_path.exists()

    def require_initialized(self) -> None:
        if not self.initialized:
            raise StageOrderViolation(
                f"{self.root} is not an initialized project (run init first)"
            )

    def config_payload(self) -> dict:
        return json.loads((self.root / "config.json").read_text(encoding="utf-8"))

    # --- state ------------------------------------------------------------

    def _read_state(self) -> dict:
        return json.loads(self.state_path.read_text(encoding="utf-8"))

    def _write_state(self, state: dict) -> None:
        self.state_path.write_text(
            json.dumps(state, indent=2, sort_keys=True), encoding="utf-8"
        )

    @property
    def stage(self) -> Stage:
        return Stage(self._read_state()["stage"])

    def advance_stage(self, stage: Stage) -> None:
        """Stages only ever move forward."""
        state = self._read_state()
        if _STAGE_ORDER[stage] > _STAGE_ORDER[Stage(state["stage"])]:
            state["stage"] = stage.value
            self._write_state(state)

    def signature(self, name: str) -> str | None:
        return self._read_state()["signatures"].get(name)

    def set_signature(self, name: str, value: str) -> None:
        state = self._read_state()
        state["signatures"][name] = value
        self._write_state(state)

    def manifest(self) -> dict[str, str]:
        return dict(self._read_state()["manifest"])

    def _record_manifest(self, relpath: str, digest: str) -> None:
        state = self._read_state()
        state["manifest"][relpath] = digest
        self._write_state(state)

    # --- artifacts --------------------------------------------------------

    def artifact_path(self, name: str) -> Path:
        return self.artifacts_dir / name

    def has_artifact(self, name: str) -> bool:
        return self.artifact_path(name).is_file()

    def require_artifact(self, name: str, hint: str) -> Path:
        path = self.artifact_path(name)
        if not path.is_file():
            raise StageOrderViolation(f"missing artifact {name} — run `{hint}` first")
        return path

    def write_json(self, name: str, payload) -> Path:
        path = self.artifact_path(name)
        path.parent.mkdir(parents=True, exist_ok=True)
        text = canonical_dumps(payload)
        path.write_text(text, encoding="utf-8")
        self._record_manifest(f"artifacts/{name}", sha256_text(text))
        return path

    def write_text(self, name: str, text: str) -> Path:
        path = self.artifact_path(name)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        self._record_manifest(f"artifacts/{name}", sha256_text(text))
        return path

    def read_json(self, name: str):
        return json.loads(self.artifact_path(name).read_text(encoding="utf-8"))

    def write_transcripts(self, name: str, transcripts: Iterable) -> Path:
        path = self.transcripts_dir / f"{name}.json"
        payload = [t.to_jsonable() for t in transcripts]
        path.write_text(canonical_dumps(payload), encoding="utf-8")
        return path

    # --- decisions (append-only) ---------------------------------------------

    def read_decisions(self) -> list[ReviewDecision]:
        if not self.decisions_path.exists():
            return []
        decisions = []
        for line in self.decisions_path.read_text(encoding="utf-8").splitlines():
            if line.strip():
                decisions.append(ReviewDecision.from_jsonable(json.loads(line)))
        return decisions

    def append_decision(self, decision: ReviewDecision) -> bool:
        """Append if the decision_id is new; never rewrites prior lines."""
        if any(d.decision_id == decision.decision_id for d in self.read_decisions()):
            return False
        with open(self.decisions_path, "a", encoding="utf-8") as fh:
            fh.write(canonical_dumps(decision.to_jsonable()) + "\n")
        return True

    def decision_for_review(self, review_id: str) -> ReviewDecision | None:
        for decision in self.read_decisions():
            if decision.subject_refs.get("review_id") == review_id:
                return decision
        return None
