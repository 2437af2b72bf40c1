"""Project configuration: inputs, providers, thresholds, and policy flags.

The config is a JSON file; relative paths resolve against the file's
directory and every referenced path must exist at load time. Credentials
never live in the file — HTTP providers read their keys from environment
variables.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from susreq.agents import ChatProvider, HTTPChatProvider, MockChatProvider
from susreq.embeddings import EmbeddingProvider, HashEmbedder, HTTPEmbedder
from susreq.errors import ConfigInvalid

_DEFAULT_THRESHOLDS = {"coherence": 0.5, "related": 0.65}
_POLICY_DEFAULTS = {
    "chunk_failure": "strict",
    "completeness_predicate": "positive",
    "reproposal_limit": 3,
    "review_mode": "batch",
    "decisions_file": None,
}


@dataclass(frozen=True)
class ProjectConfig:
    project_id: str
    srs_path: Path
    taxonomy_path: Path
    standard_doc_path: Path
    catalog_paths: dict[str, Path]
    chat_provider_cfg: dict
    embedding_provider_cfg: dict
    coherence_threshold: float = 0.5
    related_threshold: float = 0.65
    temperature: float = 0.3
    max_steps: int = 8
    runs: int = 1
    concurrency: int = 1
    policy: dict = field(default_factory=dict)
    base_dir: Path = Path(".")

    def to_jsonable(self) -> dict:
        return {
            "project_id": self.project_id,
            "inputs": {
                "srs": str(self.srs_path),
                "taxonomy": str(self.taxonomy_path),
                "standard_doc": str(self.standard_doc_path),
                "catalogs": {k: str(v) for k, v in self.catalog_paths.items()},
            },
            "providers": {
                "chat": self.chat_provider_cfg,
                "embedding": self.embedding_provider_cfg,
            },
            "thresholds": {
                "coherence": self.coherence_threshold,
                "related": self.related_threshold,
            },
            "temperature": self.temperature,
            "max_steps": self.max_steps,
            "runs": self.runs,
            "concurrency": self.concurrency,
            "policy": self.policy,
        }


_CATALOG_KEYS = ("fr_dependency", "nfr_correlation", "sr_correlation")


def load_config(path: str | Path) -> ProjectConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigInvalid(f"config file {path} does not exist")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except ValueError as exc:
        raise ConfigInvalid(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(payload, base_dir=path.parent)


def parse_config(payload: dict, base_dir: Path) -> ProjectConfig:
    def fail(message: str) -> ConfigInvalid:
        return ConfigInvalid(message)

    project_id = payload.get("project_id")
    if not project_id or not isinstance(project_id, str):
        raise fail("config needs a non-empty project_id")

    inputs = payload.get("inputs") or {}
    resolved: dict[str, Path] = {}
    for key in ("srs", "taxonomy", "standard_doc"):
        raw = inputs.get(key)
        if not raw:
            raise fail(f"config inputs.{key} is required")
        candidate = (base_dir / raw).resolve() if not Path(raw).is_absolute() else Path(raw)
        if not candidate.is_file():
            raise fail(f"config inputs.{key}: {candidate} does not exist")
        resolved[key] = candidate

    raw_catalogs = inputs.get("catalogs") or {}
    catalogs: dict[str, Path] = {}
    for key in _CATALOG_KEYS:
        raw = raw_catalogs.get(key)
        if not raw:
            raise fail(f"config inputs.catalogs.{key} is required")
        candidate = (base_dir / raw).resolve() if not Path(raw).is_absolute() else Path(raw)
        if not candidate.is_file():
            raise fail(f"config inputs.catalogs.{key}: {candidate} does not exist")
        catalogs[key] = candidate

    providers = payload.get("providers") or {}
    chat_cfg = providers.get("chat")
    embed_cfg = providers.get("embedding")
    if not isinstance(chat_cfg, dict) or chat_cfg.get("type") not in ("mock", "http"):
        raise fail("config providers.chat must have type 'mock' or 'http'")
    if not isinstance(embed_cfg, dict) or embed_cfg.get("type") not in ("hash", "http"):
        raise fail("config providers.embedding must have type 'hash' or 'http'")
    if chat_cfg["type"] == "mock":
        script = chat_cfg.get("script")
        if not script:
            raise fail("mock chat provider needs a script path")
        script_path = (base_dir / script).resolve() if not Path(script).is_absolute() else Path(script)
        if not script_path.is_file():
            raise fail(f"mock chat script {script_path} does not exist")
        chat_cfg = dict(chat_cfg, script=str(script_path))

    thresholds = dict(_DEFAULT_THRESHOLDS, **(payload.get("thresholds") or {}))
    for name, value in thresholds.items():
        if not isinstance(value, (int, float)) or not 0.0 <= float(value) <= 1.0:
            raise fail(f"threshold {name} must be in [0, 1], got {value!r}")

    temperature = payload.get("temperature", 0.3)
    if not isinstance(temperature, (int, float)) or temperature < 0:
        raise fail(f"temperature must be >= 0, got {temperature!r}")

    max_steps = payload.get("max_steps", 8)
    runs = payload.get("runs", 1)
    concurrency = payload.get("concurrency", 1)
    for name, value in (("max_steps", max_steps), ("runs", runs), ("concurrency", concurrency)):
        if not isinstance(value, int) or value < 1:
            raise fail(f"{name} must be a positive integer, got {value!r}")

    policy = dict(_POLICY_DEFAULTS, **(payload.get("policy") or {}))
    if policy["chunk_failure"] not in ("strict", "lenient"):
        raise fail("policy.chunk_failure must be 'strict' or 'lenient'")
    if policy["completeness_predicate"] not in ("positive", "literal"):
        raise fail("policy.completeness_predicate must be 'positive' or 'literal'")
    if policy["review_mode"] not in ("batch", "interactive"):
        raise fail("policy.review_mode must be 'batch' or 'interactive'")
    if not isinstance(policy["reproposal_limit"], int) or policy["reproposal_limit"] < 1:
        raise fail("policy.reproposal_limit must be a positive integer")
    if policy["decisions_file"]:
        decisions = Path(policy["decisions_file"])
        decisions = (base_dir / decisions).resolve() if not decisions.is_absolute() else decisions
        if not decisions.is_file():
            raise fail(f"policy.decisions_file {decisions} does not exist")
        policy["decisions_file"] = str(decisions)

    return ProjectConfig(
        project_id=project_id,
        srs_path=resolved["srs"],
        taxonomy_path=resolved["taxonomy"],
        standard_doc_path=resolved["standard_doc"],
        catalog_paths=catalogs,
        chat_provider_cfg=dict(chat_cfg),
        embedding_provider_cfg=dict(embed_cfg),
        coherence_threshold=float(thresholds["coherence"]),
        related_threshold=float(thresholds["related"]),
        temperature=float(temperature),
        max_steps=max_steps,
        runs=runs,
        concurrency=concurrency,
        policy=policy,
        base_dir=base_dir,
    )


def build_chat_provider(config: ProjectConfig) -> ChatProvider:
    cfg = config.chat_provider_cfg
    if cfg["type"] == "mock":
        return MockChatProvider.from_script_file(cfg["script"])
    return HTTPChatProvider(
        endpoint=cfg["endpoint"],
        model=cfg.get("model", "default"),
        temperature=config.temperature,
        max_output_tokens=cfg.get("max_output_tokens"),
        api_key_env=cfg.get("api_key_env", "SUSREQ_CHAT_API_KEY"),
    )


def build_embedder(config: ProjectConfig) -> EmbeddingProvider:
    cfg = config.embedding_provider_cfg
    if cfg["type"] == "hash":
        return HashEmbedder(dimension=int(cfg.get("dimension", 64)))
    return HTTPEmbedder(
        endpoint=cfg["endpoint"],
        model=cfg.get("model", "default"),
        dimension=int(cfg["dimension"]),
        api_key_env=cfg.get("api_key_env", "SUSREQ_EMBED_API_KEY"),
    )
