"""Command-line interface.

One subcommand per pipeline stage plus audits, report, and the review
server. Exit codes are stable per error class so scripts can branch:
2 config, 3 stage order, 4 provider, 5 invalid input/graph, 6 pending
review, 7 unparseable model output, 1 anything else.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from susreq import errors
from susreq.workbench import audits as audits_mod
from susreq.workbench import pipeline
from susreq.workbench.artifacts import ArtifactStore
from susreq.workbench.config import ProjectConfig, load_config
from susreq.workbench.reportgen import generate_report

_EXIT_CODES: list[tuple[type, int]] = [
    (errors.ConfigInvalid, 2),
    (errors.StageOrderViolation, 3),
    (errors.ProviderUnavailable, 4),
    (errors.PendingReview, 6),
    (errors.UnparseableModelOutput, 7),
    (errors.UnparseableStep, 7),
    (errors.UnparseableVerdict, 7),
    (errors.UnparseableProposal, 7),
    (errors.SchemaViolation, 7),
    (errors.MalformedDocument, 5),
    (errors.DuplicateId, 5),
    (errors.UnknownDimension, 5),
    (errors.EmptyCell, 5),
    (errors.CoherenceGateFailed, 5),
    (errors.EditTargetMissing, 5),
    (errors.EditProducesInvalidGraph, 5),
    (errors.UnknownCandidateRef, 5),
    (errors.ApproveWithZeroApprovedCandidates, 5),
    (errors.SusreqError, 1),
]


def _exit_code(exc: Exception) -> int:
    for klass, code in _EXIT_CODES:
        if isinstance(exc, klass):
            return code
    return 1


def _run(action):
    try:
        result = action()
    except errors.SusreqError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(_exit_code(exc))
    if result is not None:
        status = "skipped (up to date)" if result.skipped else "done"
        click.echo(f"{result.name}: {status} — {result.summary}")


def _store(project_dir: str) -> ArtifactStore:
    return ArtifactStore(project_dir)


def _config(project_dir: str) -> ProjectConfig:
    return load_config(Path(project_dir) / "config.json")


@click.group()
def main() -> None:
    """Sustainability requirements pipeline."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--project", "project_dir", required=True, type=click.Path())
def init(config_path: str, project_dir: str) -> None:
    """Create a project directory from a config file."""
    _run(lambda: pipeline.init_project(load_config(config_path), project_dir))


@main.command()
@click.option("--project", "project_dir", required=True, type=click.Path(exists=True))
@click.option("--force", is_flag=True, help="Recompute even when inputs are unchanged.")
@click.option(
    "--allow-incoherent",
    is_flag=True,
    help="Proceed even when scope sections fall below the coherence threshold.",
)
def ingest(project_dir: str, force: bool, allow_incoherent: bool) -> None:
    """Parse inputs, check scope coherence, build the vector stores."""
    _run(
        lambda: pipeline.ingest(
            _store(project_dir),
            _config(project_dir),
            force=force,
            allow_incoherent=allow_incoherent,
        )
    )


@main.group()
def kg() -> None:
    """Knowledge-graph commands."""


@kg.command("build")
@click.option("--project", "project_dir", required=True, type=click.Path(exists=True))
@click.option("--force", is_flag=True)
@click.option(
    "--edits",
    "edits_path",
    type=click.Path(exists=True),
    default=None,
    help="JSON edit script applied after extraction (human corrections).",
)
def kg_build(project_dir: str, force: bool, edits_path: str | None) -> None:
    """Extract, validate, and embed the standards knowledge graph."""
    _run(
        lambda: pipeline.kg_build(
            _store(project_dir), _config(project_dir), force=force, edits_path=edits_path
        )
    )


@main.command()
@click.option("--project", "project_dir", required=True, type=click.Path(exists=True))
@click.option("--force", is_flag=True)
@click.option("--wait", is_flag=True, help="Block until the pending review is decided.")
@click.option("--timeout", type=float, default=600.0, show_default=True)
def elicit(project_dir: str, force: bool, wait: bool, timeout: float) -> None:
    """Derive candidate SRs and run the expert approval loop."""
    _run(
        lambda: pipeline.elicit(
            _store(project_dir), _config(project_dir), force=force, wait=wait, timeout=timeout
        )
    )


@main.command()
@click.option("--project", "project_dir", required=True, type=click.Path(exists=True))
@click.option("--force", is_flag=True)
def relate(project_dir: str, force: bool) -> None:
    """Generate candidate pairs and keep the semantically related ones."""
    _run(lambda: pipeline.relate(_store(project_dir), _config(project_dir), force=force))


@main.command()
@click.option("--project", "project_dir", required=True, type=click.Path(exists=True))
@click.option("--force", is_flag=True)
def classify(project_dir: str, force: bool) -> None:
    """Classify every related pair via the specialist agents."""
    _run(lambda: pipeline.classify_stage(_store(project_dir), _config(project_dir), force=force))


@main.command()
@click.option("--project", "project_dir", required=True, type=click.Path(exists=True))
@click.option("--force", is_flag=True)
@click.option("--wait", is_flag=True, help="Block until pending reviews are decided.")
@click.option("--timeout", type=float, default=600.0, show_default=True)
def optimize(project_dir: str, force: bool, wait: bool, timeout: float) -> None:
    """Propose and revalidate revisions for negatively correlated pairs."""
    _run(
        lambda: pipeline.optimize(
            _store(project_dir), _config(project_dir), force=force, wait=wait, timeout=timeout
        )
    )


@main.command()
@click.option("--project", "project_dir", required=True, type=click.Path(exists=True))
def check(project_dir: str) -> None:
    """Completeness check: is every SR satisfied by some requirement?"""
    _run(lambda: pipeline.check(_store(project_dir), _config(project_dir)))


@main.command()
@click.option("--project", "project_dir", required=True, type=click.Path(exists=True))
def report(project_dir: str) -> None:
    """Write report.json and report.md from the artifacts."""

    def action():
        generate_report(_store(project_dir))
        click.echo(f"report written to {Path(project_dir) / 'artifacts'}")

    _run(action)


@main.group()
def audit() -> None:
    """Validation audits."""


@audit.command("consistency")
@click.option("--project", "project_dir", required=True, type=click.Path(exists=True))
@click.option("--runs", type=int, default=3, show_default=True)
def audit_consistency(project_dir: str, runs: int) -> None:
    """Verdict-label agreement across repeated classification runs."""

    def action():
        result = audits_mod.run_consistency_audit(_store(project_dir), _config(project_dir), runs)
        click.echo(result.render())

    _run(action)


@audit.command("trust")
@click.option("--project", "project_dir", required=True, type=click.Path(exists=True))
def audit_trust(project_dir: str) -> None:
    """Catalog-referred versus own-reasoning verdict counts."""

    def action():
        result = audits_mod.run_trust_audit(_store(project_dir))
        click.echo(result.render())

    _run(action)


@main.command()
@click.option(
    "--project",
    "project_dirs",
    required=True,
    multiple=True,
    type=click.Path(exists=True),
    help="Project directory; repeat for multiple projects.",
)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option(
    "--frontend",
    "frontend_dir",
    type=click.Path(exists=True),
    default=None,
    help="Static dashboard build to serve at /.",
)
def serve(project_dirs: tuple[str, ...], host: str, port: int, frontend_dir: str | None) -> None:
    """Serve the review API (and optionally the dashboard)."""
    import uvicorn

    from susreq.workbench.server import create_app

    try:
        app = create_app(list(project_dirs), frontend_dir=frontend_dir)
    except errors.SusreqError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(_exit_code(exc))
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
