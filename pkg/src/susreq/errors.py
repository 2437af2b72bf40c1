"""Exception hierarchy shared across the pipeline.

Every error raised on a documented contract boundary derives from
SusreqError so callers (and the CLI exit-code mapping) can discriminate
without string matching.
"""

from __future__ import annotations


class SusreqError(Exception):
    """Base class for all package errors."""


# --- document / taxonomy parsing ---------------------------------------


class MalformedDocument(SusreqError):
    """Input SRS is missing scope sections or a requirement list."""


class DuplicateId(SusreqError):
    """Two requirements (or records) share an identifier."""


class UnknownDimension(SusreqError):
    """Taxonomy dimension is not one of the four known dimensions."""


class EmptyCell(SusreqError):
    """A taxonomy row has an empty required cell."""


class FewerThanTwoSections(SusreqError):
    """Coherence needs at least two scope sections to compare."""


class CoherenceGateFailed(SusreqError):
    """Scope sections fell below the coherence threshold (hard gate)."""


# --- embeddings and the vector index ------------------------------------


class ProviderUnavailable(SusreqError):
    """A remote provider could not be reached after bounded retries,
    or a scripted provider ran out of matching responses."""


class EmptyText(SusreqError):
    """Refused to embed an empty (or whitespace-only) string."""


class DimensionMismatch(SusreqError):
    """Vector dimensions disagree (includes provider swaps between
    add and query)."""


class ZeroVector(SusreqError):
    """Cosine similarity is undefined for a zero vector."""


class IndexClosed(SusreqError):
    """Operation on an index after close()."""


class DuplicateRecord(SusreqError):
    """record_id already present in the index."""


class ProviderMismatch(SusreqError):
    """Index was built with a different embedding provider_id."""


class CorruptIndexFile(SusreqError):
    """Index file failed magic or checksum verification."""


class VersionMismatch(SusreqError):
    """Index file format version is not supported."""


# --- knowledge graph -----------------------------------------------------


class UnparseableModelOutput(SusreqError):
    """Model reply could not be parsed as a graph document, even after
    one repair re-ask."""


class EditTargetMissing(SusreqError):
    """Graph edit references an entity or relation that does not exist."""


class EditProducesInvalidGraph(SusreqError):
    """Applying the edit script would leave the graph invalid; the input
    document is unchanged."""


class EmptyGraph(SusreqError):
    """Retrieval against a graph with no entities."""


# --- agent runtime -------------------------------------------------------


class UnknownTemplate(SusreqError):
    """No prompt template registered under that id."""


class UnboundPlaceholder(SusreqError):
    """A template placeholder was left unbound; prompts are never sent
    with literal placeholders."""


class UnparseableStep(SusreqError):
    """Model text carried no recognizable reasoning marker, even after
    one repair re-ask."""


class EmptyMemory(SusreqError):
    """Synthesis requires at least one memory entry."""


# --- elicitation ---------------------------------------------------------


class ChunkLoopFailed(SusreqError):
    """A per-chunk agent loop failed while the stage runs in strict mode."""


class SynthesisRefViolation(SusreqError):
    """Synthesis referenced entities absent from the per-chunk results."""


class UnknownCandidateRef(SusreqError):
    """Candidate references a taxonomy record that is not in the index."""


class ApproveWithZeroApprovedCandidates(SusreqError):
    """An approval that leaves the elicited SR set empty is rejected."""


# --- relationship classification ------------------------------------------


class EmptySRSet(SusreqError):
    """Pair generation needs at least one SR."""


class DegenerateLabels(SusreqError):
    """Threshold calibration needs both labels present."""


class UnparseableVerdict(SusreqError):
    """Specialist agent answer did not contain a usable verdict block,
    even after one repair re-ask."""


class RoutingError(SusreqError):
    """Pair kind does not map to a specialist agent."""


# --- optimization ----------------------------------------------------------


class UnparseableProposal(SusreqError):
    """Optimizer reply was not valid JSON, even after one repair re-ask."""


class SchemaViolation(SusreqError):
    """Optimizer reply parsed but violated the proposal schema."""


class WrongTaskState(SusreqError):
    """Decision or transition applied to a task in the wrong state."""


# --- workbench --------------------------------------------------------------


class ConfigInvalid(SusreqError):
    """Project configuration failed validation."""


class StageOrderViolation(SusreqError):
    """Command requires artifacts of an earlier stage that do not exist."""


class PendingReview(SusreqError):
    """Stage is blocked waiting for a human decision."""
