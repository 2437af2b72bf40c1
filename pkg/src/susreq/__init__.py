"""Sustainability-aware requirements engineering pipeline.

Elicits product-relevant sustainability requirements from a taxonomy and a
standards knowledge graph, classifies how FRs/NFRs correlate with them, and
proposes validated revisions for requirements that hurt sustainability,
with human review loops at the elicitation and optimization stages.
"""

__version__ = "0.1.0"
