"""Project workbench: configuration, artifact store, pipeline stages,
audits, reports, and the review HTTP API."""
