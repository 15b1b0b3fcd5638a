"""Trace-driven SQL workload synthesis."""

from ._tracesynth import (
    Dataset,
    LocalModel,
    ParseError,
    QueryGraph,
    SimulatedBackend,
    ValidationError,
    gen_dataset,
    gen_trace,
    load_dataset,
    parse_graph,
    parse_model,
    parse_sql,
    profile,
    qerror,
    sample_graph,
    summarize_report,
    synthesize,
)

__all__ = [
    "Dataset",
    "LocalModel",
    "ParseError",
    "QueryGraph",
    "SimulatedBackend",
    "ValidationError",
    "gen_dataset",
    "gen_trace",
    "load_dataset",
    "parse_graph",
    "parse_model",
    "parse_sql",
    "profile",
    "qerror",
    "sample_graph",
    "summarize_report",
    "synthesize",
]
