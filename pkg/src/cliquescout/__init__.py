"""Coordinated reviewer group detection with (k, d) reviewer-similarity graphs."""

__version__ = "0.1.0"

from .clique import clique_size_histogram, maximal_cliques
from .graph import Graph
from .ingest import IngestError, IngestReport, ReviewSchema, UserSchema, ingest_reviews, ingest_users
from .kdgraph import (
    KDGraph,
    KDParams,
    WeightMode,
    build_kd_graph,
    kd_parameter_sweep,
    qualifying_venues,
)
from .quasiclique import (
    QuasiParams,
    density,
    maximal_pseudo_cliques,
    pseudo_cliques,
    quasiclique_size_histogram,
)
from .report import CountTable, LabelFile, annotate, build_count_table, export_group_graph, flag_groups
from .store import Review, ReviewStore, StoreFormatError, load_store, save_store
from .synth import SynthConfig, generate

__all__ = [
    "CountTable",
    "Graph",
    "IngestError",
    "IngestReport",
    "KDGraph",
    "KDParams",
    "LabelFile",
    "QuasiParams",
    "Review",
    "ReviewSchema",
    "ReviewStore",
    "StoreFormatError",
    "SynthConfig",
    "UserSchema",
    "WeightMode",
    "annotate",
    "build_count_table",
    "build_kd_graph",
    "clique_size_histogram",
    "density",
    "export_group_graph",
    "flag_groups",
    "generate",
    "ingest_reviews",
    "ingest_users",
    "kd_parameter_sweep",
    "load_store",
    "maximal_cliques",
    "maximal_pseudo_cliques",
    "pseudo_cliques",
    "qualifying_venues",
    "quasiclique_size_histogram",
    "save_store",
]
