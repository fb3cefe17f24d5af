"""Graph-aware terminology definition generation over ontology DAGs."""

__version__ = "0.1.0"
