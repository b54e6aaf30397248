"""WiKG: dynamic directed-graph representation learning for instance bags."""

__version__ = "1.0.0"
