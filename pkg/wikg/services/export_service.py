"""
Graph documents for inspection: JSON (the interchange format) and DOT.
Rendering is left to external tools.
"""

import json
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from wikg.core.enums import Mode
from wikg.core.errors import DimensionError, UsageError
from wikg.engine.tensor import no_tape, precision
from wikg.schemas.graph import EdgeRecord, GraphDocument
from wikg.services.classifier_service import model_dtype
from wikg.services.graph_service import DirectedBagGraph
from wikg.services.model_service import WikgModel

PathLike = Union[str, Path]


def export_graph(
    graph: DirectedBagGraph,
    node_meta: Optional[Sequence] = None,
    pi: Optional[np.ndarray] = None,
) -> GraphDocument:
    """One edge record per (node, selected neighbor), carrying omega and, if given, pi."""
    omega = graph.omega.data
    if pi is not None:
        pi = np.asarray(pi)
        if pi.shape != omega.shape:
            raise DimensionError(f"pi has shape {pi.shape}, expected {omega.shape}")
    if node_meta is not None and len(node_meta) != graph.n:
        raise DimensionError(f"node_meta has {len(node_meta)} entries for {graph.n} nodes")

    edges = [
        EdgeRecord(
            src=i,
            dst=int(graph.neighbor_idx[i, j]),
            omega=float(omega[i, j]),
            pi=None if pi is None else float(pi[i, j]),
        )
        for i in range(graph.n)
        for j in range(graph.k)
    ]
    top_attention = None
    if pi is not None:
        top_attention = [int(graph.neighbor_idx[i, int(np.argmax(pi[i]))]) for i in range(graph.n)]
    return GraphDocument(
        n=graph.n,
        k=graph.k,
        policy=graph.policy.value,
        edges=edges,
        node_meta=list(node_meta) if node_meta is not None else [],
        top_attention=top_attention,
    )


def to_json(document: GraphDocument) -> str:
    return document.model_dump_json(indent=2)


def parse_graph_json(text: str) -> GraphDocument:
    return GraphDocument.model_validate(json.loads(text))


def _dot_id(value) -> str:
    return '"' + str(value).replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(document: GraphDocument) -> str:
    """Directed graph; edge labels are omega rounded to 4 decimals."""
    lines = ["digraph wikg {"]
    for node in range(document.n):
        label = str(node)
        if node < len(document.node_meta) and document.node_meta[node] is not None:
            label = f"{node}: {document.node_meta[node]}"
        lines.append(f"  {node} [label={_dot_id(label)}];")
    for edge in document.edges:
        lines.append(f"  {edge.src} -> {edge.dst} [label={_dot_id(round(edge.omega, 4))}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def write_graph(document: GraphDocument, path: PathLike, fmt: str = "json") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = to_dot(document) if fmt == "dot" else to_json(document)
    path.write_text(text, encoding="utf-8")
    return path


def read_graph(path: PathLike) -> GraphDocument:
    return parse_graph_json(Path(path).read_text(encoding="utf-8"))


def bag_graph_document(model, bag) -> GraphDocument:
    """Eval-mode forward of a WiKG model on one bag, exported with omega and pi."""
    if not isinstance(model, WikgModel):
        raise UsageError(f"graph export needs a wikg checkpoint, got {model.config.kind.value}")
    with precision(model_dtype(model)), no_tape():
        result = model.forward_full(bag, Mode.EVAL)
    return export_graph(result.graph, bag.node_meta, result.trace.pi.data)
