"""Serialized graph documents (JSON export)."""

from typing import List, Optional, Union

from pydantic import BaseModel, Field


class EdgeRecord(BaseModel):
    """Directed edge from a node to one of its selected neighbors"""
    src: int = Field(..., ge=0)
    dst: int = Field(..., ge=0)
    omega: float
    pi: Optional[float] = None


class GraphDocument(BaseModel):
    n: int = Field(..., ge=1)
    k: int = Field(..., ge=1)
    policy: Optional[str] = None
    edges: List[EdgeRecord]
    node_meta: List[Union[str, int, float, None]] = Field(default_factory=list)
    top_attention: Optional[List[int]] = Field(
        None, description="per node, the neighbor with the highest pi"
    )
