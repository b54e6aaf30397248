"""
Request and response schemas for the inference API.
All data is validated through Pydantic.
"""

from typing import List, Optional

from pydantic import BaseModel, Field, model_validator

from wikg.core.config import ModelConfig


class BagRequest(BaseModel):
    """A bag given as a file path or as inline instance features"""
    bag_path: Optional[str] = Field(None, min_length=1)
    features: Optional[List[List[float]]] = Field(None, description="N x D_in instance features")

    @model_validator(mode="after")
    def exactly_one_source(self):
        if (self.bag_path is None) == (self.features is None):
            raise ValueError("give exactly one of bag_path or features")
        return self


class PredictResponse(BaseModel):
    """Class probabilities for one bag"""
    probabilities: List[float]
    predicted_class: int
    n_instances: int


class ModelInfoResponse(BaseModel):
    """The checkpoint being served"""
    checkpoint_path: str
    config: ModelConfig
    param_count: int
    dtype: str
