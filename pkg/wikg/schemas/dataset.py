"""Dataset contracts: manifest records and generator metadata."""

from typing import Dict, List, Optional

from pydantic import BaseModel, Field, model_validator


class ManifestRecord(BaseModel):
    """One line of manifest.csv"""
    bag_path: str
    label: int = Field(..., ge=0)
    fold: int = Field(default=0, ge=0)


class DatasetManifest(BaseModel):
    """Bag files with labels and fold assignments"""
    records: List[ManifestRecord]
    n_classes: int = Field(..., ge=2)
    d_in: int = Field(..., ge=1)
    root: Optional[str] = Field(None, description="directory relative bag paths resolve against")

    @model_validator(mode="after")
    def labels_must_be_in_range(self):
        for record in self.records:
            if record.label >= self.n_classes:
                raise ValueError(
                    f"label {record.label} of {record.bag_path} outside [0, {self.n_classes})"
                )
        return self

    @property
    def labels(self) -> List[int]:
        return [r.label for r in self.records]

    @property
    def folds(self) -> List[int]:
        return sorted({r.fold for r in self.records})


class DatasetInfo(BaseModel):
    """Sidecar written by the synthetic generator (dataset.json)"""
    seed: int
    n_bags: int
    d_in: int
    noise_sigma: float
    min_instances: int
    max_instances: int
    n_prototypes: int
    prototype_a: int
    prototype_b: int
    prototype_names: List[str]
    assignments: Dict[str, List[int]] = Field(
        ..., description="bag id -> prototype index of every instance"
    )
