"""
Inference router - HTTP endpoints for bag prediction and graph inspection.
The served checkpoint comes from settings.checkpoint_path.
"""

from functools import lru_cache
from pathlib import Path

import numpy as np
from fastapi import APIRouter, Depends, HTTPException

from wikg.core.config import settings
from wikg.core.errors import FormatError, WikgError
from wikg.engine.tensor import precision
from wikg.schemas.graph import GraphDocument
from wikg.schemas.responses import BagRequest, ModelInfoResponse, PredictResponse
from wikg.services.checkpoint_service import load_checkpoint
from wikg.services.classifier_service import BagClassifier, model_dtype
from wikg.services.data_service import Bag, read_bag
from wikg.services.export_service import bag_graph_document
from wikg.services.model_service import param_count
from wikg.services.train_service import predict_probabilities

router = APIRouter(prefix="/inference", tags=["inference"])


@lru_cache(maxsize=4)
def _cached_model(path: str, mtime_ns: int) -> BagClassifier:
    return load_checkpoint(path)


def get_model() -> BagClassifier:
    """The configured checkpoint, reloaded when the file changes."""
    if not settings.checkpoint_path:
        raise HTTPException(status_code=500, detail="no checkpoint configured (set WIKG_CHECKPOINT_PATH)")
    path = Path(settings.checkpoint_path)
    if not path.is_file():
        raise HTTPException(status_code=404, detail=f"checkpoint not found: {path}")
    try:
        return _cached_model(str(path), path.stat().st_mtime_ns)
    except FormatError as e:
        raise HTTPException(status_code=500, detail=str(e))


def _bag_from_request(req: BagRequest) -> Bag:
    if req.bag_path is not None:
        try:
            bag = read_bag(req.bag_path)
        except FileNotFoundError as e:
            raise HTTPException(status_code=404, detail=str(e))
        except FormatError as e:
            raise HTTPException(status_code=400, detail=str(e))
    else:
        try:
            bag = Bag(id="request", features=np.asarray(req.features, dtype=np.float64))
        except (ValueError, WikgError) as e:
            raise HTTPException(status_code=400, detail=str(e))
    if bag.n > settings.max_instances_per_request:
        raise HTTPException(
            status_code=400,
            detail=f"bag has {bag.n} instances, limit is {settings.max_instances_per_request}",
        )
    return bag


@router.get("/model", response_model=ModelInfoResponse)
async def model_info(model: BagClassifier = Depends(get_model)):
    """Configuration and size of the served model."""
    return ModelInfoResponse(
        checkpoint_path=str(settings.checkpoint_path),
        config=model.config,
        param_count=param_count(model),
        dtype=str(model_dtype(model)),
    )


@router.post("/predict", response_model=PredictResponse)
def predict(req: BagRequest, model: BagClassifier = Depends(get_model)):
    """Class probabilities for one bag."""
    bag = _bag_from_request(req)
    try:
        with precision(model_dtype(model)):
            probabilities = predict_probabilities(model, [bag])[0]
    except (ValueError, WikgError) as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        raise HTTPException(status_code=500, detail=str(e))
    return PredictResponse(
        probabilities=probabilities.tolist(),
        predicted_class=int(np.argmax(probabilities)),
        n_instances=bag.n,
    )


@router.post("/graph", response_model=GraphDocument)
def graph(req: BagRequest, model: BagClassifier = Depends(get_model)):
    """Neighbors, omega and pi of every node; WiKG checkpoints only."""
    bag = _bag_from_request(req)
    try:
        return bag_graph_document(model, bag)
    except (ValueError, WikgError) as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        raise HTTPException(status_code=500, detail=str(e))
