from pathlib import Path

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from wikg import __version__
from wikg.core.config import settings
from wikg.routers import inference_router

app = FastAPI(
    title="WiKG Bag Classifier",
    description=(
        "Serves one trained bag classifier (WIKG_CHECKPOINT_PATH): class probabilities per bag "
        "and, for WiKG checkpoints, the per-bag directed graph with edge weights and attention"
    ),
    version=__version__,
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

app.include_router(inference_router.router)


def _checkpoint_state() -> str:
    if not settings.checkpoint_path:
        return "unconfigured"
    return "ready" if Path(settings.checkpoint_path).is_file() else "missing"


@app.get("/")
async def root():
    """Service information and the served checkpoint."""
    return {
        "name": "WiKG Bag Classifier",
        "version": __version__,
        "checkpoint": settings.checkpoint_path,
        "checkpoint_state": _checkpoint_state(),
        "max_instances_per_request": settings.max_instances_per_request,
        "endpoints": {
            "model": "/inference/model",
            "predict": "/inference/predict",
            "graph": "/inference/graph",
        },
    }


@app.get("/health")
async def health():
    """Healthy once a checkpoint file is in place."""
    state = _checkpoint_state()
    return {"status": "healthy" if state == "ready" else "degraded", "checkpoint_state": state}
