from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from app.api import router as api_router
from app.api import served_checkpoint
from app.config import settings

app = FastAPI(
    title="Max-min SINR Beamforming",
    description="Optimal and learned max-min SINR downlink beamforming.",
    version="0.1.0",
    openapi_tags=[
        {"name": "solver", "description": "Optimal balancing via uplink-downlink duality and downlink recovery."},
        {"name": "network", "description": "Power-fraction prediction with the served checkpoint."},
    ],
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=settings.CORS_ALLOW_ORIGINS,
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

app.include_router(api_router, prefix="/api")


@app.on_event("startup")
async def startup_event():
    # Warm the served checkpoint; a missing or broken file only disables /predict.
    if settings.CHECKPOINT_PATH:
        try:
            ckpt = served_checkpoint()
            print(f"[startup] serving checkpoint {settings.CHECKPOINT_PATH} "
                  f"(M={ckpt.network.num_antennas}, K={ckpt.network.num_users})")
        except Exception as e:
            print(f"[startup] checkpoint not loaded: {e}")
    app.state.initialized = True


@app.get("/health", tags=["health"])
async def health_check():
    """
    Simple health check endpoint.
    """
    return {"status": "ok", "service": "beamforming-service", "model_loaded": bool(settings.CHECKPOINT_PATH)}
