"""HTTP surface: POST /v1/entail and GET /v1/health.

Scores are returned in request order; identical requests yield identical
scores. Error contract: 400 malformed request, 413 batch over the limit,
503 while the model is loading (or failed to load).
"""
from __future__ import annotations

import os
import time

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .models import DEFAULT_MODEL_ID, ModelHolder, load_model

DEFAULT_MAX_BATCH = 64


class Pair(BaseModel):
    premise: str
    hypothesis: str


class ScoreRequest(BaseModel):
    pairs: list[Pair]
    model_id: str | None = Field(default=None)


class ScoreResponse(BaseModel):
    scores: list[float]
    model_id: str
    latency_ms: float


def create_app(model_id: str | None = None, max_batch: int | None = None,
               loader=None) -> FastAPI:
    model_id = model_id or os.environ.get("MODEL_ID", DEFAULT_MODEL_ID)
    max_batch = max_batch or int(os.environ.get("MAX_BATCH", DEFAULT_MAX_BATCH))
    holder = ModelHolder(loader or (lambda: load_model(model_id)),
                         max_batch=max_batch).start()

    app = FastAPI(title="nli-service", version="0.1.0")
    app.state.holder = holder

    @app.exception_handler(RequestValidationError)
    async def malformed(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.get("/v1/health")
    def health():
        if holder.status != "ready":
            return JSONResponse(status_code=503, content={
                "status": holder.status, "model_id": model_id,
                "error": holder.error,
            })
        return {"status": "ready", "model_id": holder.model_id}

    @app.post("/v1/entail")
    def entail(req: ScoreRequest):
        if holder.status != "ready":
            return JSONResponse(status_code=503, content={
                "error": f"model {holder.status}", "detail": holder.error})
        if len(req.pairs) > holder.max_batch:
            return JSONResponse(status_code=413, content={
                "error": f"batch of {len(req.pairs)} exceeds limit {holder.max_batch}"})
        start = time.perf_counter()
        scores = holder.score_pairs([(p.premise, p.hypothesis) for p in req.pairs])
        latency = 1000.0 * (time.perf_counter() - start)
        return ScoreResponse(scores=scores, model_id=holder.model_id,
                             latency_ms=latency)

    return app
