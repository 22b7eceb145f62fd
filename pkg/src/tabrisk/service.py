"""Read-only HTTP inference and explanation API over a frozen ensemble.

Endpoints
---------
GET  /schema          feature specifications for form rendering
GET  /model           backbone ids, voting weights, gate, training metadata
GET  /health          liveness probe
POST /predict         feature map (+ optional threshold) -> probability/class
POST /counterfactual  feature map -> nearest-instance counterfactual
POST /attribution     feature map -> Monte-Carlo Shapley attribution

Errors are machine-readable: 400 for malformed JSON bodies, 422 with the
offending field for validation problems, 500 with an opaque id otherwise.
The app holds immutable model state only, so concurrent reads need no
locking and identical requests yield identical responses.
"""

from __future__ import annotations

import math
import uuid
from dataclasses import replace

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .data import load_dataset, transform_minmax
from .ensemble import EnsembleModel, classify
from .explain import (
    ExplainError,
    counterfactual_to_json_dict,
    generate_counterfactual,
    shapley_attribution,
)
from .nn import forward_batch
from .schema import CaseRecord, Dataset, FeatureSchema

DEFAULT_ATTRIBUTION_SEED = 0
DEFAULT_ATTRIBUTION_SAMPLES = 200


class FieldValidationError(Exception):
    def __init__(self, field: str | None, message: str):
        super().__init__(message)
        self.field = field
        self.message = message


class PredictRequest(BaseModel):
    features: dict
    threshold: float | None = None


class CounterfactualRequest(BaseModel):
    features: dict
    threshold: float | None = None
    max_changes: int | None = None


class AttributionRequest(BaseModel):
    features: dict
    n_samples: int = DEFAULT_ATTRIBUTION_SAMPLES
    seed: int = DEFAULT_ATTRIBUTION_SEED


def encode_features(schema: FeatureSchema, features: dict) -> np.ndarray:
    """Encode a name -> raw value map, reporting the first offending field."""
    known = {f.name for f in schema.features}
    for name in features:
        if name not in known:
            raise FieldValidationError(name, f"unknown feature {name!r}")
    for spec in schema.features:
        if spec.name not in features:
            raise FieldValidationError(spec.name, f"missing feature {spec.name!r}")
        value = features[spec.name]
        if spec.kind == "categorical":
            if value not in spec.levels:
                raise FieldValidationError(
                    spec.name, f"{value!r} is not one of {list(spec.levels)}")
            continue
        try:
            numeric_value = float(value)
        except (TypeError, ValueError):
            raise FieldValidationError(spec.name, f"{value!r} is not a number")
        if not math.isfinite(numeric_value):
            raise FieldValidationError(spec.name, "value must be finite")
        if spec.kind == "binary" and numeric_value not in (0.0, 1.0):
            raise FieldValidationError(spec.name, "binary features take 0 or 1")
    return schema.encode_row(features)


def _check_threshold(threshold: float | None, default: float) -> float:
    if threshold is None:
        return default
    if not (0.0 <= threshold <= 1.0):
        raise FieldValidationError("threshold", "threshold must lie in [0, 1]")
    return float(threshold)


def create_app(ensemble: EnsembleModel, pool: Dataset) -> FastAPI:
    app = FastAPI(title="risk model service")
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"])
    schema = ensemble.schema

    @app.exception_handler(RequestValidationError)
    async def _on_body_error(request: Request, exc: RequestValidationError):
        errors = exc.errors()
        if any(e.get("type") == "json_invalid" for e in errors):
            return JSONResponse(status_code=400, content={
                "code": "malformed_json", "message": "request body is not valid JSON",
                "field": None})
        first = errors[0] if errors else {}
        loc = [str(p) for p in first.get("loc", ()) if p != "body"]
        return JSONResponse(status_code=422, content={
            "code": "validation_error",
            "message": first.get("msg", "invalid request"),
            "field": ".".join(loc) or None})

    @app.exception_handler(FieldValidationError)
    async def _on_field_error(request: Request, exc: FieldValidationError):
        return JSONResponse(status_code=422, content={
            "code": "validation_error", "message": exc.message, "field": exc.field})

    @app.exception_handler(ExplainError)
    async def _on_explain_error(request: Request, exc: ExplainError):
        return JSONResponse(status_code=422, content={
            "code": "explain_error", "message": str(exc), "field": None})

    @app.exception_handler(Exception)
    async def _on_internal_error(request: Request, exc: Exception):
        return JSONResponse(status_code=500, content={
            "code": "internal_error", "message": "internal error",
            "id": uuid.uuid4().hex})

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.get("/schema")
    def get_schema():
        return schema.to_json_dict()

    @app.get("/model")
    def get_model():
        return {
            "backbones": [m.backbone_id for m in ensemble.members],
            "alphas": list(ensemble.alphas),
            "gate": ensemble.gate,
            "decision_threshold": ensemble.decision_threshold,
            "fallback_uniform": ensemble.fallback_uniform,
            "member_metadata": list(ensemble.member_metadata),
            "n_features": schema.n_features,
        }

    def _predict_payload(x: np.ndarray, threshold: float) -> dict:
        probability = ensemble.predict_proba(x)
        scaled = _scaled_row(x)
        member_probs = [float(forward_batch(m, scaled)[0]) for m in ensemble.members]
        return {
            "probability": probability,
            "label": classify(probability, threshold),
            "threshold": threshold,
            "member_probabilities": member_probs,
            "alphas": list(ensemble.alphas),
            "fallback_uniform": ensemble.fallback_uniform,
        }

    def _scaled_row(x: np.ndarray) -> np.ndarray:
        return transform_minmax(ensemble.scaler, x.reshape(1, -1))

    @app.post("/predict")
    def predict(body: PredictRequest):
        x = encode_features(schema, body.features)
        threshold = _check_threshold(body.threshold, ensemble.decision_threshold)
        return _predict_payload(x, threshold)

    @app.post("/counterfactual")
    def counterfactual(body: CounterfactualRequest):
        x = encode_features(schema, body.features)
        threshold = _check_threshold(body.threshold, ensemble.decision_threshold)
        if body.max_changes is not None and body.max_changes < 0:
            raise FieldValidationError("max_changes", "max_changes must be >= 0")
        model = replace(ensemble, decision_threshold=threshold)
        cf = generate_counterfactual(CaseRecord(x=x), model, pool,
                                     body.max_changes)
        doc = counterfactual_to_json_dict(cf, schema)
        doc["original_label"] = classify(cf.original_prob, threshold)
        doc["counterfactual_label"] = classify(cf.counterfactual_prob, threshold)
        doc["threshold"] = threshold
        return doc

    @app.post("/attribution")
    def attribution(body: AttributionRequest):
        x = encode_features(schema, body.features)
        if body.n_samples < 1:
            raise FieldValidationError("n_samples", "n_samples must be >= 1")
        att = shapley_attribution(ensemble, CaseRecord(x=x), pool,
                                  body.n_samples, body.seed)
        return att.to_json_dict()

    return app


def load_service_data(ensemble_path, pool_path) -> tuple[EnsembleModel, Dataset]:
    ensemble = EnsembleModel.load(ensemble_path)
    pool = load_dataset(pool_path, ensemble.schema)
    return ensemble, pool


def serve(ensemble_path, pool_path, host: str = "127.0.0.1",
          port: int = 8000) -> None:
    import uvicorn

    ensemble, pool = load_service_data(ensemble_path, pool_path)
    uvicorn.run(create_app(ensemble, pool), host=host, port=port)
