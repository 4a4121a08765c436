"""Stateless HTTP service for prediction, heatmaps and synthesis steps.

Scenes travel in request bodies; the server holds only the immutable
checkpoint. Responses are rendered with sorted keys so identical requests
produce byte-identical bytes.

Status codes: 400 malformed scene/query, 404 unknown surface, 409 vocabulary
hash mismatch with the loaded checkpoint, 422 query outside the scene bounds.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, Request, Response

from .model import ModelConfig, forward, load_checkpoint
from .relations import build_graph, insert_query_node
from .scene import Scene, SceneError, scene_from_dict, scene_to_dict
from .synthesis import SynthesisError, eval_grid, synth_step


@dataclass
class ServiceState:
    params: dict
    config: ModelConfig
    vocab_hash: str
    checkpoint_path: str | None = None
    counters: dict = field(default_factory=dict)

    def bump(self, endpoint: str) -> None:
        self.counters[endpoint] = self.counters.get(endpoint, 0) + 1


class _ApiError(Exception):
    def __init__(self, status: int, message: str):
        self.status = status
        self.message = message


def _json_response(payload, status: int = 200) -> Response:
    return Response(
        content=json.dumps(payload, sort_keys=True) + "\n",
        status_code=status,
        media_type="application/json",
    )


async def _read_body(request: Request) -> dict:
    try:
        body = json.loads(await request.body())
    except (json.JSONDecodeError, UnicodeDecodeError):
        raise _ApiError(400, "request body is not valid JSON")
    if not isinstance(body, dict):
        raise _ApiError(400, "request body must be a JSON object")
    return body


def _parse_scene(state: ServiceState, body: dict) -> Scene:
    if "scene" not in body:
        raise _ApiError(400, "missing field 'scene'")
    try:
        scene = scene_from_dict(body["scene"])
    except SceneError as e:
        raise _ApiError(400, f"invalid scene: {e}")
    if scene.vocab.hash() != state.vocab_hash:
        raise _ApiError(409, "scene vocabulary does not match the loaded checkpoint")
    return scene


def _parse_query(body: dict) -> tuple[float, float, float]:
    q = body.get("query")
    if not isinstance(q, list) or len(q) != 3:
        raise _ApiError(400, "field 'query' must be [x, y, z]")
    try:
        x, y, z = (float(v) for v in q)
    except (TypeError, ValueError):
        raise _ApiError(400, "field 'query' must contain numbers")
    if not all(np.isfinite(v) for v in (x, y, z)):
        raise _ApiError(400, "field 'query' must be finite")
    return (x, y, z)


def _surface_and_resolution(scene: Scene, body: dict) -> tuple[str, float]:
    surface = body.get("surface", "floor")
    if not isinstance(surface, str):
        raise _ApiError(400, "field 'surface' must be a string")
    if surface != "floor" and all(o.id != surface for o in scene.objects):
        raise _ApiError(404, f"unknown surface {surface!r}")
    resolution = body.get("resolution", 4.0)
    try:
        resolution = float(resolution)
    except (TypeError, ValueError):
        raise _ApiError(400, "field 'resolution' must be a number")
    if resolution <= 0:
        raise _ApiError(400, "field 'resolution' must be positive")
    return surface, resolution


def create_app(state: ServiceState) -> FastAPI:
    app = FastAPI(title="sgnet service", docs_url=None, redoc_url=None)

    @app.exception_handler(_ApiError)
    async def handle_api_error(_request, exc: _ApiError):
        return _json_response({"error": exc.message}, status=exc.status)

    @app.get("/v1/health")
    async def health():
        return _json_response({
            "status": "ok",
            "checkpoint": state.checkpoint_path,
            "variant": state.config.variant,
            "category_count": state.config.category_count,
            "iterations": state.config.iterations,
            "vocab_hash": state.vocab_hash,
            "requests": dict(sorted(state.counters.items())),
        })

    @app.post("/v1/predict")
    async def predict(request: Request):
        state.bump("predict")
        body = await _read_body(request)
        scene = _parse_scene(state, body)
        query = _parse_query(body)
        if not scene.contains_point(query[0], query[1]):
            raise _ApiError(422, "query outside the scene bounds")
        graph = insert_query_node(build_graph(scene), query)
        result = forward(graph, state.params, state.config)
        return _json_response({
            "categories": list(scene.vocab.names),
            "probs": [float(p) for p in result.probs],
            "size": [float(s) for s in result.size],
        })

    @app.post("/v1/heatmap")
    async def heatmap(request: Request):
        state.bump("heatmap")
        body = await _read_body(request)
        scene = _parse_scene(state, body)
        surface, resolution = _surface_and_resolution(scene, body)
        try:
            grid = eval_grid(scene, state.params, state.config, surface, resolution)
        except SynthesisError as e:
            raise _ApiError(400, str(e))
        payload = grid.to_dict()
        payload["categories"] = list(scene.vocab.names)
        return _json_response(payload)

    @app.post("/v1/synthesize/step")
    async def synthesize_step(request: Request):
        state.bump("synthesize_step")
        body = await _read_body(request)
        scene = _parse_scene(state, body)
        surface, resolution = _surface_and_resolution(scene, body)
        threshold = body.get("stop_threshold")
        if threshold is not None:
            try:
                threshold = float(threshold)
            except (TypeError, ValueError):
                raise _ApiError(400, "field 'stop_threshold' must be a number")
        try:
            step, updated = synth_step(
                scene, state.params, state.config, surface, resolution, threshold
            )
        except SynthesisError as e:
            raise _ApiError(409, f"synthesis failed: {e}")
        return _json_response({
            "step": step.to_dict(),
            "scene": scene_to_dict(updated),
        })

    return app


def load_service_state(checkpoint_path: str) -> ServiceState:
    params, config, vocab_hash = load_checkpoint(checkpoint_path)
    return ServiceState(
        params=params, config=config, vocab_hash=vocab_hash,
        checkpoint_path=str(checkpoint_path),
    )
