"""Scene-context object prediction for 3D indoor scenes.

Builds dense typed relationship graphs over boxed scene objects, runs
attention-weighted iterative message passing over them, and predicts which
object category (and box size) fits a query location. Includes a procedural
scene generator, training/evaluation/ablation harnesses, greedy scene
synthesis, a CLI and an HTTP service.
"""

import os as _os

# The model's matrices are small enough that BLAS threading costs more than
# it saves; respect any value the caller already set.
_os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
_os.environ.setdefault("OMP_NUM_THREADS", "1")

from .scene import CategoryVocab, Scene, SceneObject, load_scene, save_scene
from .relations import RelationType, SceneGraph, build_graph, insert_query_node
from .model import ModelConfig, PredictionResult, forward, init_params

__all__ = [
    "CategoryVocab",
    "Scene",
    "SceneObject",
    "load_scene",
    "save_scene",
    "RelationType",
    "SceneGraph",
    "build_graph",
    "insert_query_node",
    "ModelConfig",
    "PredictionResult",
    "forward",
    "init_params",
]

__version__ = "0.1.0"
