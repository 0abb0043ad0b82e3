"""Local HTTP API for interactive dropout-noised generation.

Endpoints:
  GET  /health    liveness + loaded-model count (responds even mid-load)
  GET  /models    stable-ordered model metadata
  POST /generate  K variants for one latent; variant 0 is always the clean
                  baseline, variants 1..K-1 use generation-noise dropout
                  with per-variant mask seeds. Fully replayable from the
                  returned seeds.
"""

from __future__ import annotations

import base64
import secrets
import threading
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from .data_io import encode_png_gray, load_checkpoint, quantize_pixels
from .models import GenerationConfig, generate
from .tensor import Tensor
from .training import generator_from_checkpoint

MAX_VARIANTS = 64

_PLACEMENTS = {"all": "all-hidden", "first": "first-hidden-only"}


class ModelEntry:
    def __init__(self, model_id: str, checkpoint):
        self.model_id = model_id
        self.checkpoint = checkpoint
        self.generator, self.spec = generator_from_checkpoint(checkpoint)
        self.lock = threading.Lock()   # forward passes share no state, but
                                       # keep one graph per thread anyway

    @property
    def metadata(self) -> dict:
        cfg = self.checkpoint.train_config
        return {
            "model_id": self.model_id,
            "p_train": cfg["p_train"],
            "epochs": cfg["epochs"],
            "seed": self.checkpoint.seed,
            "latent_dim": self.spec.latent_dim,
            "image_hw": self.spec.image_hw,
        }


class ModelRegistry:
    """Read-only after load; /health may be probed while loading."""

    def __init__(self):
        self._models: dict[str, ModelEntry] = {}
        self.ready = threading.Event()

    def add(self, model_id: str, checkpoint):
        if model_id in self._models:
            raise ValueError(f"duplicate model id {model_id!r}")
        self._models[model_id] = ModelEntry(model_id, checkpoint)

    def load_dir(self, models_dir):
        for path in sorted(Path(models_dir).glob("*.ckpt")):
            self.add(path.stem, load_checkpoint(path))
        self.ready.set()

    def load_dir_async(self, models_dir) -> threading.Thread:
        t = threading.Thread(target=self.load_dir, args=(models_dir,), daemon=True)
        t.start()
        return t

    def finish(self):
        self.ready.set()

    def get(self, model_id: str) -> ModelEntry | None:
        return self._models.get(model_id)

    def list(self) -> list[dict]:
        return [self._models[k].metadata for k in sorted(self._models)]

    def __len__(self):
        return len(self._models)


class GenerateRequest(BaseModel):
    model_id: str
    seed: int | None = None
    p_dropout: float = Field(0.0, ge=0.0, lt=1.0)
    p_scale: float = Field(0.0, ge=0.0, lt=1.0)
    placement: str = Field("all", pattern="^(all|first)$")
    variant_count: int = Field(9, ge=1, le=MAX_VARIANTS)


def _render_variants(entry: ModelEntry, req: GenerateRequest, seed: int) -> dict:
    gen = entry.generator
    latent_dim = entry.spec.latent_dim
    z = Tensor(np.random.default_rng(np.random.SeedSequence([seed, 0]))
               .standard_normal((1, latent_dim)).astype(np.float32))
    placement = _PLACEMENTS[req.placement]
    with entry.lock:
        baseline = generate(gen, z, GenerationConfig(0.0, 0.0, placement)).data
        variants = [{"index": 0, "mask_seed": None,
                     "png_base64": _to_png_b64(baseline)}]
        cfg = GenerationConfig(req.p_dropout, req.p_scale, placement)
        for i in range(1, req.variant_count):
            if cfg.is_noiseless:
                img = baseline
                mask_seed = None
            else:
                mask_seed = i
                rng = np.random.default_rng(np.random.SeedSequence([seed, mask_seed]))
                img = generate(gen, z, cfg, rng).data
            variants.append({"index": i, "mask_seed": mask_seed,
                             "png_base64": _to_png_b64(img)})
    return {
        "model_id": req.model_id,
        "seed": seed,
        "p_dropout": req.p_dropout,
        "p_scale": req.p_scale,
        "placement": req.placement,
        "variants": variants,
    }


def _to_png_b64(images: np.ndarray) -> str:
    return base64.b64encode(encode_png_gray(quantize_pixels(images[0, 0]))).decode()


def create_app(models_dir=None, registry: ModelRegistry | None = None,
               load_async: bool = False) -> FastAPI:
    app = FastAPI(title="dropgen")
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])
    reg = registry if registry is not None else ModelRegistry()
    app.state.registry = reg

    if models_dir is not None:
        if load_async:
            reg.load_dir_async(models_dir)
        else:
            reg.load_dir(models_dir)
    elif registry is None:
        reg.finish()

    @app.get("/health")
    def health():
        return {"status": "ok", "models_loaded": len(reg),
                "ready": reg.ready.is_set()}

    @app.get("/models")
    def models():
        return reg.list()

    @app.post("/generate")
    def generate_variants(req: GenerateRequest):
        if not reg.ready.wait(timeout=120):
            raise HTTPException(503, "model registry still loading")
        entry = reg.get(req.model_id)
        if entry is None:
            raise HTTPException(404, f"unknown model {req.model_id!r}")
        seed = req.seed if req.seed is not None else secrets.randbits(48)
        return _render_variants(entry, req, seed)

    return app
