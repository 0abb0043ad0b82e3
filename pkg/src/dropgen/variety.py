"""Output-variety measurement: euclidean distances between clean and
dropout-noised generator outputs, the std-based variety metric, and the
full experiment matrix over (training p) x (generation p) grids."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .data_io import write_csv_table
from .models import GenerationConfig, generate
from .tensor import Tensor

DEFAULT_P_GRID = (0.0, 0.2, 0.4, 0.6, 0.8)


def euclidean_distance(a: np.ndarray, b: np.ndarray) -> float:
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.linalg.norm((a - b).ravel().astype(np.float64)))


@dataclass
class VarietyCell:
    p_train: float
    p_dropout: float
    p_scale: float
    placement: str
    std: float                       # std over all N*R distances (primary metric)
    mean: float
    sample_count: int
    std_of_repeat_sums: float        # alternative reading: std over the R sums
    distances: np.ndarray | None = None  # [R, N]

    def to_dict(self) -> dict:
        return {
            "p_train": self.p_train, "p_dropout": self.p_dropout,
            "p_scale": self.p_scale, "placement": self.placement,
            "std": self.std, "mean": self.mean,
            "sample_count": self.sample_count,
            "std_of_repeat_sums": self.std_of_repeat_sums,
        }


def distance_matrix(gen, latent_dim: int, cfg: GenerationConfig,
                    n: int, r: int, seed) -> np.ndarray:
    """Distances d(g(z_i), g'(z_i)) for N latents x R repeats -> [R, N].

    The N latents are drawn once and reused across all repeats; each repeat
    owns its own mask substream.
    """
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    z_ss, *mask_ss = ss.spawn(r + 1)
    z = Tensor(np.random.default_rng(z_ss)
               .standard_normal((n, latent_dim)).astype(np.float32))
    clean_cfg = GenerationConfig(0.0, 0.0, cfg.placement)
    base = generate(gen, z, clean_cfg).data.reshape(n, -1).astype(np.float64)
    dist = np.empty((r, n), dtype=np.float64)
    if cfg.is_noiseless:
        # g' degenerates to g: one honest pass, identical across repeats
        noised = generate(gen, z, cfg).data.reshape(n, -1).astype(np.float64)
        diff = noised - base
        dist[:] = np.sqrt((diff * diff).sum(axis=1))[None, :]
        return dist
    for j in range(r):
        noised = generate(gen, z, cfg, np.random.default_rng(mask_ss[j])).data
        diff = noised.reshape(n, -1).astype(np.float64) - base
        dist[j] = np.sqrt((diff * diff).sum(axis=1))
    return dist


def variety_from_distances(distances: np.ndarray) -> tuple[float, float, float]:
    """(std over all distances, mean, std over per-repeat sums)."""
    return (float(np.std(distances)), float(np.mean(distances)),
            float(np.std(distances.sum(axis=1))))


def variety_std(gen, latent_dim: int, p_train: float, cfg: GenerationConfig,
                n: int, r: int, seed, keep_distances: bool = True) -> VarietyCell:
    if not cfg.is_noiseless and n * r < 2:
        raise ValueError("need N*R >= 2 when p_dropout > 0")
    dist = distance_matrix(gen, latent_dim, cfg, n, r, seed)
    std, mean, std_sums = variety_from_distances(dist)
    return VarietyCell(
        p_train=p_train, p_dropout=cfg.p_dropout, p_scale=cfg.p_scale,
        placement=cfg.placement, std=std, mean=mean, sample_count=n * r,
        std_of_repeat_sums=std_sums,
        distances=dist if keep_distances else None,
    )


# -- the experiment matrix ------------------------------------------------


@dataclass(frozen=True)
class ExperimentMatrix:
    train_grid: tuple = DEFAULT_P_GRID
    generation_grid: tuple = DEFAULT_P_GRID
    scaling: str = "matched"          # "matched" (p_scale = p_dropout) | "none"
    placement: str = "all-hidden"
    n_latents: int = 100
    repeats: int = 10
    master_seed: int = 0

    def __post_init__(self):
        if self.scaling not in ("matched", "none"):
            raise ValueError(f"unknown scaling mode {self.scaling!r}")
        if not self.train_grid or not self.generation_grid:
            raise ValueError("empty grid")
        if self.n_latents < 1 or self.repeats < 1:
            raise ValueError("N and R must be >= 1")

    def cell_config(self, p_gen: float) -> GenerationConfig:
        p_scale = p_gen if self.scaling == "matched" else 0.0
        return GenerationConfig(p_gen, p_scale, self.placement)

    def cell_seed(self, i_train: int, i_gen: int) -> np.random.SeedSequence:
        scaling_code = 0 if self.scaling == "matched" else 1
        placement_code = 0 if self.placement == "all-hidden" else 1
        return np.random.SeedSequence(
            [self.master_seed, i_train, i_gen, placement_code, scaling_code])


class MissingModelError(KeyError):
    pass


@dataclass
class VarietyReport:
    matrix: ExperimentMatrix
    cells: dict = field(default_factory=dict)   # (p_train, p_gen) -> VarietyCell
    metadata: dict = field(default_factory=dict)

    def cell(self, p_train: float, p_gen: float) -> VarietyCell:
        return self.cells[(p_train, p_gen)]

    def table(self, attr: str = "std") -> np.ndarray:
        """Rows = generation p, columns = training p (the papers' layout)."""
        return np.array([[getattr(self.cell(pt, pg), attr)
                          for pt in self.matrix.train_grid]
                         for pg in self.matrix.generation_grid])

    def to_dict(self) -> dict:
        return {
            "matrix": {
                "train_grid": list(self.matrix.train_grid),
                "generation_grid": list(self.matrix.generation_grid),
                "scaling": self.matrix.scaling,
                "placement": self.matrix.placement,
                "n_latents": self.matrix.n_latents,
                "repeats": self.matrix.repeats,
                "master_seed": self.matrix.master_seed,
            },
            "metadata": self.metadata,
            "cells": [c.to_dict() for c in self.cells.values()],
        }

    def save(self, out_dir):
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.json").write_text(
            json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n")
        write_csv_table(self.matrix.generation_grid, self.matrix.train_grid,
                        self.table("std"), out_dir / "table.csv")
        write_csv_table(self.matrix.generation_grid, self.matrix.train_grid,
                        self.table("std_of_repeat_sums"), out_dir / "table_repeat_sums.csv")
        raw_dir = out_dir / "raw"
        raw_dir.mkdir(exist_ok=True)
        for (pt, pg), cell in self.cells.items():
            if cell.distances is not None:
                np.save(raw_dir / f"distances_train{pt}_gen{pg}.npy", cell.distances)


def run_matrix(matrix: ExperimentMatrix, models: dict, out_dir=None,
               metadata: dict | None = None) -> VarietyReport:
    """Evaluate every grid cell. `models` maps training p -> (generator stack,
    latent_dim). Raises MissingModelError naming the first absent cell."""
    report = VarietyReport(matrix, metadata=dict(metadata or {}))
    for i_t, p_train in enumerate(matrix.train_grid):
        if p_train not in models:
            raise MissingModelError(
                f"no model for training p={p_train} (needed by column {i_t})")
    for i_t, p_train in enumerate(matrix.train_grid):
        gen, latent_dim = models[p_train]
        for i_g, p_gen in enumerate(matrix.generation_grid):
            cell = variety_std(gen, latent_dim, p_train, matrix.cell_config(p_gen),
                               matrix.n_latents, matrix.repeats,
                               matrix.cell_seed(i_t, i_g))
            report.cells[(p_train, p_gen)] = cell
    if out_dir is not None:
        report.save(out_dir)
    return report


# -- placement comparison -------------------------------------------------


def compare_placements(report_all: VarietyReport, report_first: VarietyReport,
                       alpha: float = 0.05) -> dict:
    """Per-cell std deltas plus a two-sample dispersion (Levene) verdict."""
    ma, mf = report_all.matrix, report_first.matrix
    if (ma.train_grid, ma.generation_grid) != (mf.train_grid, mf.generation_grid):
        raise ValueError("reports cover different grids")
    cells = []
    n_significant = 0
    for pt in ma.train_grid:
        for pg in ma.generation_grid:
            ca, cf = report_all.cell(pt, pg), report_first.cell(pt, pg)
            entry = {"p_train": pt, "p_generation": pg,
                     "std_all": ca.std, "std_first": cf.std,
                     "delta": cf.std - ca.std}
            if ca.distances is None or cf.distances is None:
                entry["verdict"] = "no-raw-data"
            else:
                da, df = ca.distances.ravel(), cf.distances.ravel()
                if np.array_equal(da, df) or (np.std(da) == 0 and np.std(df) == 0):
                    entry["p_value"] = 1.0
                    entry["verdict"] = "no-significant-difference"
                else:
                    _, p = stats.levene(da, df)
                    entry["p_value"] = float(p)
                    entry["verdict"] = ("significant" if p < alpha
                                        else "no-significant-difference")
            if entry["verdict"] == "significant":
                n_significant += 1
            cells.append(entry)
    return {"alpha": alpha, "cells": cells, "n_cells": len(cells),
            "n_significant": n_significant}
