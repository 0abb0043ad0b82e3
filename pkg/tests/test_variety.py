import numpy as np
import pytest

from dropgen.layers import Dropout, DropoutSpec
from dropgen.models import GenerationConfig, build_generator
from dropgen.tensor import Tensor
from dropgen.variety import (ExperimentMatrix, MissingModelError, VarietyCell,
                             VarietyReport, compare_placements,
                             euclidean_distance, run_matrix, variety_from_distances,
                             variety_std)

from test_models import small_gen_spec


class TestEuclideanDistance:
    def test_self_distance_zero(self):
        x = np.random.default_rng(0).normal(size=(1, 4, 4))
        assert euclidean_distance(x, x) == 0.0

    def test_3_4_5_triangle(self):
        assert euclidean_distance(np.array([0.0, 0.0]), np.array([3.0, 4.0])) == 5.0

    def test_max_distance_bound_28x28(self):
        a = np.full((1, 28, 28), -1.0)
        b = np.full((1, 28, 28), 1.0)
        assert euclidean_distance(a, b) == pytest.approx(np.sqrt(784 * 4))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            euclidean_distance(np.zeros(3), np.zeros(4))


class TwoOutcomeStub:
    """Emits image A when the single tracked mask bit survives, B otherwise."""

    def __init__(self, img_a, img_b):
        self.a, self.b = img_a, img_b
        self._drop = [Dropout(DropoutSpec())]

    def dropout_layers(self):
        return self._drop

    def forward(self, z, phase, rng=None, dropout_overrides=None):
        n = z.shape[0]
        ov = (dropout_overrides or {}).get(0)
        if phase == "generation" or not isinstance(ov, DropoutSpec):
            return Tensor(np.broadcast_to(self.a, (n,) + self.a.shape).copy())
        spec = ov
        keep = rng.random(n) >= spec.p_dropout
        out = np.where(keep[:, None, None, None], self.a, self.b)
        return Tensor(out)


class TestVarietyStd:
    def test_zero_dropout_gives_exactly_zero(self):
        spec = small_gen_spec()
        gen = build_generator(spec, np.random.default_rng(0))
        cell = variety_std(gen, spec.latent_dim, 0.0, GenerationConfig(),
                           n=5, r=3, seed=1)
        assert cell.std == 0.0 and cell.mean == 0.0

    def test_two_outcome_stub_matches_closed_form(self):
        p = 0.3
        a = np.zeros((1, 4, 4))
        b = np.ones((1, 4, 4))
        d_ab = euclidean_distance(a, b)
        stub = TwoOutcomeStub(a, b)
        n, r = 200, 50
        cell = variety_std(stub, 4, 0.0, GenerationConfig(p, p), n, r, seed=7)
        expected_std = d_ab * np.sqrt(p * (1 - p))
        # 3-standard-error Monte Carlo tolerance via the delta method
        mu = p * d_ab
        m2 = (1 - p) * mu**2 + p * (d_ab - mu)**2
        m4 = (1 - p) * mu**4 + p * (d_ab - mu)**4
        se = np.sqrt((m4 - m2**2) / (n * r)) / (2 * expected_std)
        assert abs(cell.std - expected_std) <= 3 * se

    def test_brute_force_recomputation_from_distances(self):
        spec = small_gen_spec(p_train=0.2)
        gen = build_generator(spec, np.random.default_rng(2))
        cell = variety_std(gen, spec.latent_dim, 0.2, GenerationConfig(0.5, 0.5),
                           n=2, r=3, seed=9)
        assert cell.distances.shape == (3, 2)
        brute = float(np.sqrt(np.mean(
            (cell.distances - cell.distances.mean()) ** 2)))
        assert cell.std == pytest.approx(brute, rel=1e-12)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(3)
        d = rng.uniform(0, 5, (4, 6))
        base = variety_from_distances(d)
        shuffled = d[rng.permutation(4)][:, rng.permutation(6)]
        perm = variety_from_distances(shuffled)
        assert base[0] == pytest.approx(perm[0], rel=1e-12)

    def test_nr_too_small_rejected(self):
        gen = build_generator(small_gen_spec(), np.random.default_rng(4))
        with pytest.raises(ValueError, match="N\\*R"):
            variety_std(gen, 6, 0.0, GenerationConfig(0.5, 0.5), n=1, r=1, seed=0)


def _small_models(seed=0):
    models = {}
    for p in (0.0, 0.4):
        spec = small_gen_spec(p_train=p)
        models[p] = (build_generator(spec, np.random.default_rng(seed + int(p * 10))),
                     spec.latent_dim)
    return models


def _small_matrix(**kw):
    defaults = dict(train_grid=(0.0, 0.4), generation_grid=(0.0, 0.4),
                    n_latents=4, repeats=3, master_seed=5)
    defaults.update(kw)
    return ExperimentMatrix(**defaults)


class TestRunMatrix:
    def test_zero_generation_row_is_all_zero(self):
        report = run_matrix(_small_matrix(), _small_models())
        row0 = report.table()[0]
        np.testing.assert_array_equal(row0, 0.0)

    def test_missing_model_names_cell(self):
        models = _small_models()
        del models[0.4]
        with pytest.raises(MissingModelError, match="0.4"):
            run_matrix(_small_matrix(), models)

    def test_fixed_seed_bit_identical_report(self, tmp_path):
        models = _small_models()
        a = run_matrix(_small_matrix(), models, out_dir=tmp_path / "a")
        b = run_matrix(_small_matrix(), models, out_dir=tmp_path / "b")
        assert (tmp_path / "a" / "table.csv").read_bytes() == \
               (tmp_path / "b" / "table.csv").read_bytes()
        assert (tmp_path / "a" / "report.json").read_bytes() == \
               (tmp_path / "b" / "report.json").read_bytes()

    def test_persisted_raw_distances_match_cells(self, tmp_path):
        report = run_matrix(_small_matrix(), _small_models(), out_dir=tmp_path)
        raw = np.load(tmp_path / "raw" / "distances_train0.4_gen0.4.npy")
        np.testing.assert_array_equal(raw, report.cell(0.4, 0.4).distances)

    def test_invalid_scaling_rejected(self):
        with pytest.raises(ValueError, match="scaling"):
            _small_matrix(scaling="double")


class TestComparePlacements:
    def _report_with(self, distances_by_cell, placement="all-hidden"):
        matrix = _small_matrix(placement=placement)
        report = VarietyReport(matrix)
        for pt in matrix.train_grid:
            for pg in matrix.generation_grid:
                d = distances_by_cell(pt, pg)
                std, mean, ss = (float(np.std(d)), float(np.mean(d)),
                                 float(np.std(d.sum(axis=1))))
                report.cells[(pt, pg)] = VarietyCell(
                    pt, pg, pg, placement, std, mean, d.size, ss, d)
        return report

    def test_identical_reports_all_deltas_zero(self):
        rng = np.random.default_rng(0)
        fixed = {(pt, pg): rng.uniform(0, 3, (3, 4))
                 for pt in (0.0, 0.4) for pg in (0.0, 0.4)}
        ra = self._report_with(lambda pt, pg: fixed[(pt, pg)])
        rf = self._report_with(lambda pt, pg: fixed[(pt, pg)], "first-hidden-only")
        result = compare_placements(ra, rf)
        assert all(c["delta"] == 0.0 for c in result["cells"])
        assert result["n_significant"] == 0

    def test_disjoint_dispersions_significant(self):
        rng = np.random.default_rng(1)
        ra = self._report_with(lambda pt, pg: rng.normal(10, 0.01, (5, 40)))
        rf = self._report_with(lambda pt, pg: rng.normal(10, 5.0, (5, 40)),
                               "first-hidden-only")
        result = compare_placements(ra, rf)
        assert result["n_significant"] == result["n_cells"]

    def test_grid_mismatch_rejected(self):
        ra = self._report_with(lambda pt, pg: np.ones((2, 2)))
        rb = VarietyReport(_small_matrix(train_grid=(0.0,)))
        with pytest.raises(ValueError, match="grids"):
            compare_placements(ra, rb)
