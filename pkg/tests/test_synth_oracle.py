import numpy as np
import pytest

from kaeval.dataset import align
from kaeval.errors import ValidationError
from kaeval.kernel import encode_labels, evaluate_dataset, ka_curve
from kaeval.synth import SynthSpec, generate, oracle_curve, oracle_min_curve

from conftest import instance_battery, make_cluster_ad


class TestGenerate:
    def test_onehot_distinct_rows(self):
        fs, lf = generate(SynthSpec(kind="onehot", k=7, n_per_class=70, p=7))
        assert fs.features.shape == (490, 7)
        assert len({tuple(row) for row in fs.features}) == 7

    def test_clusters_zero_noise_collapse_to_points(self):
        """noise 0 reduces clusters to k distinct points (onehot-like)."""
        fs, _ = generate(SynthSpec(kind="clusters", k=4, n_per_class=5, p=3,
                                   noise=0.0, seed=2))
        assert len({tuple(row) for row in fs.features}) == 4

    def test_noise_kind_near_chance(self):
        """Label-independent features score near 0.5."""
        aucs = []
        for seed in range(3):
            fs, lf = generate(SynthSpec(kind="noise", k=5, n_per_class=40, p=24,
                                        seed=seed))
            aucs.append(evaluate_dataset(align(fs, lf)).auc)
        assert abs(np.mean(aucs) - 0.5) < 0.08

    def test_deterministic_per_seed(self):
        a, _ = generate(SynthSpec(kind="clusters", k=3, n_per_class=4, p=5,
                                  noise=0.5, seed=42))
        b, _ = generate(SynthSpec(kind="clusters", k=3, n_per_class=4, p=5,
                                  noise=0.5, seed=42))
        assert np.array_equal(a.features, b.features)

    def test_onehot_requires_enough_columns(self):
        with pytest.raises(ValidationError, match="p >= k"):
            SynthSpec(kind="onehot", k=5, n_per_class=3, p=3)

    def test_invalid_kind(self):
        with pytest.raises(ValidationError, match="kind"):
            SynthSpec(kind="spirals", k=3, n_per_class=3, p=3)

    def test_centroids_on_separation_sphere(self):
        fs, _ = generate(SynthSpec(kind="clusters", k=6, n_per_class=2, p=9,
                                   noise=0.0, separation=2.5, seed=3))
        radii = np.linalg.norm(np.unique(fs.features, axis=0), axis=1)
        np.testing.assert_allclose(radii, 2.5, rtol=1e-12)


class TestOracleCurve:
    def test_full_dimension_reaches_zero(self):
        ad = make_cluster_ad(k=3, n_per_class=8, seed=50)
        from kaeval.dataset import FeatureSet
        fs = FeatureSet(image_ids=ad.image_ids, features=ad.features)
        labels = encode_labels(ad)
        losses = oracle_curve(fs, labels, 1.0)
        assert losses[-1] <= 1e-10

    def test_onehot_zero_beyond_k(self):
        fs, lf = generate(SynthSpec(kind="onehot", k=4, n_per_class=6, p=4))
        ad = align(fs, lf)
        labels = encode_labels(ad)
        losses = oracle_curve(fs, labels, 1.0)
        assert np.all(losses[4:] <= 1e-10)

    def test_agrees_with_incremental_pipeline(self):
        """The independently coded reference matches the production path to
        1e-10 across a varied battery (this op is itself the oracle)."""
        worst = 0.0
        for ad in instance_battery(12, seed=3, max_n=120):
            labels = encode_labels(ad)
            curve = ka_curve(ad, labels)
            from kaeval.dataset import FeatureSet
            fs = FeatureSet(image_ids=ad.image_ids, features=ad.features)
            reference = oracle_min_curve(fs, labels, curve.sigmas)
            worst = max(worst, float(np.abs(curve.loss - reference).max()))
        assert worst <= 1e-10

    def test_size_guard(self):
        ad = make_cluster_ad(k=2, n_per_class=300, p=2, seed=51)
        from kaeval.dataset import FeatureSet
        fs = FeatureSet(image_ids=ad.image_ids, features=ad.features)
        with pytest.raises(ValidationError, match="n <= 500"):
            oracle_curve(fs, encode_labels(ad), 1.0)


class TestGradedFamilies:
    def test_noise_orders_difficulty(self):
        """Cluster families with growing within-class noise score lower."""
        aucs = [
            evaluate_dataset(make_cluster_ad(k=5, n_per_class=16, p=10, noise=noise,
                                             seed=60)).auc
            for noise in (0.1, 0.5, 1.5)
        ]
        assert aucs[0] > aucs[1] > aucs[2]
