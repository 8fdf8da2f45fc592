import json

import numpy as np
import pytest

from kaeval.dataset import Variation
from kaeval.errors import ValidationError
from kaeval.protocol import compare, make_subsets, merge_reports, run_protocol

from conftest import make_cluster_ad, make_noise_ad, make_onehot_ad


class TestMakeSubsets:
    def test_benchmark_scale_arithmetic(self):
        """490 images, 7 classes of 70, fraction 0.8: 56 per class, 392 total."""
        ad = make_onehot_ad(k=7, n_per_class=70)
        spec = make_subsets(ad, n_subsets=10, fraction=0.8, seed=1)
        labels = np.asarray(ad.labels)
        for subset in spec.subsets:
            assert len(subset) == 392
            counts = {}
            for i in subset:
                counts[labels[i]] = counts.get(labels[i], 0) + 1
            assert set(counts.values()) == {56}

    def test_same_seed_identical(self):
        ad = make_cluster_ad(k=3, n_per_class=20, seed=2)
        a = make_subsets(ad, n_subsets=4, fraction=0.75, seed=9)
        b = make_subsets(ad, n_subsets=4, fraction=0.75, seed=9)
        assert a.subsets == b.subsets

    def test_different_seed_differs(self):
        ad = make_cluster_ad(k=3, n_per_class=20, seed=2)
        a = make_subsets(ad, n_subsets=1, fraction=0.5, seed=0)
        b = make_subsets(ad, n_subsets=1, fraction=0.5, seed=1)
        assert a.subsets != b.subsets

    def test_subsets_independent_of_count(self):
        """Each subset is keyed by its index, so requesting more subsets
        never changes earlier ones."""
        ad = make_cluster_ad(k=3, n_per_class=20, seed=2)
        a = make_subsets(ad, n_subsets=3, fraction=0.8, seed=5)
        b = make_subsets(ad, n_subsets=10, fraction=0.8, seed=5)
        assert a.subsets == b.subsets[:3]

    def test_full_fraction_balanced_is_everything(self):
        ad = make_cluster_ad(k=4, n_per_class=10, seed=3)
        spec = make_subsets(ad, n_subsets=1, fraction=1.0, seed=0)
        assert list(spec.subsets[0]) == list(range(ad.n))

    def test_full_fraction_unbalanced_equalizes_to_smallest(self):
        from kaeval.dataset import LabelFrame
        lf = LabelFrame(image_ids=tuple(f"i{j}" for j in range(10)),
                        classes=("a",) * 6 + ("b",) * 4)
        spec = make_subsets(lf, n_subsets=1, fraction=1.0, seed=0)
        assert len(spec.subsets[0]) == 8  # 4 per class

    def test_empty_class_after_truncation(self):
        from kaeval.dataset import LabelFrame
        lf = LabelFrame(image_ids=tuple(f"i{j}" for j in range(6)),
                        classes=("a",) * 4 + ("b",) * 2)
        with pytest.raises(ValidationError, match="empty class"):
            make_subsets(lf, n_subsets=1, fraction=0.3, seed=0)


class TestRunProtocol:
    def test_onehot_high_auc_tiny_std(self):
        """One-hot: AUC >= 0.98 per the analytic bound 1 - k/D, std <= 1e-3."""
        ad = make_onehot_ad(k=7, n_per_class=70)
        spec = make_subsets(ad, n_subsets=10, fraction=0.8, seed=4)
        report = run_protocol(ad, spec)
        res = report.level("Unspecified")
        assert res.auc_mean >= 0.98
        assert res.auc_std <= 1e-3

    def test_single_subset_degenerate_stats(self):
        ad = make_cluster_ad(k=3, n_per_class=12, seed=5)
        spec = make_subsets(ad, n_subsets=1, fraction=0.8, seed=4)
        res = run_protocol(ad, spec).level("Unspecified")
        assert res.auc_std == 0.0
        np.testing.assert_array_equal(res.envelope_min, res.envelope_max)

    def test_envelope_brackets_mean(self):
        ad = make_cluster_ad(k=4, n_per_class=12, noise=0.8, seed=6)
        spec = make_subsets(ad, n_subsets=5, fraction=0.8, seed=4)
        res = run_protocol(ad, spec).level("Unspecified")
        assert np.all(res.envelope_min <= res.envelope_mean + 1e-12)
        assert np.all(res.envelope_mean <= res.envelope_max + 1e-12)

    def test_worker_count_does_not_change_output(self):
        ad = make_cluster_ad(k=3, n_per_class=14, noise=0.6, seed=7)
        spec = make_subsets(ad, n_subsets=4, fraction=0.8, seed=4)
        a = run_protocol(ad, spec, workers=1)
        b = run_protocol(ad, spec, workers=3)
        assert a.to_json() == b.to_json()

    def test_byte_identical_json(self):
        ad = make_cluster_ad(k=3, n_per_class=14, noise=0.6, seed=8,
                             variation=Variation.MEDIUM)
        spec = make_subsets(ad, n_subsets=3, fraction=0.8, seed=4)
        a = run_protocol(ad, spec).to_json().encode()
        b = run_protocol(ad, spec).to_json().encode()
        assert a == b

    def test_subset_order_invariance(self):
        """Per-subset AUCs do not depend on evaluation order."""
        from kaeval.protocol import SubsetSpec
        ad = make_cluster_ad(k=3, n_per_class=14, noise=0.6, seed=9)
        spec = make_subsets(ad, n_subsets=4, fraction=0.8, seed=4)
        reversed_spec = SubsetSpec(seed=spec.seed, n_subsets=spec.n_subsets,
                                   fraction=spec.fraction,
                                   subsets=spec.subsets[::-1])
        a = run_protocol(ad, spec).level("Unspecified").auc_per_subset
        b = run_protocol(ad, reversed_spec).level("Unspecified").auc_per_subset
        assert sorted(a) == sorted(b)
        assert a == b[::-1]

    def test_merge_reports(self):
        ad_low = make_cluster_ad(k=3, n_per_class=12, noise=0.2, seed=10,
                                 variation=Variation.LOW)
        ad_high = make_cluster_ad(k=3, n_per_class=12, noise=1.0, seed=10,
                                  variation=Variation.HIGH)
        spec_low = make_subsets(ad_low, n_subsets=2, fraction=0.8, seed=4)
        spec_high = make_subsets(ad_high, n_subsets=2, fraction=0.8, seed=4)
        merged = merge_reports([
            run_protocol(ad_low, spec_low),
            run_protocol(ad_high, spec_high),
        ])
        assert set(merged.levels) == {"Low", "High"}
        assert merged.level("Low").auc_mean > merged.level("High").auc_mean


class TestCompare:
    def _report(self, **kwargs):
        ad = make_cluster_ad(**kwargs)
        spec = make_subsets(ad, n_subsets=10, fraction=0.8, seed=4)
        return run_protocol(ad, spec)

    def test_identical_reports(self):
        rep = self._report(k=3, n_per_class=14, noise=0.5, seed=11)
        result = compare(rep, rep, "Unspecified")
        assert result.delta_auc == 0.0
        assert result.p_value == 1.0

    def test_uniform_shift_minimum_p(self):
        """AUCs shifted by a constant 0.2: delta is exact and p is as small
        as the sign-flip null allows."""
        from kaeval.protocol import LevelResult, ProtocolReport
        rep = self._report(k=3, n_per_class=14, noise=0.5, seed=12)
        base = rep.level("Unspecified")
        shifted = LevelResult(
            level=base.level,
            auc_per_subset=tuple(min(a + 0.2, 1.0) for a in base.auc_per_subset),
            auc_mean=base.auc_mean + 0.2,
            auc_std=base.auc_std,
            envelope_grid=base.envelope_grid,
            envelope_min=base.envelope_min,
            envelope_max=base.envelope_max,
            envelope_mean=base.envelope_mean,
            curves=base.curves,
            subset_size=base.subset_size,
            n=base.n,
            k=base.k,
        )
        rep_b = ProtocolReport(levels={"Unspecified": shifted}, seed=rep.seed,
                               quantiles=rep.quantiles, n_subsets=rep.n_subsets,
                               fraction=rep.fraction, encoding=rep.encoding)
        result = compare(rep_b, rep, "Unspecified")
        assert result.delta_auc == pytest.approx(0.2, abs=1e-12)
        # only all-same-sign flips reach |observed|: about 2/2^10 of draws
        assert result.p_value <= 0.01

    def test_onehot_vs_noise(self):
        """Structured vs label-independent features: delta near 0.49."""
        ad_hot = make_onehot_ad(k=7, n_per_class=40)
        ad_noise = make_noise_ad(k=7, n_per_class=40, p=24, seed=13)
        spec_hot = make_subsets(ad_hot, n_subsets=10, fraction=0.8, seed=4)
        spec_noise = make_subsets(ad_noise, n_subsets=10, fraction=0.8, seed=4)
        rep_hot = run_protocol(ad_hot, spec_hot)
        rep_noise = run_protocol(ad_noise, spec_noise)
        result = compare(rep_hot, rep_noise, "Unspecified")
        assert result.delta_auc == pytest.approx(0.49, abs=0.05)
        assert result.p_value <= 0.01

    def test_level_missing(self):
        rep = self._report(k=3, n_per_class=14, noise=0.5, seed=14)
        with pytest.raises(ValidationError, match="level"):
            compare(rep, rep, "Low")

    def test_subset_count_mismatch(self):
        rep_a = self._report(k=3, n_per_class=14, noise=0.5, seed=15)
        ad = make_cluster_ad(k=3, n_per_class=14, noise=0.5, seed=15)
        spec = make_subsets(ad, n_subsets=4, fraction=0.8, seed=4)
        rep_b = run_protocol(ad, spec)
        with pytest.raises(ValidationError, match="mismatch"):
            compare(rep_a, rep_b, "Unspecified")

    def test_deterministic_p_value(self):
        rep_a = self._report(k=3, n_per_class=14, noise=0.4, seed=16)
        rep_b = self._report(k=3, n_per_class=14, noise=0.9, seed=16)
        r1 = compare(rep_a, rep_b, "Unspecified", seed=3)
        r2 = compare(rep_a, rep_b, "Unspecified", seed=3)
        assert r1.p_value == r2.p_value


class TestReportSerialization:
    def test_json_round_trip_preserves_numbers(self):
        ad = make_cluster_ad(k=3, n_per_class=12, noise=0.5, seed=17)
        spec = make_subsets(ad, n_subsets=3, fraction=0.8, seed=4)
        report = run_protocol(ad, spec)
        doc = json.loads(report.to_json())
        res = report.level("Unspecified")
        assert doc["levels"]["Unspecified"]["auc_per_subset"] == list(res.auc_per_subset)
        assert doc["levels"]["Unspecified"]["auc_mean"] == res.auc_mean
        assert doc["seed"] == report.seed
