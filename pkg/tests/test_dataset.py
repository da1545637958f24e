import numpy as np
import pytest
from sklearn.exceptions import NotFittedError

from fluidport import (
    AntennaConfig,
    DatasetFormatError,
    FadingParams,
    FeatureNormalizer,
    SystemConfig,
    build_dataset,
    load_dataset,
    relabel,
    save_dataset,
    sequence_features,
    top_m_labels,
)
from fluidport.dataset import export_csv
from fluidport._validation import rng_from


@pytest.fixture(scope="module")
def small_dataset():
    return build_dataset(
        SystemConfig(),
        AntennaConfig(n_ports=20, aperture=2.0),
        FadingParams(alpha=2.0, mu=2),
        m_observed=5,
        m_labels=3,
        count=100,
        seed=11,
    )


class TestTopMLabels:
    def test_examples(self):
        assert top_m_labels([0.1, 0.9, 0.5, 0.7], 2).tolist() == [0, 1, 0, 1]
        assert top_m_labels([5.0, 5.0, 1.0], 1).tolist() == [1, 0, 0]
        assert top_m_labels([0.3, 0.1, 0.2], 3).tolist() == [1, 1, 1]

    def test_against_sort_oracle(self):
        rng = rng_from(3)
        for _ in range(200):
            n = int(rng.integers(2, 30))
            m = int(rng.integers(1, n + 1))
            sinr = np.round(rng.random(n), 2)
            labels = top_m_labels(sinr, m)
            expected = sorted(range(n), key=lambda i: (-sinr[i], i))[:m]
            assert labels.sum() == m
            assert sorted(np.flatnonzero(labels).tolist()) == sorted(expected)

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            top_m_labels([1.0, 2.0], 0)
        with pytest.raises(ValueError):
            top_m_labels([1.0, 2.0], 3)

    def test_batch_shape(self):
        batch = top_m_labels(np.ones((4, 6)), 2)
        assert batch.shape == (4, 6)
        assert np.all(batch.sum(axis=1) == 2)


class TestSequenceFeatures:
    def test_db_and_position(self):
        feats = sequence_features(np.array([[1.0, 100.0]]), np.array([0, 9]), 10)
        assert feats.shape == (1, 2, 2)
        assert feats[0, 0, 0] == pytest.approx(0.0)
        assert feats[0, 1, 0] == pytest.approx(20.0)
        assert feats[0, 0, 1] == pytest.approx(0.0)
        assert feats[0, 1, 1] == pytest.approx(1.0)


class TestFeatureNormalizer:
    def test_constant_feature_maps_to_zero(self):
        X = np.ones((8, 3, 2))
        norm = FeatureNormalizer().fit(X)
        assert np.allclose(norm.transform(X), 0.0)

    def test_train_mean_zero(self):
        X = rng_from(1).normal(size=(50, 4, 2)) * 3 + 1
        z = FeatureNormalizer().fit(X).transform(X)
        assert np.allclose(z.reshape(-1, 2).mean(axis=0), 0.0, atol=1e-9)

    def test_unfit_raises(self):
        with pytest.raises(NotFittedError):
            FeatureNormalizer().transform(np.ones((2, 2, 2)))

    def test_pca_rank_one_line(self):
        # Points on a line in 2-D: one component explains everything.
        t = np.linspace(-1, 1, 40)
        X = np.stack([2 * t + 1, -3 * t + 0.5], axis=1)[:, np.newaxis, :]
        norm = FeatureNormalizer(with_pca=True).fit(X)
        assert norm.components_.shape[0] == 1
        recon = norm.inverse_transform(norm.transform(X))
        assert np.max(np.abs(recon - X)) <= 1e-8

    def test_pca_basis_orthonormal(self):
        X = rng_from(2).normal(size=(60, 5, 2))
        norm = FeatureNormalizer(with_pca=True, pca_variance=0.99).fit(X)
        grams = norm.components_ @ norm.components_.T
        assert np.allclose(grams, np.eye(grams.shape[0]), atol=1e-8)
        assert norm.transform(X).shape[1] == 1  # single-step sequences

    def test_state_roundtrip(self):
        X = rng_from(4).normal(size=(30, 3, 2))
        norm = FeatureNormalizer(with_pca=True).fit(X)
        clone = FeatureNormalizer.from_state(norm.state_dict())
        assert np.allclose(clone.transform(X), norm.transform(X))


class TestBuildDataset:
    def test_split_sizes_70_15_15(self, small_dataset):
        assert len(small_dataset.train) == 70
        assert len(small_dataset.validation) == 15
        assert len(small_dataset.test) == 15

    def test_every_sample_has_m_labels(self, small_dataset):
        for name in ("train", "validation", "test"):
            part = small_dataset.split(name)
            assert np.all(part.labels.sum(axis=1) == 3)

    def test_labels_match_sort_oracle(self, small_dataset):
        part = small_dataset.train
        for i in range(len(part)):
            sinr = part.sinr[i].astype(float)
            expected = sorted(range(sinr.size), key=lambda j: (-sinr[j], j))[:3]
            assert sorted(np.flatnonzero(part.labels[i]).tolist()) == sorted(expected)

    def test_features_cover_only_observed_ports(self, small_dataset):
        # Un-standardize and compare against the stored ground-truth SINR of
        # the observed ports.
        part = small_dataset.test
        raw = small_dataset.normalizer.inverse_transform(part.features.astype(float))
        observed = small_dataset.observed
        expected_db = 10 * np.log10(part.sinr[:, observed].astype(float))
        assert np.allclose(raw[..., 0], expected_db, atol=1e-4)
        assert np.allclose(raw[..., 1], observed / 19.0, atol=1e-6)

    def test_train_split_standardized(self, small_dataset):
        feats = small_dataset.train.features.astype(float)
        assert np.allclose(feats.reshape(-1, 2).mean(axis=0), 0.0, atol=1e-6)

    def test_seed_determinism(self, small_dataset, tmp_path):
        again = build_dataset(
            SystemConfig(),
            AntennaConfig(n_ports=20, aperture=2.0),
            FadingParams(alpha=2.0, mu=2),
            m_observed=5,
            m_labels=3,
            count=100,
            seed=11,
        )
        p1, p2 = tmp_path / "a.fpds", tmp_path / "b.fpds"
        save_dataset(small_dataset, p1)
        save_dataset(again, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_relabel(self, small_dataset):
        wider = relabel(small_dataset, 5)
        assert wider.meta["m_labels"] == 5
        assert np.all(wider.train.labels.sum(axis=1) == 5)
        assert np.array_equal(wider.train.features, small_dataset.train.features)


class TestSerialization:
    def test_roundtrip(self, small_dataset, tmp_path):
        path = tmp_path / "ds.fpds"
        save_dataset(small_dataset, path)
        loaded = load_dataset(path)
        for name in ("train", "validation", "test"):
            a, b = small_dataset.split(name), loaded.split(name)
            assert np.array_equal(a.features, b.features)
            assert np.array_equal(a.labels, b.labels)
            assert np.array_equal(a.sinr, b.sinr)
        assert loaded.meta["m_observed"] == 5
        assert np.allclose(loaded.normalizer.mean_, small_dataset.normalizer.mean_)

    def test_checksum_corruption(self, small_dataset, tmp_path):
        path = tmp_path / "ds.fpds"
        save_dataset(small_dataset, path)
        blob = bytearray(path.read_bytes())
        blob[-1] ^= 0xFF
        path.write_bytes(bytes(blob))
        with pytest.raises(DatasetFormatError, match="checksum"):
            load_dataset(path)

    def test_truncated_payload(self, small_dataset, tmp_path):
        path = tmp_path / "ds.fpds"
        save_dataset(small_dataset, path)
        path.write_bytes(path.read_bytes()[:-100])
        with pytest.raises(DatasetFormatError):
            load_dataset(path)

    def test_expectation_mismatch(self, small_dataset, tmp_path):
        path = tmp_path / "ds.fpds"
        save_dataset(small_dataset, path)
        with pytest.raises(DatasetFormatError, match="n_ports"):
            load_dataset(path, expect={"n_ports": 64})

    def test_version_mismatch(self, small_dataset, tmp_path):
        path = tmp_path / "ds.fpds"
        save_dataset(small_dataset, path)
        raw = path.read_bytes()
        header, payload = raw.split(b"\n", 1)
        bad = header.replace(b'"version": 1', b'"version": 9')
        path.write_bytes(bad + b"\n" + payload)
        with pytest.raises(DatasetFormatError, match="version"):
            load_dataset(path)

    def test_csv_export(self, small_dataset, tmp_path):
        path = tmp_path / "ds.csv"
        export_csv(small_dataset, path)
        lines = path.read_text().strip().splitlines()
        assert len(lines) == 1 + 100
        assert lines[0].startswith("split,index,f0_0")
