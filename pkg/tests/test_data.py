import numpy as np
import pytest

from gmfsim.data import (
    Dataset,
    emd,
    load_csv,
    make_synthetic,
    partition_by_target_emd,
    stratified_split,
)
from gmfsim.errors import DatasetError, DimensionError, PartitionError, PreconditionError
from gmfsim.model import Batch, ModelSpec, evaluate, init_params, loss_and_grad


class TestEmd:
    def test_uniform_is_zero(self):
        props = np.full((4, 10), 0.1)
        assert emd(props, np.full(4, 0.25), np.full(10, 0.1)) == 0.0

    def test_single_class_client(self):
        assert emd([[1.0, 0.0]], [1.0], [0.5, 0.5]) == 1.0

    def test_one_class_per_client(self):
        assert emd(np.eye(10), np.full(10, 0.1), np.full(10, 0.1)) == pytest.approx(1.8)

    def test_relabel_invariant_and_bounded(self, rng):
        props = rng.dirichlet(np.ones(6), size=5)
        weights = rng.dirichlet(np.ones(5))
        glob = weights @ props
        perm = rng.permutation(6)
        value = emd(props, weights, glob)
        assert value == pytest.approx(emd(props[:, perm], weights, glob[perm]))
        assert 0.0 <= value <= 2.0

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            emd([[0.5, 0.5]], [1.0], [1.0, 0.0, 0.0])


class TestSynthetic:
    def test_deterministic(self):
        a = make_synthetic(3, 5, 60, 2.0, seed=4)
        b = make_synthetic(3, 5, 60, 2.0, seed=4)
        assert a.features.tobytes() == b.features.tobytes()
        assert a.labels.tobytes() == b.labels.tobytes()

    def test_mean_separation(self):
        ds = make_synthetic(4, 10, 40000, 5.0, seed=0)
        means = np.array([ds.features[ds.labels == c].mean(axis=0) for c in range(4)])
        dist = np.linalg.norm(means[:, None] - means[None], axis=2)[np.triu_indices(4, 1)]
        np.testing.assert_allclose(dist, 5.0, atol=0.15)

    def test_well_separated_is_learnable(self):
        ds = make_synthetic(4, 8, 800, 10.0, seed=1)
        spec = ModelSpec("logreg", 8, 4)
        w = init_params(spec, 0)
        for _ in range(200):
            w -= 0.5 * loss_and_grad(spec, w, Batch(ds.features, ds.labels))[1]
        assert evaluate(spec, w, ds)[0] > 0.95

    def test_zero_separation_is_chance(self):
        train = make_synthetic(4, 8, 4000, 0.0, seed=1)
        test = make_synthetic(4, 8, 4000, 0.0, seed=2)
        spec = ModelSpec("logreg", 8, 4)
        w = init_params(spec, 0)
        for _ in range(200):
            w -= 0.5 * loss_and_grad(spec, w, Batch(train.features, train.labels))[1]
        assert abs(evaluate(spec, w, test)[0] - 0.25) < 0.04

    def test_informative_block_and_spectrum(self):
        ds = make_synthetic(3, 12, 3000, 6.0, seed=0, n_informative=4, spectrum_decay=2.0)
        means = np.array([ds.features[ds.labels == c].mean(axis=0) for c in range(3)])
        assert np.abs(means[:, 4:]).max() < 0.1
        std = ds.features.std(axis=0)
        assert std[11] == pytest.approx(1.0 / 9.0, rel=0.1)


class TestCsv:
    def test_smoke(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("f0,f1,label\n1.0,2.0,0\n3.0,4.0,1\n")
        ds = load_csv(p)
        assert ds.n_samples == 2 and ds.n_features == 2

    def test_label_remap_and_crlf(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_bytes(b"f0,label\r\n1.0,7\r\n2.0,3\r\n3.0,7\r\n")
        ds = load_csv(p)
        assert ds.label_names == (3, 7)
        assert ds.labels.tolist() == [1, 0, 1]

    def test_non_numeric_names_row_and_column(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("f0,f1,label\n1.0,2.0,0\n1.0,abc,1\n")
        with pytest.raises(DatasetError, match=r":3: column 'f1'"):
            load_csv(p)

    def test_empty_and_ragged(self, tmp_path):
        p = tmp_path / "e.csv"
        p.write_text("")
        with pytest.raises(DatasetError, match="empty"):
            load_csv(p)
        p.write_text("f0,label\n1.0\n")
        with pytest.raises(DatasetError):
            load_csv(p)


@pytest.fixture(scope="module")
def ds():
    return make_synthetic(10, 8, 4000, 3.0, seed=0)


class TestPartition:
    def test_balanced(self, ds):
        part = partition_by_target_emd(ds, 20, 0.0, seed=0)
        assert part.achieved_emd < 0.02

    @pytest.mark.parametrize("target,lo,hi", [(1.35, 1.30, 1.40), (0.48, 0.43, 0.53)])
    def test_targets(self, ds, target, lo, hi):
        assert lo <= partition_by_target_emd(ds, 20, target, seed=1).achieved_emd <= hi

    def test_structure(self, ds):
        part = partition_by_target_emd(ds, 20, 0.9, seed=2)
        sizes = [len(a) for a in part.assignments]
        assert max(sizes) - min(sizes) <= 1 and min(sizes) > 0
        flat = np.concatenate(part.assignments)
        assert len(np.unique(flat)) == len(flat)
        np.testing.assert_allclose(part.client_class_props.sum(axis=1), 1.0, atol=1e-9)
        sizes = np.array(sizes, dtype=float)
        glob = np.bincount(ds.labels[flat], minlength=10) / len(flat)
        assert emd(part.client_class_props, sizes / sizes.sum(), glob) == pytest.approx(part.achieved_emd)

    def test_deterministic(self, ds):
        a = partition_by_target_emd(ds, 20, 0.76, seed=5)
        b = partition_by_target_emd(ds, 20, 0.76, seed=5)
        assert all(np.array_equal(x, y) for x, y in zip(a.assignments, b.assignments))

    def test_trace_monotone(self, ds):
        # rounding to whole samples perturbs each client's mix by at most C / shard
        part = partition_by_target_emd(ds, 20, 1.0, seed=3)
        emds = [e for _, e in part.trace]
        slack = ds.n_classes / (ds.n_samples // 20)
        assert all(b >= a - slack for a, b in zip(emds, emds[1:]))
        assert emds[-1] > emds[0]

    def test_unreachable(self):
        # ten samples per client cannot be split across fewer than three classes
        ds = make_synthetic(10, 4, 40, 1.0, seed=0)
        with pytest.raises(PartitionError, match="unreachable"):
            partition_by_target_emd(ds, 4, 1.7, seed=0)

    def test_bad_target(self, ds):
        with pytest.raises(PreconditionError):
            partition_by_target_emd(ds, 20, 1.8, seed=0)


def test_stratified_split_holds_out_each_class():
    ds = make_synthetic(5, 3, 500, 1.0, seed=0)
    train, test = stratified_split(ds, 0.1, seed=0)
    assert test.n_samples == 50
    assert np.all(np.bincount(test.labels, minlength=5) == 10)
    assert train.n_samples == 450


def test_dataset_validation():
    with pytest.raises(DatasetError):
        Dataset(np.zeros((2, 2)), np.array([0, 3]), 2)
