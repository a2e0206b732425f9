import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hfqnn import data
from hfqnn.errors import ConfigError, DataError, SchemaError, StateError

HEADER = "time,icao24,lat,lon,velocity,heading,baroaltitude,geoaltitude,label\n"
ROW = "1600000000,4ca1fa,45.1,2.3,230.5,90.0,10000.0,10120.0,{label}\n"


def write(tmp_path, text, name="adsb.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


# ---------------------------------------------------------------- loading


def test_load_well_formed(tmp_path):
    path = write(tmp_path, HEADER + ROW.format(label=0) * 2 + ROW.format(label=1))
    records = data.load_csv(path)
    assert len(records) == 3
    assert records[2].label == 1 and records[0].icao24 == "4ca1fa"
    assert records[0].geoaltitude == 10120.0


def test_missing_column_is_named(tmp_path):
    path = write(tmp_path, "time,icao24,lat,lon,velocity,heading,baroaltitude,label\n")
    with pytest.raises(SchemaError, match="geoaltitude"):
        data.load_csv(path)


def test_malformed_row_skipped(tmp_path):
    bad = "1600000000,4ca1fa,north,2.3,230.5,90.0,10000.0,10120.0,0\n"
    path = write(tmp_path, HEADER + ROW.format(label=0) + bad + ROW.format(label=1))
    with pytest.warns(UserWarning, match="skipped 1"):
        records, skipped = data.read_csv(path)
    assert skipped == 1 and len(records) == 2


def test_header_aliases(tmp_path):
    header = "Timestamp,ICAO24,Latitude,Longitude,Velocity,Heading,baroAltitude,geo_altitude,Class\n"
    path = write(tmp_path, header + "1,abc,1,2,3,4,5,6,attack\n")
    (rec,) = data.load_csv(path)
    assert rec.baroaltitude == 5 and rec.geoaltitude == 6 and rec.label == 1


def test_empty_file(tmp_path):
    with pytest.raises(DataError):
        data.load_csv(write(tmp_path, ""))


def test_csv_round_trip(tmp_path):
    records = data.generate_synthetic(20, 10, seed=4)
    path = tmp_path / "rt.csv"
    data.write_csv(records, path)
    assert data.load_csv(path) == records


# ---------------------------------------------------------------- correlation / selection


def fm_from(columns: dict, labels=None):
    values = np.column_stack(list(columns.values()))
    labels = np.zeros(len(values), dtype=int) if labels is None else labels
    return data.FeatureMatrix(values, list(columns), labels)


def test_correlation_diagonal_and_collinear(rng):
    x = rng.normal(size=50)
    corr = data.correlation_matrix(fm_from({"x": x, "y": 2 * x + 3, "z": rng.normal(size=50)}))
    assert np.all(np.diag(corr) == 1.0)
    assert corr[0, 1] == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(corr, corr.T, atol=1e-12)


def test_correlation_orthogonal_pair():
    a = np.array([1, 1, -1, -1, 1, 1, -1, -1], dtype=float)
    b = np.array([1, -1, 1, -1, 1, -1, 1, -1], dtype=float)
    corr = data.correlation_matrix(fm_from({"a": a, "b": b}))
    assert abs(corr[0, 1]) < 1e-12


def test_correlation_zero_variance_flagged(rng):
    with pytest.warns(UserWarning, match="zero-variance"):
        corr = data.correlation_matrix(fm_from({"a": rng.normal(size=5), "c": np.ones(5)}))
    assert corr[0, 1] == 0.0 and corr[1, 1] == 1.0


def test_correlation_needs_two_rows():
    with pytest.raises(DataError):
        data.correlation_matrix(fm_from({"a": np.ones(1)}))


def test_select_adsb_schema():
    fm = data.records_to_features(data.generate_synthetic(300, 100, seed=0))
    selected = data.select_features(fm, 0.9)
    assert selected.feature_names == ("time", "lat", "lon", "velocity", "heading", "geoaltitude")
    assert set(selected.dropped) == {"icao24", "baroaltitude"}


def test_select_threshold_one_only_drops_icao(rng):
    cols = {"icao24": rng.normal(size=40), "a": rng.normal(size=40), "b": rng.normal(size=40)}
    assert data.select_features(fm_from(cols), 1.0).feature_names == ("a", "b")


def test_select_drops_later_of_collinear_pair(rng):
    x = rng.normal(size=60)
    cols = {"a": rng.normal(size=60), "x": x, "b": rng.normal(size=60), "x2": 2 * x}
    selected = data.select_features(fm_from(cols), 0.9)
    assert selected.feature_names == ("a", "x", "b")


def test_select_threshold_range():
    with pytest.raises(ConfigError):
        data.select_features(fm_from({"a": np.arange(3.0)}), 0.0)


def test_select_everything_dropped():
    with pytest.raises(ConfigError):
        data.select_features(fm_from({"icao24": np.arange(3.0)}))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), n_normal=st.integers(200, 600), n_attack=st.integers(100, 300))
def test_select_adsb_schema_property(seed, n_normal, n_attack):
    fm = data.records_to_features(data.generate_synthetic(n_normal, n_attack, seed=seed))
    names = data.select_features(fm).feature_names
    assert names == ("time", "lat", "lon", "velocity", "heading", "geoaltitude")


# ---------------------------------------------------------------- sampling


def toy(n_normal, n_attack):
    labels = np.array([0] * n_normal + [1] * n_attack)
    return data.FeatureMatrix(np.arange(len(labels), dtype=float)[:, None], ["v"], labels)


def test_sample_counts():
    out = data.sample_stratified(toy(2500, 1200), data.SamplingPlan(1000, 2, seed=1))
    assert (out.labels == 1).sum() == 1000 and (out.labels == 0).sum() == 2000


def test_sample_small_distinct():
    out = data.sample_stratified(toy(10, 10), data.SamplingPlan(5, 1, seed=3))
    assert len(out) == 10 and len(set(out.row_ids)) == 10


def test_sample_deterministic():
    plan = data.SamplingPlan(5, 1.5, seed=9)
    a, b = data.sample_stratified(toy(30, 30), plan), data.sample_stratified(toy(30, 30), plan)
    np.testing.assert_array_equal(a.row_ids, b.row_ids)


def test_sample_floor_of_ratio():
    assert data.SamplingPlan(3, 1.5).n_normal == 4


def test_sample_insufficient():
    with pytest.raises(DataError, match="available 4 attack"):
        data.sample_stratified(toy(30, 4), data.SamplingPlan(5, 1))


def test_sample_from_records():
    recs = data.generate_synthetic(40, 20, seed=1)
    out = data.sample_stratified(recs, data.SamplingPlan(10, 2, seed=0))
    assert len(out) == 30


def test_plan_invariants():
    with pytest.raises(ConfigError):
        data.SamplingPlan(0, 2)
    with pytest.raises(ConfigError):
        data.SamplingPlan(1, 0)


# ---------------------------------------------------------------- splitting


def test_split_balanced_hundred():
    split = data.split_70_20_10(toy(50, 50), seed=0)
    assert (len(split.train), len(split.val), len(split.test)) == (70, 20, 10)
    for part, per_class in ((split.train, 35), (split.val, 10), (split.test, 5)):
        assert (part.labels == 0).sum() == per_class == (part.labels == 1).sum()


def test_split_odd_size():
    split = data.split_70_20_10(toy(668, 335), seed=2)
    sizes = [len(split.train), len(split.val), len(split.test)]
    assert sum(sizes) == 1003
    for size, frac in zip(sizes, data.SPLIT_FRACTIONS):
        assert abs(size - 1003 * frac) <= 1


def test_split_deterministic():
    a, b = data.split_70_20_10(toy(40, 20), 5), data.split_70_20_10(toy(40, 20), 5)
    for part in ("train", "val", "test"):
        np.testing.assert_array_equal(getattr(a, part).row_ids, getattr(b, part).row_ids)


def test_split_small_class():
    with pytest.raises(DataError):
        data.split_70_20_10(toy(20, 2), 0)
    with pytest.raises(DataError):
        data.split_70_20_10(toy(5, 4), 0)


@settings(max_examples=200, deadline=None)
@given(n_normal=st.integers(3, 400), n_attack=st.integers(3, 400), seed=st.integers(0, 1000))
def test_split_invariants(n_normal, n_attack, seed):
    fm = toy(n_normal, n_attack)
    n = len(fm)
    if n < 10:
        return
    split = data.split_70_20_10(fm, seed)
    parts = (split.train, split.val, split.test)
    ids = np.concatenate([p.row_ids for p in parts])
    assert len(ids) == n and len(np.unique(ids)) == n
    for part, frac in zip(parts, data.SPLIT_FRACTIONS):
        assert abs(len(part) - n * frac) < 1
        for label, size in ((0, n_normal), (1, n_attack)):
            assert abs((part.labels == label).sum() - size * frac) < 1


# ---------------------------------------------------------------- standardisation


def test_standardize_hand_values():
    fm = fm_from({"a": np.array([1.0, 2.0, 3.0])})
    stats = data.fit_standardizer(fm)
    assert stats.mean[0] == 2.0
    assert stats.scale[0] == pytest.approx(np.sqrt(2 / 3), abs=1e-15)
    np.testing.assert_allclose(stats.transform(fm).values[:, 0], [-1.2247449, 0, 1.2247449], atol=1e-7)


def test_standardize_fitted_moments(rng):
    fm = fm_from({"a": rng.normal(5, 3, 200), "b": rng.uniform(-1e3, 1e3, 200)})
    out = data.fit_standardizer(fm).transform(fm).values
    np.testing.assert_allclose(out.mean(axis=0), 0, atol=1e-8)
    np.testing.assert_allclose(out.std(axis=0), 1, atol=1e-6)


def test_standardize_constant_column():
    fm = fm_from({"c": np.full(4, 7.0)})
    with pytest.warns(UserWarning, match="zero-variance"):
        stats = data.fit_standardizer(fm)
    np.testing.assert_array_equal(stats.transform(fm).values, 0.0)


def test_standardize_round_trip(rng):
    fm = fm_from({"a": rng.normal(size=30) * 1e4 + 1.6e9, "b": rng.normal(size=30)})
    stats = data.fit_standardizer(fm)
    np.testing.assert_allclose(stats.inverse_transform(stats.transform(fm)).values, fm.values, rtol=1e-10, atol=1e-10)


def test_unfitted_standardizer():
    fm = fm_from({"a": np.arange(3.0)})
    with pytest.raises(StateError):
        data.apply_standardizer(None, fm)
    with pytest.raises(StateError):
        data.Standardizer().transform(fm)


def test_standardizer_never_refits(rng):
    train, other = fm_from({"a": rng.normal(size=20)}), fm_from({"a": rng.normal(10, 5, size=20)})
    stats = data.fit_standardizer(train)
    mean = stats.mean.copy()
    data.apply_standardizer(stats, other)
    np.testing.assert_array_equal(stats.mean, mean)


# ---------------------------------------------------------------- labels


def test_encode_labels():
    np.testing.assert_array_equal(data.encode_labels([0, 1], "bce"), [[1, 0], [0, 1]])
    np.testing.assert_array_equal(data.encode_labels([0, 1], "ce"), [0, 1])
    y = np.array([1, 0, 0, 1])
    np.testing.assert_array_equal(data.encode_labels(y, "bce").argmax(axis=1), y)
    with pytest.raises(DataError):
        data.encode_labels([0, 2], "ce")


# ---------------------------------------------------------------- synthetic


def test_synthetic_counts():
    recs = data.generate_synthetic(100, 50, seed=0)
    assert len(recs) == 150 and sum(r.label for r in recs) == 50


def test_synthetic_deterministic():
    assert data.generate_synthetic(30, 30, seed=5) == data.generate_synthetic(30, 30, seed=5)


def test_synthetic_zero_drift_runs_pipeline():
    recs = data.generate_synthetic(60, 30, seed=1, drift=0.0)
    fm = data.select_features(data.records_to_features(recs))
    split = data.split_70_20_10(data.sample_stratified(fm, data.SamplingPlan(30, 2)), 0)
    assert len(split.train) + len(split.val) + len(split.test) == 90


def test_make_separable_is_separable():
    fm = data.make_separable(600, 2, 4, seed=3)
    assert fm.values.shape == (600, 6)
    # label is the sign of a projection on the informative block; a linear fit recovers it
    x = np.hstack([fm.values[:, :2], np.ones((600, 1))])
    w, *_ = np.linalg.lstsq(x, 2 * fm.labels - 1.0, rcond=None)
    assert np.all((x @ w > 0) == (fm.labels == 1))


# ---------------------------------------------------------------- cache


def test_split_cache_round_trip(tmp_path):
    fm = data.select_features(data.records_to_features(data.generate_synthetic(60, 30, seed=1)))
    plan = data.SamplingPlan(30, 2, seed=0)
    split = data.split_70_20_10(data.sample_stratified(fm, plan), 0)
    key = data.split_cache_key(data.dataset_digest(fm), plan, 0, 0.9)
    assert data.load_split_cache(tmp_path, key) is None
    data.save_split_cache(tmp_path, key, split)
    loaded = data.load_split_cache(tmp_path, key)
    for part in ("train", "val", "test"):
        a, b = getattr(split, part), getattr(loaded, part)
        assert a.values.tobytes() == b.values.tobytes()
        np.testing.assert_array_equal(a.labels, b.labels)
        assert a.feature_names == b.feature_names and a.dropped == b.dropped
