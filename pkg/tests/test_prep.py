import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from perfseer.dataset import CLEAN, DEFECTIVE, NUMERIC_ATTRIBUTES, CommitFileRecord, Dataset
from perfseer.errors import DegenerateSplit, SingleClass
from perfseer.prep import (
    CleanseOptions,
    PrepParams,
    cleanse,
    jitter,
    matches_glob,
    minority_label,
    oversample,
    prepare,
    split,
)
from perfseer.synthetic import imbalanced_dataset, threshold_dataset


def rec(name="src/a.py", label=CLEAN, i=0, **kw):
    return CommitFileRecord(commit_id=f"c{i}", file_name=name, owner="o", label=label, **kw)


def balanced(n_def, n_clean):
    records = [rec(label=DEFECTIVE, i=i, lines_added=i + 1) for i in range(n_def)]
    records += [rec(label=CLEAN, i=n_def + i, lines_added=100 + i) for i in range(n_clean)]
    return Dataset(records)


@pytest.mark.parametrize(
    "path,excluded",
    [
        ("docs/readme.md", True),
        ("README", True),
        ("tests/test_a.py", True),
        ("pkg/io_test.py", True),
        ("notes.txt", True),
        ("src/app.py", False),
        ("src/contest.py", False),
    ],
)
def test_default_globs(path, excluded):
    ds = Dataset([rec(path)])
    out = cleanse(ds)
    assert len(out) == (0 if excluded else 1)


def test_glob_semantics():
    assert matches_glob("a/testing/x.py", "test*/")
    assert not matches_glob("test_x.py", "test*/")
    assert matches_glob("docs/a/b.rst", "docs/**")
    assert not matches_glob("src/docs/a.rst", "docs/**")


def test_outlier_removed_and_counted():
    ds = Dataset([rec(i=0, lines_added=12000), rec(i=1, lines_added=5000, lines_removed=5000), rec("README.md", i=2)])
    out = cleanse(ds)
    assert [r.commit_id for r in out] == ["c1"]  # 10000 is not above the threshold
    report = out.provenance["cleanse"]
    assert report["removed_outliers"] == 1
    assert report["removed_non_production"] == 1


def test_zero_churn_flag():
    ds = Dataset([rec(i=0), rec(i=1, lines_added=1)])
    assert len(cleanse(ds)) == 2
    assert len(cleanse(ds, CleanseOptions(drop_zero_churn=True))) == 1


def test_split_ten_records():
    res = split(balanced(5, 5), 0.7, seed=1)
    assert (len(res.train), len(res.validation)) == (7, 3)
    for part in (res.train, res.validation):
        counts = part.class_counts()
        assert counts[DEFECTIVE] > 0 and counts[CLEAN] > 0


def test_split_large_imbalanced_floor_rule():
    ds = imbalanced_dataset(197, 4426, seed=0)
    res = split(ds, 0.7, seed=7)
    assert len(res.train) == math.floor(0.7 * 4623) == 3236
    assert len(res.validation) == 1387
    assert res.train.class_counts()[DEFECTIVE] == 138  # largest remainder gets the extra record


def test_split_partition_and_determinism():
    ds = threshold_dataset(200, seed=2)
    a, b = split(ds, 0.7, seed=5), split(ds, 0.7, seed=5)
    assert a.train.records == b.train.records
    train_keys = {r.key for r in a.train}
    val_keys = {r.key for r in a.validation}
    assert not train_keys & val_keys
    assert train_keys | val_keys == {r.key for r in ds}
    c = split(ds, 0.7, seed=6)
    assert c.train.records != a.train.records


def test_split_unstratified():
    ds = threshold_dataset(100, seed=2)
    res = split(ds, 0.7, seed=1, stratify=False)
    assert len(res.train) == 70


def test_degenerate_split():
    with pytest.raises(DegenerateSplit):
        split(balanced(1, 9), 0.7, seed=0)
    with pytest.raises(ValueError):
        split(balanced(5, 5), 1.0)


def test_oversample_197_vs_4426():
    ds = imbalanced_dataset(197, 4426, seed=1)
    out = oversample(ds, seed=3)
    assert out.class_counts() == {DEFECTIVE: 4426, CLEAN: 4426}
    assert out.records[: len(ds)] == ds.records
    defective_keys = {r.key for r in ds if r.label == DEFECTIVE}
    assert {r.key for r in out.records[len(ds):]} <= defective_keys


def test_oversample_single_minority_record():
    ds = balanced(1, 9)
    out = oversample(ds, seed=0)
    defective = [r for r in out if r.label == DEFECTIVE]
    assert len(defective) == 9
    assert len(set(defective)) == 1


def test_oversample_balanced_is_unchanged():
    ds = balanced(4, 4)
    assert oversample(ds, seed=0).records == ds.records


def test_oversample_single_class():
    with pytest.raises(SingleClass):
        oversample(balanced(0, 4), seed=0)


def test_minority_label():
    assert minority_label(balanced(2, 5)) == DEFECTIVE
    assert minority_label(balanced(5, 2)) == CLEAN
    assert minority_label(balanced(3, 3)) == DEFECTIVE


def test_jitter_bound_and_identity():
    ds = Dataset([rec(label=DEFECTIVE, lines_added=100, sloc=50), rec(label=CLEAN, i=1, lines_added=100)])
    out = jitter(ds, 0.02, seed=0, label=DEFECTIVE)
    assert 98 <= out.records[0].lines_added <= 102
    assert out.records[1] == ds.records[1]
    assert out.records[0].owner == "o" and out.records[0].label == DEFECTIVE
    assert jitter(ds, 0.0, seed=0).records == ds.records


def test_jitter_replicates_differ():
    ds = Dataset([rec(label=DEFECTIVE, lines_added=10)] * 2 + [rec(label=CLEAN, i=1)] * 3)
    collisions = 0
    for seed in range(200):
        out = jitter(ds, 0.02, seed=seed, label=DEFECTIVE)
        collisions += out.records[0].lines_added == out.records[1].lines_added
    assert collisions == 0


def test_jitter_rows_and_per_record():
    ds = Dataset([rec(label=DEFECTIVE, i=i, lines_added=10, sloc=10) for i in range(3)])
    out = jitter(ds, 0.05, seed=1, label=DEFECTIVE, rows=[2])
    assert out.records[:2] == ds.records[:2]
    assert out.records[2] != ds.records[2]
    same = jitter(ds, 0.05, seed=1, label=DEFECTIVE, per_record=True)
    assert same.records[0].lines_added == same.records[0].sloc


values = st.floats(min_value=0, max_value=1e6, allow_nan=False)


@settings(max_examples=50, deadline=None)
@given(st.lists(values, min_size=1, max_size=20), st.floats(0, 0.5), st.integers(0, 2**32 - 1))
def test_jitter_bounds_property(xs, amplitude, seed):
    records = [rec(label=DEFECTIVE, i=i, lines_added=x, file_age_days=x) for i, x in enumerate(xs)]
    out = jitter(Dataset(records), amplitude, seed, label=DEFECTIVE)
    for before, after in zip(records, out.records):
        for name in NUMERIC_ATTRIBUTES:
            x, y = getattr(before, name), getattr(after, name)
            assert x * (1 - amplitude) - 1e-9 * x <= y <= x * (1 + amplitude) + 1e-9 * x
            assert y >= 0


def test_prepare_no_leakage_and_determinism():
    ds = imbalanced_dataset(60, 1300, seed=4)  # > 20x imbalance
    a = prepare(ds, seed=11)
    b = prepare(ds, seed=11)
    assert a.train.to_csv() == b.train.to_csv()
    assert a.validation.to_csv() == b.validation.to_csv()
    plain = split(cleanse(ds), 0.7, seed=11)
    assert a.validation.to_csv() == plain.validation.to_csv()
    counts = a.train.class_counts()
    assert abs(counts[DEFECTIVE] - counts[CLEAN]) <= 1


def test_prepare_replicates_only_mode():
    ds = imbalanced_dataset(20, 200, seed=4)
    prepared = prepare(ds, seed=3, params=PrepParams(jitter_originals=False))
    plain = split(cleanse(ds), 0.7, seed=3).train
    assert prepared.train.records[: len(plain)] == plain.records


def test_prepared_write(tmp_path):
    ds = imbalanced_dataset(20, 200, seed=4)
    prepare(ds, seed=3).write(tmp_path)
    assert {p.name for p in tmp_path.iterdir()} == {"train.csv", "validation.csv", "provenance.json"}
    reread = Dataset.read(tmp_path / "train.csv")
    assert reread.records == prepare(ds, seed=3).train.records
