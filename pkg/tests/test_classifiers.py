import math
import warnings
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from perfseer.classifiers import (
    ALGORITHMS,
    LOGISTIC,
    TrainedModel,
    canonical,
    coefficients,
    predict,
    train,
    train_bayes_net,
    train_c45,
    train_logistic,
    train_naive_bayes,
)
from perfseer.classifiers.bayes import bin_index, equal_frequency_edges, naive_bayes_posteriors
from perfseer.classifiers.base import columns_from_rows
from perfseer.classifiers.c45 import added_errors, best_split, tree_depth
from perfseer.classifiers.logistic import INTERCEPT, design_matrix
from perfseer.dataset import CLEAN, DEFECTIVE, FEATURE_ATTRIBUTES, CommitFileRecord, Dataset
from perfseer.errors import ArityMismatch, EmptyDataset, NonConvergenceWarning, SingleClass, Unsupported
from perfseer.synthetic import threshold_dataset

from oracles import best_split_bruteforce, finite_difference_gradient, logistic_objective


def make(values, labels, feature="lines_added", **extra):
    records = []
    for i, (v, lab) in enumerate(zip(values, labels)):
        fields = {"file_name": "f.py", "owner": "o", feature: v, **{k: vs[i] for k, vs in extra.items()}}
        records.append(CommitFileRecord(commit_id=f"c{i}", label=lab, **fields))
    return Dataset(records, feature_selection=(feature, *extra))


D, C = DEFECTIVE, CLEAN


# -- C4.5 ---------------------------------------------------------------------


def test_c45_four_record_example():
    ds = make([10, 20, 80, 90], [C, C, D, D])
    model = train_c45(ds)
    root = model.parameters["root"]
    assert root["threshold"] == 50.0
    assert tree_depth(root) == 1
    assert model.predict_dataset(ds) == ds.labels()


def test_c45_single_class():
    ds = make([1, 2, 3], [C, C, C])
    with pytest.raises(SingleClass):
        train_c45(ds)
    model = train_c45(ds, allow_single_class=True)
    assert "feature" not in model.parameters["root"]
    assert model.predict((7,))[0] == C


def test_c45_empty():
    with pytest.raises(EmptyDataset):
        train_c45(make([], []))


def test_c45_categorical_multiway_and_unseen_symbol():
    owners = ["a"] * 4 + ["b"] * 4 + ["c"] * 4
    labels = [D] * 4 + [C] * 8
    ds = make(owners, labels, feature="owner")
    model = train_c45(ds, prune=False)
    root = model.parameters["root"]
    assert set(root["branches"]) == {"a", "b", "c"}
    assert model.predict(("a",))[0] == D
    label, p = model.predict(("zzz",))  # falls back to the root distribution
    assert p == pytest.approx(4 / 12)


def test_added_errors_reference_values():
    # values of the C4.5 pessimistic estimate at CF = 0.25
    assert added_errors(2, 0, 0.25) == pytest.approx(1.0)
    assert added_errors(6, 0, 0.25) == pytest.approx(6 * (1 - 0.25 ** (1 / 6)))
    assert added_errors(3, 3, 0.25) == 0
    with pytest.raises(ValueError):
        added_errors(5, 1, 0.6)


def test_pruning_collapses_noise_split():
    # one stray defective among clean records: the split does not pay for itself
    values = list(range(20))
    labels = [C] * 19 + [D]
    unpruned = train_c45(make(values, labels), prune=False)
    pruned = train_c45(make(values, labels))
    assert tree_depth(unpruned.parameters["root"]) >= 1
    assert tree_depth(pruned.parameters["root"]) == 0


def random_split_case(rng):
    n = int(rng.integers(4, 51))
    k = int(rng.integers(1, 5))
    features = list(rng.choice(FEATURE_ATTRIBUTES, size=k, replace=False))
    rows = []
    for _ in range(n):
        row = []
        for f in features:
            if f in ("owner", "file_name"):
                row.append(str(rng.choice(["x", "y", "z", "w"])))
            else:
                row.append(float(rng.integers(0, 8)))
        rows.append(tuple(row))
    y = rng.integers(0, 2, size=n)
    return features, rows, y


@pytest.mark.parametrize("case", range(100))
def test_c45_root_split_matches_exhaustive_search(case):
    rng = np.random.default_rng(1000 + case)
    features, rows, y = random_split_case(rng)
    categorical = [f in ("owner", "file_name") for f in features]
    expected = best_split_bruteforce(rows, list(y), categorical)
    found = best_split(columns_from_rows(features, rows), y, features)
    got = None if found is None else (found.feature, found.threshold)
    assert got == expected


def test_c45_deterministic():
    ds = threshold_dataset(300, seed=3)
    assert train_c45(ds).to_json() == train_c45(ds).to_json()


# -- Naive Bayes --------------------------------------------------------------


def test_nb_variance_floor_example():
    ds = make([0, 0, 10, 10], [C, C, D, D])
    model = train_naive_bayes(ds)
    assert model.predict((1,))[0] == C
    assert model.predict((9,))[0] == D


def test_nb_uninformative_feature_gives_prior():
    ds = make([5] * 10, [D] * 3 + [C] * 7)
    label, p = train_naive_bayes(ds).predict((5,))
    assert label == C
    assert p == pytest.approx(0.3)


def test_nb_unseen_symbol():
    ds = make(["a", "a", "b", "b"], [D, C, C, C], feature="owner")
    label, p = train_naive_bayes(ds).predict(("never-seen",))
    assert 0 < p < 1


def test_nb_posteriors_normalized():
    ds = threshold_dataset(400, seed=5)
    model = train_naive_bayes(ds)
    rng = np.random.default_rng(0)
    rows = [(float(rng.uniform(0, 200)),) + tuple(r.features(FEATURE_ATTRIBUTES)[1:]) for r in ds.records[:200]]
    post = naive_bayes_posteriors(model.parameters, columns_from_rows(FEATURE_ATTRIBUTES, rows))
    assert np.max(np.abs(post.sum(axis=1) - 1.0)) <= 1e-12


# -- Bayesian network ---------------------------------------------------------


def test_equal_frequency_edges_and_clamping():
    x = np.arange(1, 11, dtype=float)
    edges = equal_frequency_edges(x, 5)
    assert edges == pytest.approx([2.8, 4.6, 6.4, 8.2])
    assert bin_index(edges, np.array([-100.0, 1.0, 2.8, 2.9, 10.0, 1e9])).tolist() == [0, 0, 0, 1, 4, 4]
    assert equal_frequency_edges(np.zeros(10), 4) == []


def test_bayes_net_ten_record_cpt():
    values = list(range(1, 11))
    labels = [C] * 8 + [D] * 2
    model = train_bayes_net(make(values, labels), bins=5)
    # hand computation: priors (2+1)/12 vs (8+1)/12; top-bin CPT (2+1)/(2+5) vs (0+1)/(8+5)
    top_def = Fraction(3, 12) * Fraction(3, 7)
    top_clean = Fraction(9, 12) * Fraction(1, 13)
    expected_top = float(top_def / (top_def + top_clean))
    for v in (9, 10, 1000):  # 1000 clamps to the top bin
        label, p = model.predict((v,))
        assert label == D
        assert p == pytest.approx(expected_top, abs=1e-12)
    low_def = Fraction(3, 12) * Fraction(1, 7)
    low_clean = Fraction(9, 12) * Fraction(3, 13)
    label, p = model.predict((-50,))
    assert label == C
    assert p == pytest.approx(float(low_def / (low_def + low_clean)), abs=1e-12)


def test_bayes_net_single_bin_is_prior():
    values = list(range(1, 11))
    model = train_bayes_net(make(values, [C] * 8 + [D] * 2), bins=1)
    ps = {model.predict((v,))[1] for v in (1, 10, 99)}
    assert len(ps) == 1
    assert ps.pop() == pytest.approx(3 / 12)


# -- Logistic regression ------------------------------------------------------


def scaled_problem(model, ds):
    """Rebuild the centered/scaled design and the coefficients on it."""
    params = model.parameters
    columns = columns_from_rows(model.feature_selection, [r.features(model.feature_selection) for r in ds])
    X, _ = design_matrix(params["design"], columns)
    center, scale = np.array(params["center"]), np.array(params["scale"])
    Z = np.column_stack([np.ones(len(ds)), (X - center) / scale])
    coef = np.array(params["coefficients"])
    beta_z = np.concatenate([[params["intercept"] + coef @ center], coef * scale])
    y = np.array([r.label == D for r in ds], dtype=float)
    return Z, y, beta_z


@pytest.mark.parametrize("features", [("lines_added",), ("lines_added", "sloc", "owner")])
def test_logistic_gradient_vanishes(features):
    ds = threshold_dataset(200, seed=9, owners=3)
    model = train_logistic(ds, features)
    Z, y, beta_z = scaled_problem(model, ds)
    ridge = model.parameters["ridge"]
    grad = finite_difference_gradient(lambda b: logistic_objective(b, Z, y, ridge), beta_z)
    assert np.linalg.norm(grad) <= 1e-6
    assert model.metadata["converged"]


def test_logistic_positive_sign():
    model = train_logistic(threshold_dataset(2000, seed=0), ("lines_added",))
    rows = {row.term: row for row in coefficients(model)}
    assert rows["lines_added"].estimate > 0
    assert rows["lines_added"].p_value < 0.01


def test_logistic_zero_variance_column():
    ds = threshold_dataset(300, seed=1)
    ds = Dataset([r.replace(sloc=7) for r in ds], ("lines_added", "sloc"))
    model = train_logistic(ds)
    rows = {row.term: row for row in coefficients(model)}
    assert rows["sloc"].estimate == pytest.approx(0.0, abs=1e-9)
    assert math.isfinite(rows["lines_added"].estimate)


def test_logistic_uninformative_feature_monte_carlo():
    insignificant, intercepts = 0, []
    for seed in range(100):
        rng = np.random.default_rng(seed)
        x = rng.uniform(-1, 1, size=200)
        labels = [D] * 100 + [C] * 100
        model = train_logistic(make(list(x), labels, feature="file_age_days"))
        rows = {row.term: row for row in coefficients(model)}
        insignificant += rows["file_age_days"].p_value > 0.05
        intercepts.append(rows[INTERCEPT].estimate)
    assert insignificant >= 88  # nominal 95 of 100
    assert abs(float(np.mean(intercepts))) < 0.05


def test_logistic_scaling_equivariance():
    ds = threshold_dataset(500, seed=4)
    features = ("lines_added", "sloc")
    base = train_logistic(ds, features)
    c = 37.5
    scaled = Dataset([r.replace(sloc=r.sloc * c) for r in ds], features)
    other = train_logistic(scaled, features)
    b0, b1 = base.parameters["coefficients"], other.parameters["coefficients"]
    assert b1[0] == pytest.approx(b0[0], rel=1e-8)
    assert b1[1] == pytest.approx(b0[1] / c, rel=1e-8)
    p0 = base.probabilities([r.features(features) for r in ds])
    p1 = other.probabilities([r.features(features) for r in scaled])
    assert np.max(np.abs(p0 - p1)) <= 1e-8


def test_logistic_one_of_k_reference_level():
    ds = threshold_dataset(300, seed=2, owners=3)
    model = train_logistic(ds, ("owner",))
    terms = [row.term for row in coefficients(model)]
    assert terms == [INTERCEPT, "owner=dev01", "owner=dev02"]
    # unseen owners fall on the reference level dev00
    assert model.predict(("dev99",))[1] == model.predict(("dev00",))[1]


def test_logistic_nonconvergence_is_flagged():
    ds = threshold_dataset(300, seed=2)
    with pytest.warns(NonConvergenceWarning):
        model = train_logistic(ds, ("lines_added",), max_iter=1)
    assert model.metadata["converged"] is False


def test_all_zero_logistic_ties_to_defective():
    model = TrainedModel(
        LOGISTIC,
        ("lines_added",),
        {"design": [{"feature": "lines_added"}], "intercept": 0.0, "coefficients": [0.0], "terms": []},
    )
    assert predict(model, (123,)) == (D, 0.5)


def test_coefficients_contract():
    ds = threshold_dataset(300, seed=2)
    with pytest.raises(Unsupported):
        coefficients(train_c45(ds))
    rows = coefficients(train_logistic(ds, ("lines_added", "sloc")))
    assert rows[0].term == INTERCEPT
    assert [r.term for r in rows[1:]] == ["lines_added", "sloc"]


# -- shared contract -----------------------------------------------------------


def test_aliases():
    assert canonical("j48") == "c45"
    assert canonical("NB") == "naive_bayes"
    assert canonical("bayesnet") == "bayes_net"
    assert canonical("logreg") == "logistic"
    with pytest.raises(ValueError):
        canonical("svm")


def random_vectors(rng, n):
    rows = []
    for _ in range(n):
        rows.append(
            (
                float(rng.uniform(0, 150)),
                float(rng.uniform(0, 80)),
                float(rng.uniform(0, 900)),
                float(rng.uniform(0, 1200)),
                float(rng.uniform(0, 400)),
                float(rng.uniform(0, 1100)),
                float(rng.exponential(10)),
                f"dev{int(rng.integers(0, 16)):02d}",  # includes unseen owners
                f"src/module_{int(rng.integers(0, 45)):03d}.py",
            )
        )
    return rows


@pytest.mark.parametrize("algorithm", ALGORITHMS)
def test_round_trip_and_purity(algorithm, tmp_path):
    ds = threshold_dataset(600, seed=8)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonConvergenceWarning)
        model = train(algorithm, ds, seed=8)
    path = tmp_path / "model.json"
    model.save(path)
    loaded = TrainedModel.load(path)
    rows = random_vectors(np.random.default_rng(1), 1000)
    a, b = model.probabilities(rows), loaded.probabilities(rows)
    assert np.max(np.abs(a - b)) <= 1e-12
    assert np.all((a >= 0) & (a <= 1))
    assert loaded.to_json() == model.to_json()
    assert model.metadata["records"] == 600


@pytest.mark.parametrize("algorithm", ALGORITHMS)
def test_arity_mismatch(algorithm):
    model = train(algorithm, threshold_dataset(100, seed=1), features=("lines_added", "sloc"))
    with pytest.raises(ArityMismatch):
        model.predict((1.0,))


@pytest.mark.parametrize("algorithm", ALGORITHMS)
def test_training_record_in_pure_region(algorithm):
    ds = threshold_dataset(400, seed=3, noise=0.0)
    model = train(algorithm, ds, features=("lines_added",))
    assert model.predict((100,))[0] == D
    assert model.predict((0,))[0] == C


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 20), st.booleans()), min_size=4, max_size=30))
def test_probabilities_in_unit_interval(pairs):
    values = [v for v, _ in pairs]
    labels = [D if b else C for _, b in pairs]
    if len(set(labels)) < 2:
        return
    ds = make(values, labels)
    for algorithm in ALGORITHMS:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NonConvergenceWarning)
            model = train(algorithm, ds)
        p = model.probabilities([(v,) for v in range(-5, 26)])
        assert np.all((p >= 0) & (p <= 1))
