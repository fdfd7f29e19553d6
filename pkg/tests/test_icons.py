import json
import warnings

import numpy as np
import pytest

from oracles import central_difference_gradient, softmax_with_reference_direct
from trendclass import icons
from trendclass.icons import (GROUP_ICONS, ICONS, GroupMismatchError, IconModel, IconModelError,
                              assign_icon, build_features, gradient, hessian, load_model,
                              log_likelihood, one_hot, probabilities, save_model, synth_fits,
                              synth_training_set, train)
from trendclass.trend import TrendFit, evaluate_standardized


def make_fit(degree, gamma, N=20):
    gamma = np.array(gamma, dtype=float)
    fitted = evaluate_standardized(gamma, N)
    return TrendFit("x", degree, gamma[: degree + 1], gamma, 0.1, 0.0, 0.0, fitted, fitted, fitted)


def random_model(group, rng, scale=1.0):
    return IconModel(group, rng.normal(0, scale, size=(3, 7)), GROUP_ICONS[group])


def test_catalog_eligibility():
    assert GROUP_ICONS == {"Upward": (3, 4, 5, 10), "Downward": (2, 7, 8, 10), "Flat": (1, 6, 9, 10)}
    assert ICONS[10].glyph == "?" and ICONS[10].shape is None
    assert all(10 in v for v in GROUP_ICONS.values())
    assert sorted({i for v in GROUP_ICONS.values() for i in v}) == list(range(1, 11))


@pytest.mark.parametrize("icon", range(1, 10))
def test_canonical_shapes_span(icon):
    c = ICONS[icon].curve(101)
    if icon == 1:
        assert np.all(c == 0)
    else:
        assert c.min() == pytest.approx(-1) and c.max() == pytest.approx(1)


def test_features():
    assert list(build_features(make_fit(1, [0.3, -0.7, 0, 0]))) == [1, 1, 0, 0.3, -0.7, 0, 0]
    x2 = build_features(make_fit(2, [0.1, 0.2, 0.3, 0]))
    assert (x2[1], x2[2]) == (0, 1)
    x3 = build_features(make_fit(3, [0.1, 0.2, 0.3, 0.4]))
    assert (x3[1], x3[2]) == (0, 0)
    assert list(x3[3:]) == [0.1, 0.2, 0.3, 0.4]


def test_uniform_at_zero():
    m = IconModel("Upward", np.zeros((3, 7)), GROUP_ICONS["Upward"])
    p = m.cell_probabilities(np.arange(7.0))
    assert list(p) == [0.25, 0.25, 0.25, 0.25]


def test_normalization_and_reference_identity(rng):
    for _ in range(1000):
        theta = rng.normal(0, 3, size=(3, 7))
        x = np.concatenate([[1.0], rng.integers(0, 2, 2), rng.normal(0, 3, 4)])
        p = probabilities(theta, x)[0]
        assert abs(p.sum() - 1) <= 1e-12
        assert abs(p[3] - (1 - p[0] - p[1] - p[2])) <= 1e-12


def test_matches_direct_formula(rng):
    for _ in range(200):
        theta = rng.normal(0, 0.5, size=(3, 7))
        x = rng.normal(size=7)
        np.testing.assert_allclose(probabilities(theta, x)[0], softmax_with_reference_direct(theta, x),
                                   rtol=1e-12, atol=1e-15)


def test_large_score_limit():
    theta = np.zeros((3, 7))
    theta[0, 0] = 30.0
    x = np.array([1.0, 0, 0, 0, 0, 0, 0])
    p = probabilities(theta, x)[0]
    direct = softmax_with_reference_direct(theta, x)
    np.testing.assert_allclose(p, direct, rtol=1e-12)
    assert p[0] > 1 - 1e-12
    # overflow-safe where the naive formula is not
    theta[0, 0] = 1000.0
    assert probabilities(theta, x)[0][0] == 1.0


def test_gradient_matches_finite_differences(rng):
    X = np.column_stack([np.ones(40), rng.integers(0, 2, 40), rng.integers(0, 2, 40),
                         rng.normal(size=(40, 4))])
    A = one_hot(rng.choice([3, 4, 5, 10], 40), (3, 4, 5, 10))
    for _ in range(20):
        theta = rng.normal(0, 0.5, size=(3, 7))
        g = gradient(theta, X, A, ridge=1e-3)
        fd = central_difference_gradient(lambda t: log_likelihood(t, X, A, ridge=1e-3), theta)
        assert np.linalg.norm(g - fd) / np.linalg.norm(fd) < 1e-5


def test_hessian_matches_gradient_differences(rng):
    X = np.column_stack([np.ones(30), rng.normal(size=(30, 6))])
    A = one_hot(rng.choice([1, 6, 9, 10], 30), (1, 6, 9, 10))
    theta = rng.normal(0, 0.3, size=(3, 7))
    H = hessian(theta, X, ridge=1e-2)
    h = 1e-6
    for i in range(21):
        e = np.zeros(21)
        e[i] = h
        col = (gradient((theta.ravel() + e).reshape(3, 7), X, A, 1e-2)
               - gradient((theta.ravel() - e).reshape(3, 7), X, A, 1e-2)).ravel() / (2 * h)
        np.testing.assert_allclose(H[:, i], col, rtol=1e-5, atol=1e-6)


def separable_data(rng, n=60):
    centers = {3: [4, 0, 0, 0], 4: [0, 4, 0, 0], 5: [0, 0, 4, 0], 10: [0, 0, 0, 4]}
    data = []
    for icon, c in centers.items():
        for _ in range(n):
            g = np.array(c) + rng.normal(0, 0.5, 4)
            data.append((np.concatenate([[1, 0, 0], g]), icon))
    return data


def test_training_separable(rng):
    data = separable_data(rng)
    model = train("Upward", data)
    X = np.array([x for x, _ in data])
    y = np.array([lab for _, lab in data])
    acc = np.mean([model.predict(x) == lab for x, lab in data])
    # nearest-centroid sanity bound on the same data
    cents = {c: X[y == c].mean(axis=0) for c in (3, 4, 5, 10)}
    nc = np.mean([min(cents, key=lambda c: np.linalg.norm(x - cents[c])) == lab for x, lab in data])
    assert acc >= 0.99 and acc >= nc - 0.01
    assert model.training_meta["converged"]
    assert model.training_meta["grad_norm"] <= 1e-6


def test_trace_non_decreasing(rng):
    data = synth_training_set("Flat", 30, 0.3, seed=4)
    X = np.array([x for x, _ in data])
    A = one_hot([lab for _, lab in data], GROUP_ICONS["Flat"])
    res = icons.fit_multinomial(X, A)
    assert all(b >= a for a, b in zip(res.trace, res.trace[1:]))
    assert res.converged


def test_missing_category_rejected(rng):
    data = [(x, 3) for x, _ in separable_data(rng, 5)]
    with pytest.raises(IconModelError, match="zero examples"):
        train("Upward", data)


def test_ineligible_label_rejected(rng):
    data = separable_data(rng, 5) + [(np.ones(7), 7)]
    with pytest.raises(IconModelError, match="not eligible"):
        train("Upward", data)


@pytest.mark.parametrize("group,slope,expected", [
    ("Upward", 0.8, 4), ("Upward", 1e-9, 4),
    ("Downward", -0.8, 7),
    ("Flat", 0.05, 1), ("Flat", -0.1, 1), ("Flat", 0.1, 1),
])
def test_overrides(group, slope, expected, rng):
    fit = make_fit(1, [0.0, slope, 0, 0])
    for _ in range(5):
        assert assign_icon(group, fit, random_model(group, rng, 5.0)) == expected


@pytest.mark.parametrize("group,slope", [("Upward", -0.3), ("Upward", 0.0), ("Downward", 0.4),
                                         ("Downward", 0.0), ("Flat", 0.2), ("Flat", -0.11)])
def test_non_matching_linear_falls_through(group, slope, rng):
    fit = make_fit(1, [0.0, slope, 0, 0])
    model = random_model(group, rng)
    assert assign_icon(group, fit, model) == model.predict(build_features(fit))


def test_override_ignores_parameters(rng):
    fit = make_fit(1, [0.2, 1.3, 0, 0])
    model = random_model("Upward", rng, 10.0)
    for perm in ([2, 0, 1], [1, 2, 0]):
        shuffled = IconModel("Upward", model.theta[perm], model.category_icons)
        assert assign_icon("Upward", fit, shuffled) == 4


def test_cubic_uses_discriminator():
    model = train("Downward", synth_training_set("Downward", 40, 0.15, seed=11))
    fit = make_fit(3, [0.9, -1.0, -2.5, 1.2])
    p = model.cell_probabilities(build_features(fit))
    direct = softmax_with_reference_direct(model.theta, build_features(fit))
    np.testing.assert_allclose(p, direct, rtol=1e-10)
    assert assign_icon("Downward", fit, model) == (2, 7, 8, 10)[int(np.argmax(direct))]


def test_argmax_tie_goes_to_lower_icon():
    theta = np.zeros((3, 7))
    theta[1, 0] = theta[2, 0] = 2.0
    model = IconModel("Flat", theta, GROUP_ICONS["Flat"])
    assert model.predict(np.array([1.0, 0, 0, 0, 0, 0, 0])) == 6


def test_argmax_invariant_under_positive_scaling(rng):
    for _ in range(200):
        theta = rng.normal(size=(3, 7))
        x = rng.normal(size=7)
        base = np.argmax(np.append(theta @ x, 0.0))
        for c in (0.01, 0.5, 3.0, 100.0):
            assert np.argmax(probabilities(c * theta, x)[0]) == base


def test_group_mismatch(rng):
    with pytest.raises(GroupMismatchError):
        assign_icon("Downward", make_fit(2, [0, 1, 1, 0]), random_model("Upward", rng))


def test_synth_counts_and_determinism():
    a = synth_training_set("Upward", 50, 0.2, seed=3)
    assert len(a) == 200
    assert sorted({lab for _, lab in a}) == [3, 4, 5, 10]
    assert all(sum(lab == c for _, lab in a) == 50 for c in (3, 4, 5, 10))
    b = synth_training_set("Upward", 50, 0.2, seed=3)
    assert all(np.array_equal(x, y) and la == lb for (x, la), (y, lb) in zip(a, b))


@pytest.mark.parametrize("group", ["Upward", "Downward", "Flat"])
def test_synth_noiseless_recovers_shape(group):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for fit, icon in synth_fits(group, 5, 0.0, seed=1):
            if icon == 10:
                continue
            c = ICONS[icon].curve(fit.N)
            z = np.zeros_like(c) if icon == 1 else (c - c.mean()) / c.std(ddof=1)
            assert np.max(np.abs(fit.fitted - z)) < 1e-6


def test_model_round_trip(rng):
    m = train("Flat", synth_training_set("Flat", 20, 0.2, seed=2), seed=2)
    doc = save_model(m)
    back = load_model(doc)
    assert np.array_equal(back.theta, m.theta)
    assert back.group == m.group and back.category_icons == m.category_icons
    assert back.training_meta == json.loads(json.dumps(m.training_meta))
    assert save_model(back) == doc


def test_truncated_and_wrong_version(rng):
    doc = save_model(random_model("Upward", rng))
    with pytest.raises(IconModelError):
        load_model(doc[: len(doc) // 2])
    d = json.loads(doc)
    d["version"] = 99
    with pytest.raises(IconModelError, match="version"):
        load_model(json.dumps(d))
    del d["theta"]
    d["version"] = 1
    with pytest.raises(IconModelError, match="theta"):
        load_model(json.dumps(d))


def test_loaded_model_applied_to_wrong_group(rng):
    m = load_model(save_model(random_model("Upward", rng)))
    with pytest.raises(GroupMismatchError):
        assign_icon("Downward", make_fit(3, [0, -1, 0.5, 0.2]), m)


@pytest.mark.parametrize("group", ["Upward", "Downward", "Flat"])
def test_bundled_models(group):
    m = icons.load_model_for(group)
    assert m.group == group
    assert m.training_meta["converged"]
