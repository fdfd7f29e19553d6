"""Icon assignment by per-group multinomial logistic discriminators.

Each rough group has four eligible icons; the last one (icon 10, "?") is the
reference category whose linear score is fixed at zero.  A trend is turned
into the seven-entry feature vector

    (1, [degree == 1], [degree == 2], gamma_0, gamma_1, gamma_2, gamma_3)

where gamma are the trend coefficients on time rescaled to [0, 1].  Linear
trends are handled by fixed slope rules before the discriminator is asked.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .rough import DOWNWARD, FLAT, UPWARD, normalize_group
from .trend import TrendFit, evaluate_standardized, select_degree

N_FEATURES = 7
MODEL_SCHEMA = "trendclass.icon-model"
MODEL_VERSION = 1
DEFAULT_RIDGE = 1e-4
FLAT_SLOPE_LIMIT = 0.1
UNKNOWN_ICON = 10


@dataclass(frozen=True)
class Icon:
    id: int
    name: str
    glyph: str
    # coefficients in s on [0, 1], lowest power first; None for "?"
    shape: Optional[Tuple[float, ...]]

    def curve(self, N: int) -> Optional[np.ndarray]:
        if self.shape is None:
            return None
        return evaluate_standardized(self.shape, N)


# Shapes span [-1, 1]; only their form matters since series are z-scored.
ICONS: Dict[int, Icon] = {
    1: Icon(1, "flat", "-", (0.0,)),
    2: Icon(2, "decelerating decrease", "↘⌣", (1.0, -4.0, 2.0)),
    3: Icon(3, "accelerating increase", "⌣↗", (-1.0, 0.0, 2.0)),
    4: Icon(4, "linear increase", "↗", (-1.0, 2.0)),
    5: Icon(5, "decelerating increase", "↗⌢", (-1.0, 4.0, -2.0)),
    6: Icon(6, "hump", "⌢", (-1.0, 8.0, -8.0)),
    7: Icon(7, "linear decrease", "↘", (1.0, -2.0)),
    8: Icon(8, "accelerating decrease", "⌢↘", (1.0, 0.0, -2.0)),
    9: Icon(9, "dip", "⌣", (1.0, -8.0, 8.0)),
    10: Icon(10, "none of the above", "?", None),
}

# category order for each discriminator; the last entry is the reference
GROUP_ICONS: Dict[str, Tuple[int, int, int, int]] = {
    UPWARD: (3, 4, 5, 10),
    DOWNWARD: (2, 7, 8, 10),
    FLAT: (1, 6, 9, 10),
}


class IconModelError(ValueError):
    pass


class GroupMismatchError(IconModelError):
    pass


def build_features(fit: TrendFit) -> np.ndarray:
    gamma = np.zeros(4)
    g = np.asarray(fit.gamma, dtype=float)
    gamma[: fit.degree + 1] = g[: fit.degree + 1]
    return np.array([1.0, float(fit.degree == 1), float(fit.degree == 2), *gamma])


# ---------------------------------------------------------------------------
# likelihood


def linear_scores(theta: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Scores for all four categories; the reference column is zero."""
    X = np.atleast_2d(X)
    eta = X @ np.asarray(theta).T
    return np.hstack([eta, np.zeros((X.shape[0], 1))])


def probabilities(theta: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Row-wise cell probabilities, stabilized by subtracting the max score."""
    eta = linear_scores(theta, X)
    eta -= eta.max(axis=1, keepdims=True)
    e = np.exp(eta)
    return e / e.sum(axis=1, keepdims=True)


def one_hot(labels: Sequence[int], category_icons: Sequence[int]) -> np.ndarray:
    index = {icon: j for j, icon in enumerate(category_icons)}
    A = np.zeros((len(labels), len(category_icons)))
    for i, lab in enumerate(labels):
        A[i, index[int(lab)]] = 1.0
    return A


def log_likelihood(theta, X, A, ridge: float = 0.0) -> float:
    """Multinomial log-likelihood minus ridge * |theta|^2 / 2."""
    theta = np.asarray(theta, dtype=float).reshape(3, N_FEATURES)
    eta = linear_scores(theta, X)
    m = eta.max(axis=1, keepdims=True)
    lse = (m + np.log(np.exp(eta - m).sum(axis=1, keepdims=True))).ravel()
    return float(np.sum(A * eta) - lse.sum() - 0.5 * ridge * np.sum(theta * theta))


def gradient(theta, X, A, ridge: float = 0.0) -> np.ndarray:
    theta = np.asarray(theta, dtype=float).reshape(3, N_FEATURES)
    P = probabilities(theta, X)
    return ((A - P)[:, :3].T @ X) - ridge * theta


def hessian(theta, X, ridge: float = 0.0) -> np.ndarray:
    """Hessian of :func:`log_likelihood` w.r.t. theta flattened row-major (21 x 21)."""
    theta = np.asarray(theta, dtype=float).reshape(3, N_FEATURES)
    P = probabilities(theta, X)[:, :3]
    H = np.zeros((3, N_FEATURES, 3, N_FEATURES))
    for j in range(3):
        for l in range(3):
            w = P[:, j] * ((j == l) - P[:, l])
            H[j, :, l, :] = -(X * w[:, None]).T @ X
    H = H.reshape(3 * N_FEATURES, 3 * N_FEATURES)
    H -= ridge * np.eye(3 * N_FEATURES)
    return H


# ---------------------------------------------------------------------------
# model


@dataclass
class IconModel:
    group: str
    theta: np.ndarray
    category_icons: Tuple[int, ...]
    training_meta: Dict = field(default_factory=dict)

    def __post_init__(self):
        self.group = normalize_group(self.group)
        self.theta = np.asarray(self.theta, dtype=float)
        self.category_icons = tuple(int(i) for i in self.category_icons)
        if self.theta.shape != (3, N_FEATURES):
            raise IconModelError(f"theta must be 3 x {N_FEATURES}, got {self.theta.shape}")
        if not np.all(np.isfinite(self.theta)):
            raise IconModelError("theta contains non-finite values")
        if self.category_icons != GROUP_ICONS[self.group]:
            raise IconModelError(
                f"categories {self.category_icons} do not match group {self.group} "
                f"({GROUP_ICONS[self.group]})")

    def cell_probabilities(self, x) -> np.ndarray:
        return probabilities(self.theta, np.asarray(x, dtype=float))[0]

    def predict(self, x) -> int:
        """Most probable icon; ties go to the lower icon id."""
        p = self.cell_probabilities(x)
        best = max(range(4), key=lambda j: (p[j], -self.category_icons[j]))
        return self.category_icons[best]


def cell_probabilities(model: IconModel, x) -> np.ndarray:
    return model.cell_probabilities(x)


@dataclass
class TrainResult:
    theta: np.ndarray
    converged: bool
    iterations: int
    grad_norm: float
    trace: List[float]


def fit_multinomial(X, A, ridge: float = DEFAULT_RIDGE, tol: float = 1e-6,
                    max_iter: int = 200) -> TrainResult:
    """Damped Newton ascent on the penalized log-likelihood from theta = 0.

    Each step is halved until the objective does not decrease, so the
    recorded trace is non-decreasing.
    """
    X = np.asarray(X, dtype=float)
    A = np.asarray(A, dtype=float)
    theta = np.zeros((3, N_FEATURES))
    ll = log_likelihood(theta, X, A, ridge)
    trace = [ll]
    g = gradient(theta, X, A, ridge)
    it = 0
    while np.linalg.norm(g) > tol and it < max_iter:
        it += 1
        H = hessian(theta, X, ridge)
        try:
            step = np.linalg.solve(H, -g.ravel()).reshape(theta.shape)
        except np.linalg.LinAlgError:
            step = g / max(np.linalg.norm(g), 1.0)
        t = 1.0
        while True:
            cand = theta + t * step
            ll_new = log_likelihood(cand, X, A, ridge)
            if ll_new >= ll or t < 1e-10:
                break
            t *= 0.5
        if ll_new < ll:
            break
        theta, ll = cand, ll_new
        trace.append(ll)
        g = gradient(theta, X, A, ridge)
    gn = float(np.linalg.norm(g))
    return TrainResult(theta, gn <= tol, it, gn, trace)


def train(group: str, data: Sequence[Tuple[np.ndarray, int]], ridge: float = DEFAULT_RIDGE,
          tol: float = 1e-6, max_iter: int = 200, seed: Optional[int] = None) -> IconModel:
    """Maximum-likelihood discriminator for one rough group.

    ``data`` is a sequence of (feature vector, icon id).  Every icon eligible
    for the group needs at least one example.
    """
    group = normalize_group(group)
    cats = GROUP_ICONS[group]
    if not data:
        raise IconModelError("no training data")
    X = np.array([np.asarray(x, dtype=float) for x, _ in data])
    labels = [int(lab) for _, lab in data]
    bad = sorted({lab for lab in labels if lab not in cats})
    if bad:
        raise IconModelError(f"icons {bad} are not eligible for group {group} {cats}")
    empty = [c for c in cats if c not in labels]
    if empty:
        raise IconModelError(f"category with zero examples: icon(s) {empty} in group {group}")
    if X.shape[1] != N_FEATURES:
        raise IconModelError(f"feature vectors must have {N_FEATURES} entries")
    res = fit_multinomial(X, one_hot(labels, cats), ridge=ridge, tol=tol, max_iter=max_iter)
    if not res.converged:
        warnings.warn(f"{group} discriminator did not converge "
                      f"(gradient norm {res.grad_norm:.3g} after {res.iterations} iterations)",
                      stacklevel=2)
    acc = float(np.mean(np.array(cats)[np.argmax(probabilities(res.theta, X), axis=1)]
                        == np.array(labels)))
    meta = {
        "n_samples": len(labels),
        "counts": {str(c): labels.count(c) for c in cats},
        "converged": res.converged,
        "iterations": res.iterations,
        "grad_norm": res.grad_norm,
        "log_likelihood": res.trace[-1],
        "ridge": ridge,
        "train_accuracy": acc,
        "seed": seed,
    }
    return IconModel(group, res.theta, cats, meta)


# ---------------------------------------------------------------------------
# assignment


def override_icon(group: str, fit: TrendFit) -> Optional[int]:
    """Fixed slope rules for linear trends; None when the discriminator decides."""
    if fit.degree != 1:
        return None
    slope = float(fit.gamma[1])
    if group == UPWARD and slope > 0:
        return 4
    if group == DOWNWARD and slope < 0:
        return 7
    if group == FLAT and abs(slope) <= FLAT_SLOPE_LIMIT:
        return 1
    return None


def assign_icon(group: str, fit: TrendFit, model: IconModel) -> int:
    group = normalize_group(group)
    if model.group != group:
        raise GroupMismatchError(f"model trained for {model.group} applied to {group}")
    icon = override_icon(group, fit)
    if icon is not None:
        return icon
    return model.predict(build_features(fit))


# ---------------------------------------------------------------------------
# synthetic training data


def _zscore(y: np.ndarray) -> np.ndarray:
    sd = y.std(ddof=1)
    if sd == 0:
        return np.zeros_like(y)
    return (y - y.mean()) / sd


def _canonical_curves(group: str, N: int) -> List[np.ndarray]:
    return [_zscore(ICONS[i].curve(N)) for i in GROUP_ICONS[group] if ICONS[i].shape is not None]


def _odd_shape(rng: np.random.Generator, group: str, N: int, min_dist: float) -> np.ndarray:
    """A cubic trend whose shape is far from every canonical shape of the group."""
    s = np.linspace(0.0, 1.0, N)
    canon = [c for c in _canonical_curves(group, N) if np.any(c)]
    while True:
        # an S-curve or wave with a random slope tilt and orientation
        roots = np.sort(rng.uniform(-0.1, 1.1, size=3))
        y = np.prod([s - r for r in roots], axis=0) * rng.choice([-1.0, 1.0])
        y = _zscore(y) + rng.normal(0.0, 0.5) * _zscore(s)
        z = _zscore(y)
        if min(np.mean((z - c) ** 2) for c in canon) >= min_dist:
            return y


def synth_series(group: str, icon: int, N: int, noise_sd: float,
                 rng: np.random.Generator, min_dist: float = 0.6) -> np.ndarray:
    if icon == UNKNOWN_ICON:
        base = _odd_shape(rng, group, N, min_dist)
    else:
        base = ICONS[icon].curve(N)
    amp = rng.uniform(0.75, 1.25)
    return amp * base + rng.normal(0.0, noise_sd, size=N)


def synth_fits(group: str, n_per_icon: int, noise_sd: float, seed: int = 0,
               n_range: Tuple[int, int] = (15, 40)) -> List[Tuple[TrendFit, int]]:
    """Trend fits of noisy canonical shapes, labeled with the generating icon.

    Each series is z-scored and trend-fitted exactly as observed variables
    are, so the resulting features share their scale.  Series lengths are
    drawn from ``n_range``.
    """
    group = normalize_group(group)
    rng = np.random.default_rng(seed)
    out: List[Tuple[TrendFit, int]] = []
    for icon in GROUP_ICONS[group]:
        for _ in range(n_per_icon):
            N = int(rng.integers(n_range[0], n_range[1] + 1))
            y = synth_series(group, icon, N, noise_sd, rng)
            out.append((select_degree(_zscore(y)), icon))
    return out


def synth_training_set(group: str, n_per_icon: int, noise_sd: float, seed: int = 0,
                       n_range: Tuple[int, int] = (15, 40)) -> List[Tuple[np.ndarray, int]]:
    return [(build_features(fit), icon)
            for fit, icon in synth_fits(group, n_per_icon, noise_sd, seed, n_range)]


# ---------------------------------------------------------------------------
# persistence


def model_to_dict(model: IconModel) -> dict:
    return {
        "schema": MODEL_SCHEMA,
        "version": MODEL_VERSION,
        "group": model.group,
        "category_icons": list(model.category_icons),
        "theta": [[float(v) for v in row] for row in model.theta],
        "training": model.training_meta,
    }


def save_model(model: IconModel) -> str:
    """JSON text; floats use shortest round-trip repr, so theta reloads exactly."""
    return json.dumps(model_to_dict(model), indent=2, allow_nan=False) + "\n"


def load_model(document: str) -> IconModel:
    try:
        d = json.loads(document)
    except json.JSONDecodeError as exc:
        raise IconModelError(f"model document is not valid JSON: {exc}") from None
    if not isinstance(d, dict) or d.get("schema") != MODEL_SCHEMA:
        raise IconModelError("not an icon model document")
    if d.get("version") != MODEL_VERSION:
        raise IconModelError(f"unsupported model version {d.get('version')!r}, "
                             f"expected {MODEL_VERSION}")
    try:
        return IconModel(d["group"], np.array(d["theta"], dtype=float),
                         tuple(d["category_icons"]), dict(d.get("training", {})))
    except KeyError as exc:
        raise IconModelError(f"model document lacks field {exc}") from None


def model_filename(group: str) -> str:
    return f"{normalize_group(group).lower()}.json"


def default_model_dir():
    return resources.files("trendclass") / "data" / "models"


def load_model_for(group: str, model_dir=None) -> IconModel:
    base = Path(model_dir) if model_dir is not None else default_model_dir()
    path = base / model_filename(group)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise IconModelError(f"no model file for group {normalize_group(group)} at {path}") from None
    model = load_model(text)
    if model.group != normalize_group(group):
        raise GroupMismatchError(f"{path} holds a {model.group} model")
    return model


def assign_icons(assignment, rough_groups: Mapping[str, str], fits: Mapping[str, TrendFit],
                 model_dir=None) -> Dict[str, int]:
    """Icon for every target trend of a target assignment."""
    models: Dict[str, IconModel] = {}
    icons: Dict[str, int] = {}
    for group, targets in assignment.group_targets.items():
        for target in targets:
            if group not in models:
                models[group] = load_model_for(group, model_dir)
            icons[target] = assign_icon(group, fits[target], models[group])
    return icons
