"""Rough classification of estimated trends into Upward / Flat / Downward.

Every trend is scored against an increasing reference T1 and a decreasing
reference T2 by

    D = sum_n (T2(n) - t(n))^2 - sum_n (T1(n) - t(n))^2,

so positive scores lean towards T1.  Groups come either straight from the
scores or from centroid-linkage agglomerative clustering of the scalar
scores.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

UPWARD, FLAT, DOWNWARD = "Upward", "Flat", "Downward"
GROUP_LABELS = (DOWNWARD, UPWARD, FLAT)


class ClassificationError(ValueError):
    pass


def normalize_group(label: str) -> str:
    """Map a case-insensitive group word onto its canonical spelling."""
    for g in GROUP_LABELS:
        if label.strip().lower() == g.lower():
            return g
    raise ClassificationError(f"unknown group {label!r}; expected one of {', '.join(GROUP_LABELS)}")


@dataclass
class TargetPair:
    T1: np.ndarray
    T2: np.ndarray
    source: str = "default"

    def __post_init__(self):
        self.T1 = np.asarray(self.T1, dtype=float)
        self.T2 = np.asarray(self.T2, dtype=float)
        if self.T1.shape != self.T2.shape:
            raise ClassificationError("reference trends differ in length")
        if np.array_equal(self.T1, self.T2):
            raise ClassificationError("reference trends must differ")


def default_targets(N: int) -> TargetPair:
    """Straight lines from -1 to +1 (T1) and its mirror image (T2)."""
    if N < 2:
        raise ClassificationError("need at least two time steps")
    T1 = np.linspace(-1.0, 1.0, N)
    return TargetPair(T1, -T1, "default")


def user_targets(pvar: Sequence[str], fits: Mapping) -> TargetPair:
    """Use the fitted trends of two chosen variables as T1 and T2."""
    if len(pvar) != 2:
        raise ClassificationError("pvar needs exactly two variable names")
    a, b = pvar
    missing = [p for p in (a, b) if p not in fits]
    if missing:
        raise ClassificationError(
            f"unknown variable(s) {', '.join(missing)}; available: {', '.join(fits)}")
    if a == b:
        raise ClassificationError("pvar must name two different variables")
    return TargetPair(fits[a].fitted, fits[b].fitted, f"user({a},{b})")


def divergence(t, T) -> float:
    """Sum of squared differences between two trends."""
    t = np.asarray(t, dtype=float)
    T = np.asarray(T, dtype=float)
    if t.shape != T.shape:
        raise ClassificationError(f"trend length {t.shape} does not match reference {T.shape}")
    d = T - t
    return float(d @ d)


def _trend(fit_or_values) -> np.ndarray:
    return np.asarray(getattr(fit_or_values, "fitted", fit_or_values), dtype=float)


def discriminant_scores(fits: Mapping, targets: TargetPair) -> Dict[str, float]:
    """D for each variable; accepts TrendFits or raw trend arrays."""
    scores = {}
    for name, f in fits.items():
        t = _trend(f)
        scores[name] = divergence(t, targets.T2) - divergence(t, targets.T1)
    return scores


@dataclass
class Merge:
    left: int
    right: int
    height: float
    size: int


@dataclass
class Dendrogram:
    """Agglomeration history in linkage-matrix convention.

    Leaves are 0..n-1 (in ``leaves`` order); merge k creates node n + k.
    """

    leaves: List[str]
    merges: List[Merge]

    def children(self, node: int) -> Tuple[int, int]:
        m = self.merges[node - len(self.leaves)]
        return m.left, m.right

    def height(self, node: int) -> float:
        n = len(self.leaves)
        return 0.0 if node < n else self.merges[node - n].height

    @property
    def root(self) -> int:
        return len(self.leaves) + len(self.merges) - 1

    def leaf_order(self) -> List[str]:
        """Left-to-right leaf order of the drawn tree (no crossing edges)."""
        n = len(self.leaves)
        out: List[str] = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            if node < n:
                out.append(self.leaves[node])
            else:
                left, right = self.children(node)
                stack.extend((right, left))
        return out

    def to_text(self) -> str:
        """Nested-parenthesis form, e.g. ``((V1,V2):0.5,V3):4.25;``."""
        n = len(self.leaves)

        def rec(node: int) -> str:
            if node < n:
                return self.leaves[node]
            left, right = self.children(node)
            return f"({rec(left)},{rec(right)}):{self.height(node)!r}"

        if not self.merges:
            return f"{self.leaves[0]};" if self.leaves else ";"
        return rec(self.root) + ";"

    def to_dict(self) -> dict:
        return {"leaves": list(self.leaves),
                "merges": [[m.left, m.right, m.height, m.size] for m in self.merges]}

    @classmethod
    def from_dict(cls, d: dict) -> "Dendrogram":
        return cls(list(d["leaves"]), [Merge(int(a), int(b), float(h), int(s))
                                        for a, b, h, s in d["merges"]])


@dataclass
class DiscriminantResult:
    scores: Dict[str, float]
    groups: Dict[str, str]
    method: str
    n_groups: int
    dendrogram: Optional[Dendrogram] = None
    not_applicable: List[str] = field(default_factory=list)
    targets_source: str = "default"

    def members(self, label: str) -> List[str]:
        return [v for v, g in self.groups.items() if g == label]


def _labels_for(n_groups: int) -> Tuple[str, ...]:
    if n_groups == 2:
        return (UPWARD, DOWNWARD)
    if n_groups == 3:
        return (UPWARD, FLAT, DOWNWARD)
    raise ClassificationError("groups must be 2 or 3")


def classify_by_sign(scores: Mapping[str, float], groups: int = 2,
                     fits: Mapping | None = None,
                     targets: TargetPair | None = None) -> DiscriminantResult:
    """Discriminant-only grouping.

    Two groups: Upward iff D > 0.  Three groups: each trend goes to the
    nearest of {T1, zero trend, T2} by divergence, which needs ``fits`` and
    ``targets``; ties resolve in the order Upward, Flat, Downward.
    """
    if not scores:
        raise ClassificationError("no scores to classify")
    labels = _labels_for(groups)
    out: Dict[str, str] = {}
    if groups == 2:
        for v, d in scores.items():
            out[v] = UPWARD if d > 0 else DOWNWARD
    else:
        if fits is None or targets is None:
            raise ClassificationError("three-group discrimination needs fits and targets")
        flat = np.zeros_like(targets.T1)
        for v in scores:
            t = _trend(fits[v])
            dists = (divergence(t, targets.T1), divergence(t, flat), divergence(t, targets.T2))
            out[v] = labels[int(np.argmin(dists))]
    empty = [g for g in labels if g not in out.values()]
    return DiscriminantResult(dict(scores), out, "discriminant-only", groups,
                              not_applicable=empty,
                              targets_source=targets.source if targets else "default")


def centroid_linkage(values: Sequence[float], names: Sequence[str] | None = None) -> Dendrogram:
    """Agglomerative clustering of scalars with centroid linkage.

    The distance between clusters is the absolute difference of their means.
    Exact ties go to the pair whose smallest member indices are
    lexicographically smallest.
    """
    x = np.asarray(values, dtype=float)
    n = len(x)
    if names is None:
        names = [str(i) for i in range(n)]
    if n == 0:
        raise ClassificationError("nothing to cluster")
    # active clusters as parallel arrays, kept sorted by smallest member index
    node = list(range(n))
    first = list(range(n))
    total = list(x)
    size = [1] * n
    merges: List[Merge] = []
    while len(node) > 1:
        c = np.array(total) / np.array(size)
        dist = np.abs(c[:, None] - c[None, :])
        np.fill_diagonal(dist, np.inf)
        # row-major argmin over the upper triangle = lexicographic tie-break
        dist[np.tril_indices(len(node))] = np.inf
        i, j = divmod(int(np.argmin(dist)), len(node))
        merges.append(Merge(node[i], node[j], float(dist[i, j]), size[i] + size[j]))
        new_id = n + len(merges) - 1
        node[i], total[i], size[i] = new_id, total[i] + total[j], size[i] + size[j]
        first[i] = min(first[i], first[j])
        for arr in (node, first, total, size):
            del arr[j]
    return Dendrogram(list(names), merges)


def cut_tree(dend: Dendrogram, k: int) -> List[List[int]]:
    """Clusters (as leaf index lists) left after undoing the last k - 1 merges."""
    n = len(dend.leaves)
    if not 1 <= k <= n:
        raise ClassificationError(f"cannot cut {n} leaves into {k} clusters")
    clusters = {i: [i] for i in range(n)}
    for step, m in enumerate(dend.merges[: n - k]):
        clusters[n + step] = clusters.pop(m.left) + clusters.pop(m.right)
    return sorted((sorted(c) for c in clusters.values()), key=lambda c: c[0])


def centroid_cluster(scores: Mapping[str, float], k: int = 2) -> DiscriminantResult:
    """Cluster the scores and label clusters by their mean score.

    Highest mean is Upward, lowest Downward, the middle one (k = 3) Flat.
    """
    labels = _labels_for(k)
    names = list(scores)
    if len(names) < k:
        raise ClassificationError(f"need at least {k} variables to form {k} groups, got {len(names)}")
    values = np.array([scores[v] for v in names])
    dend = centroid_linkage(values, names)
    clusters = cut_tree(dend, k)
    # ascending mean; the later-listed cluster wins a tie for the higher label
    ranked = sorted(range(k), key=lambda c: (values[clusters[c]].mean(), c), reverse=True)
    groups: Dict[str, str] = {}
    for label, c in zip(labels, ranked):
        for i in clusters[c]:
            groups[names[i]] = label
    ordered = {v: groups[v] for v in names}
    return DiscriminantResult(dict(scores), ordered, "clustering", k, dendrogram=dend)


def rough_classify(fits: Mapping, groups: int = 2, clustering: bool = True,
                   pvar: Sequence[str] | None = None) -> DiscriminantResult:
    """Targets, scores and grouping in one call, as the second workflow step runs it."""
    if not fits:
        raise ClassificationError("no trends to classify")
    N = len(_trend(next(iter(fits.values()))))
    targets = user_targets(pvar, fits) if pvar else default_targets(N)
    scores = discriminant_scores(fits, targets)
    if clustering:
        res = centroid_cluster(scores, groups)
        res.targets_source = targets.source
    else:
        res = classify_by_sign(scores, groups, fits=fits, targets=targets)
    return res
