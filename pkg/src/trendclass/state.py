"""Pipeline state carried between the three workflow steps.

The state is a versioned JSON document.  Floats are written with Python's
shortest round-trip repr, so saving and loading is lossless, and nothing
time- or machine-dependent is stored, so reruns give identical bytes.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .ingest import CleanDataset
from .multi import TargetAssignment
from .rough import Dendrogram, DiscriminantResult
from .trend import TrendFit

STATE_SCHEMA = "trendclass.state"
STATE_VERSION = 1


class StateError(ValueError):
    pass


def _floats(a) -> list:
    return [None if not np.isfinite(v) else float(v) for v in np.asarray(a, dtype=float)]


def _array(v) -> np.ndarray:
    return np.array([np.nan if x is None else x for x in v], dtype=float)


def fit_to_dict(f: TrendFit) -> dict:
    return {
        "degree": f.degree,
        "beta": _floats(f.beta),
        "gamma": _floats(f.gamma),
        "sigma2": f.sigma2,
        "rss": f.rss,
        "clamped": f.clamped,
        "loglik": f.loglik,
        "aic": f.aic,
        "aic_by_degree": {str(k): v for k, v in f.aic_by_degree.items()},
        "fitted": _floats(f.fitted),
        "band_lower": _floats(f.band_lower),
        "band_upper": _floats(f.band_upper),
    }


def fit_from_dict(name: str, d: dict) -> TrendFit:
    return TrendFit(
        variable=name, degree=int(d["degree"]), beta=_array(d["beta"]), gamma=_array(d["gamma"]),
        sigma2=float(d["sigma2"]), loglik=float(d["loglik"]), aic=float(d["aic"]),
        fitted=_array(d["fitted"]), band_lower=_array(d["band_lower"]),
        band_upper=_array(d["band_upper"]), rss=float(d["rss"]), clamped=bool(d["clamped"]),
        aic_by_degree={int(k): float(v) for k, v in d["aic_by_degree"].items()},
    )


@dataclass
class PipelineState:
    dataset: CleanDataset
    raw: Dict[str, np.ndarray]
    fits: Dict[str, TrendFit]
    rough: Optional[DiscriminantResult] = None
    assignment: Optional[TargetAssignment] = None
    icons: Dict[str, int] = field(default_factory=dict)
    config: Dict[str, dict] = field(default_factory=dict)

    # -- the two matrices later steps read, one row per fitted variable
    @property
    def dim(self) -> np.ndarray:
        return np.array([f.dim for f in self.fits.values()], dtype=int).reshape(-1, 2)

    @property
    def coef(self) -> np.ndarray:
        return np.array([f.gamma for f in self.fits.values()], dtype=float).reshape(-1, 4)

    def require(self, step: str):
        if step == "trec2" and not self.fits:
            raise StateError("state has no trend fits; run trec1 first")
        if step == "trec3" and self.rough is None:
            raise StateError("state has no rough groups; run trec2 first")

    def to_dict(self) -> dict:
        ds = self.dataset
        d = {
            "schema": STATE_SCHEMA,
            "version": STATE_VERSION,
            "config": self.config,
            "dataset": {
                "time_labels": _floats(ds.time_labels),
                "name_map": ds.name_map,
                "removed": list(ds.removed),
                "means": ds.means,
                "sds": ds.sds,
                "raw": {k: _floats(v) for k, v in self.raw.items()},
                "Y": {k: _floats(v) for k, v in ds.variables.items()},
            },
            "trec1": {
                "fits": {k: fit_to_dict(f) for k, f in self.fits.items()},
                "variables": list(self.fits),
                "dim": self.dim.tolist(),
                "coef": self.coef.tolist(),
            },
        }
        if self.rough is not None:
            r = self.rough
            d["trec2"] = {
                "method": r.method,
                "n_groups": r.n_groups,
                "targets": r.targets_source,
                "scores": r.scores,
                "groups": r.groups,
                "not_applicable": r.not_applicable,
                "dendrogram": r.dendrogram.to_dict() if r.dendrogram else None,
            }
        if self.assignment is not None:
            a = self.assignment
            d["trec3"] = {
                "targets": a.group_targets,
                "memberships": a.memberships,
                "unclassified": a.unclassified,
                "divergences": [[v, t, L] for (v, t), L in a.divergences.items()],
                "icons": self.icons,
            }
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, allow_nan=False) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineState":
        if not isinstance(d, dict) or d.get("schema") != STATE_SCHEMA:
            raise StateError("not a pipeline state document")
        if d.get("version") != STATE_VERSION:
            raise StateError(f"unsupported state version {d.get('version')!r} "
                             f"(this build reads version {STATE_VERSION})")
        try:
            ds = d["dataset"]
            clean = CleanDataset(_array(ds["time_labels"]),
                                 {k: _array(v) for k, v in ds["Y"].items()},
                                 list(ds["removed"]), dict(ds["name_map"]),
                                 {k: float(v) for k, v in ds["means"].items()},
                                 {k: float(v) for k, v in ds["sds"].items()})
            raw = {k: _array(v) for k, v in ds["raw"].items()}
            t1 = d["trec1"]
            fits = {k: fit_from_dict(k, t1["fits"][k]) for k in t1["variables"]}
            rough = None
            if d.get("trec2"):
                t2 = d["trec2"]
                dend = Dendrogram.from_dict(t2["dendrogram"]) if t2.get("dendrogram") else None
                rough = DiscriminantResult(
                    {k: float(v) for k, v in t2["scores"].items()}, dict(t2["groups"]),
                    t2["method"], int(t2["n_groups"]), dend, list(t2["not_applicable"]),
                    t2["targets"])
            assignment, icons = None, {}
            if d.get("trec3"):
                t3 = d["trec3"]
                assignment = TargetAssignment(
                    {g: list(v) for g, v in t3["targets"].items()},
                    {t: list(v) for t, v in t3["memberships"].items()},
                    {(v, t): float(L) for v, t, L in t3["divergences"]},
                    {g: list(v) for g, v in t3["unclassified"].items()})
                icons = {k: int(v) for k, v in t3["icons"].items()}
        except (KeyError, TypeError, ValueError) as exc:
            raise StateError(f"malformed state document: {exc!r}") from None
        return cls(clean, raw, fits, rough, assignment, icons, dict(d.get("config", {})))

    @classmethod
    def loads(cls, text: str) -> "PipelineState":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise StateError(f"state file is not valid JSON: {exc}") from None
        return cls.from_dict(d)

    def save(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path) -> "PipelineState":
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.loads(fh.read())
        except FileNotFoundError:
            raise StateError(f"no state file at {path}") from None


def removed_report(dataset: CleanDataset) -> List[str]:
    return [f"{dataset.name_map.get(r, '?')} ({r})" for r in dataset.removed]
