"""Assign every trend in a rough group to its nearest user-chosen target trend."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Sequence, Tuple

from .rough import ClassificationError, divergence, normalize_group


@dataclass
class TargetAssignment:
    group_targets: Dict[str, List[str]]
    memberships: Dict[str, List[str]]
    divergences: Dict[Tuple[str, str], float]
    unclassified: Dict[str, List[str]] = field(default_factory=dict)

    def target_of(self, variable: str) -> str:
        for target, members in self.memberships.items():
            if variable in members:
                return target
        raise KeyError(variable)

    def group_of_target(self, target: str) -> str:
        for g, targets in self.group_targets.items():
            if target in targets:
                return g
        raise KeyError(target)


def classify_to_targets(fits: Mapping, rough_groups: Mapping[str, str],
                        tvar: Mapping[str, Sequence[str]]) -> TargetAssignment:
    """Nearest-target assignment within each rough group.

    A group missing from ``tvar`` is left unclassified with a warning; a group
    listed with no targets while it has members is an error.  Exact ties go to
    the earliest-listed target.
    """
    tvar = {normalize_group(g): list(names) for g, names in tvar.items()}
    members_by_group: Dict[str, List[str]] = {}
    for v, g in rough_groups.items():
        members_by_group.setdefault(g, []).append(v)

    for g, targets in tvar.items():
        if len(set(targets)) != len(targets):
            raise ClassificationError(f"duplicate target in group {g}")
        for t in targets:
            if t not in rough_groups:
                raise ClassificationError(f"target {t} is not a classified variable")
            if rough_groups[t] != g:
                raise ClassificationError(
                    f"target {t} belongs to group {rough_groups[t]}, not {g}")
        if not targets and members_by_group.get(g):
            raise ClassificationError(f"group {g} has members but no target trends")

    memberships: Dict[str, List[str]] = {}
    divergences: Dict[Tuple[str, str], float] = {}
    unclassified: Dict[str, List[str]] = {}
    for g, members in members_by_group.items():
        targets = tvar.get(g)
        if targets is None:
            warnings.warn(f"no target trends given for group {g}; its members stay unclassified",
                          stacklevel=2)
            unclassified[g] = list(members)
            continue
        for t in targets:
            memberships[t] = []
        for v in members:
            best, best_d = None, None
            for t in targets:
                d = divergence(fits[v].fitted, fits[t].fitted)
                divergences[(v, t)] = d
                if best_d is None or d < best_d:
                    best, best_d = t, d
            memberships[best].append(v)
    group_targets = {g: list(tvar[g]) for g in tvar if g in members_by_group}
    return TargetAssignment(group_targets, memberships, divergences, unclassified)
