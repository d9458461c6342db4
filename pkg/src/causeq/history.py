"""Analysis snapshots on disk and the superimposed-adjacency comparison.

A snapshot freezes one analysis: the query, the fitted model, the edited
graph, the feedback trail, and the diagnostics records.  Comparing two
snapshots yields one cell per ordered type pair over the vocabulary
union; each cell lands in exactly one of five situations (only_first,
only_second, both_diff, both_same, neither) judged on the raw causal
strengths with a relative tolerance for "same".
"""

import json
import re
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from .diagnostics import DiagnosticsRecord
from .events import Query
from .hawkes import CausalGraph, HawkesModel
from .learner import FeedbackSet

DEFAULT_EPSILON = 0.05


class SnapshotNotFound(KeyError):
    pass


@dataclass
class AnalysisSnapshot:
    id: str
    created_at: str
    vocabulary: list
    query: Query
    graph: CausalGraph
    feedback_history: list
    diagnostics: list
    model: HawkesModel

    def __post_init__(self):
        iters = [d.iteration for d in self.diagnostics]
        if any(b <= a for a, b in zip(iters, iters[1:])):
            raise ValueError("diagnostics iterations must be strictly increasing")

    def to_json(self):
        return {
            "id": self.id,
            "created_at": self.created_at,
            "vocabulary": list(self.vocabulary),
            "query": self.query.to_json(),
            "graph": self.graph.to_json(),
            "feedback_history": [f.to_json(self.vocabulary) for f in self.feedback_history],
            "diagnostics": [d.to_json() for d in self.diagnostics],
            "model": self.model.to_json(),
        }

    @classmethod
    def from_json(cls, obj):
        vocab = list(obj["vocabulary"])
        return cls(
            id=obj["id"],
            created_at=obj["created_at"],
            vocabulary=vocab,
            query=Query.from_json(obj["query"]),
            graph=CausalGraph.from_json(obj["graph"]),
            feedback_history=[FeedbackSet.from_json(f, vocab) for f in obj["feedback_history"]],
            diagnostics=[DiagnosticsRecord.from_json(d) for d in obj["diagnostics"]],
            model=HawkesModel.from_json(obj["model"]),
        )


class SnapshotStore:
    """Append-only ``snapshot-<id>.json`` files under one directory."""

    def __init__(self, directory):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, snapshot_id):
        return self.directory / f"snapshot-{snapshot_id}.json"

    def next_id(self):
        taken = [int(m.group(1)) for p in self.directory.glob("snapshot-*.json")
                 if (m := re.match(r"snapshot-(\d+)\.json$", p.name))]
        return f"{max(taken, default=0) + 1:04d}"

    def save(self, snapshot):
        if not snapshot.id:
            snapshot.id = self.next_id()
        if not snapshot.created_at:
            snapshot.created_at = datetime.now(timezone.utc).isoformat()
        path = self._path(snapshot.id)
        with open(path, "w") as fh:
            json.dump(snapshot.to_json(), fh, indent=1, sort_keys=True)
        return snapshot.id

    def load(self, snapshot_id):
        path = self._path(snapshot_id)
        if not path.exists():
            raise SnapshotNotFound(snapshot_id)
        with open(path) as fh:
            return AnalysisSnapshot.from_json(json.load(fh))

    def list(self):
        snaps = []
        for path in self.directory.glob("snapshot-*.json"):
            with open(path) as fh:
                obj = json.load(fh)
            snaps.append({"id": obj["id"], "created_at": obj["created_at"],
                          "query": obj["query"]})
        snaps.sort(key=lambda s: (s["created_at"], s["id"]))
        return snaps


@dataclass(frozen=True)
class ComparisonCell:
    cause: str
    effect: str
    strength_1: float
    strength_2: float
    category: str

    def to_json(self):
        return {
            "cause": self.cause,
            "effect": self.effect,
            "strength_1": self.strength_1,
            "strength_2": self.strength_2,
            "category": self.category,
        }


def categorize_cell(s1, s2, epsilon):
    """The five-situation partition on a strength pair."""
    if s1 > 0 and s2 > 0:
        return "both_same" if abs(s1 - s2) <= epsilon * max(s1, s2) else "both_diff"
    if s1 > 0:
        return "only_first"
    if s2 > 0:
        return "only_second"
    return "neither"


def _strength_lookup(snapshot):
    return {(e.cause, e.effect): e.strength for e in snapshot.graph.edges if not e.removed}


def compare(s1, s2, epsilon=DEFAULT_EPSILON):
    """Superimposed adjacency over the vocabulary union.

    Types absent from one snapshot contribute strength 0 there; removed
    edges count as absent.  Returns cells in row-major (cause, effect)
    order of the union vocabulary.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    union = list(s1.vocabulary) + [t for t in s2.vocabulary if t not in s1.vocabulary]
    if not (set(s1.vocabulary) & set(s2.vocabulary)):
        raise ValueError("snapshots share no vocabulary entries")
    st1 = _strength_lookup(s1)
    st2 = _strength_lookup(s2)
    cells = []
    for cause in union:
        for effect in union:
            a = st1.get((cause, effect), 0.0)
            b = st2.get((cause, effect), 0.0)
            cells.append(ComparisonCell(cause, effect, a, b, categorize_cell(a, b, epsilon)))
    return cells


def comparison_json(cells, union_vocabulary=None):
    types = union_vocabulary
    if types is None:
        seen = []
        for c in cells:
            if c.cause not in seen:
                seen.append(c.cause)
        types = seen
    return {"types": types, "cells": [c.to_json() for c in cells]}
