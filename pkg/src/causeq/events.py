"""Event-sequence ingestion, querying, and coverage statistics.

A dataset is an immutable collection of event sequences over a shared
vocabulary of event types.  Ingestion accepts the canonical jsonl format
(one ``{"seq", "type", "t"}`` object per line) or a ``seq,type,t`` CSV,
optionally accompanied by a sidecar json carrying the vocabulary,
per-sequence attributes, per-sequence horizons, and a time-unit label.
"""

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import squareform


class IngestError(ValueError):
    """Raised when a source stream violates the ingestion contract."""


@dataclass(frozen=True)
class EventRecord:
    sequence_id: str
    type_id: int
    timestamp: float


@dataclass
class EventSequence:
    """Ordered events of one entity plus its observation horizon."""

    id: str
    events: list
    horizon: float
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.events)

    def times_of(self, type_id):
        return [e.timestamp for e in self.events if e.type_id == type_id]

    def contains(self, type_id):
        return any(e.type_id == type_id for e in self.events)


@dataclass
class Dataset:
    vocabulary: list
    sequences: list
    attribute_schema: dict = field(default_factory=dict)
    time_unit: str = ""

    @property
    def num_types(self):
        return len(self.vocabulary)

    @property
    def is_empty(self):
        """Explicit empty-result flag; callers must not fit a model on an
        empty dataset."""
        return len(self.sequences) == 0

    def type_index(self, name):
        try:
            return self.vocabulary.index(name)
        except ValueError:
            raise KeyError(f"unknown event type: {name!r}") from None

    def total_time(self):
        return sum(s.horizon for s in self.sequences)

    def total_events(self):
        return sum(len(s) for s in self.sequences)


@dataclass(frozen=True)
class Query:
    """Inclusion/exclusion and attribute criteria on a dataset.

    Event criteria are held as type *names* so that a query keeps its
    meaning on the re-projected vocabulary of its own result (queries are
    idempotent).  ``attribute_filters`` is a list of
    ``(field, op, value)`` with op one of ``equals`` / ``in`` /
    ``range`` (range bounds inclusive).
    """

    include_events: frozenset = frozenset()
    exclude_events: frozenset = frozenset()
    attribute_filters: tuple = ()
    use_major_cluster: bool = False

    def __post_init__(self):
        object.__setattr__(self, "include_events", frozenset(self.include_events))
        object.__setattr__(self, "exclude_events", frozenset(self.exclude_events))
        object.__setattr__(self, "attribute_filters", tuple(self.attribute_filters))
        overlap = self.include_events & self.exclude_events
        if overlap:
            raise ValueError(f"query includes and excludes the same events: {sorted(overlap)}")

    def to_json(self):
        return {
            "include_events": sorted(self.include_events),
            "exclude_events": sorted(self.exclude_events),
            "attribute_filters": [list(f) for f in self.attribute_filters],
            "use_major_cluster": self.use_major_cluster,
        }

    @classmethod
    def from_json(cls, obj):
        return cls(
            include_events=frozenset(obj.get("include_events", ())),
            exclude_events=frozenset(obj.get("exclude_events", ())),
            attribute_filters=tuple(tuple(f) for f in obj.get("attribute_filters", ())),
            use_major_cluster=bool(obj.get("use_major_cluster", False)),
        )


def _check_timestamp(value, row_no):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise IngestError(f"row {row_no}: timestamp is not numeric: {value!r}")
    t = float(value)
    if not math.isfinite(t):
        raise IngestError(f"row {row_no}: timestamp is not finite")
    if t < 0:
        raise IngestError(f"row {row_no}: negative timestamp {t}")
    return t


def _parse_rows(source, format):
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        text = source.read()
        if isinstance(text, bytes):
            text = text.decode("utf-8")

    rows = []
    if format == "jsonl":
        for row_no, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise IngestError(f"row {row_no}: malformed json: {exc}") from None
            if not isinstance(obj, dict) or not {"seq", "type", "t"} <= obj.keys():
                raise IngestError(f"row {row_no}: expected object with seq/type/t fields")
            t = _check_timestamp(obj["t"], row_no)
            rows.append((str(obj["seq"]), str(obj["type"]), t))
    elif format == "csv":
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if header is None:
            return rows
        if [h.strip() for h in header] != ["seq", "type", "t"]:
            raise IngestError("csv header must be exactly seq,type,t")
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise IngestError(f"row {row_no}: expected 3 fields, got {len(row)}")
            try:
                t_val = float(row[2])
            except ValueError:
                raise IngestError(f"row {row_no}: timestamp is not numeric: {row[2]!r}") from None
            t = _check_timestamp(t_val, row_no)
            rows.append((row[0], row[1], t))
    else:
        raise ValueError(f"unknown format {format!r} (expected 'jsonl' or 'csv')")
    return rows


def _infer_schema(attributes):
    schema = {}
    fields = set()
    for meta in attributes.values():
        fields.update(meta)
    for f in sorted(fields):
        values = [meta[f] for meta in attributes.values() if f in meta]
        numeric = all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in values)
        schema[f] = "numeric" if numeric else "categorical"
    return schema


def ingest(source, format="jsonl", sidecar=None):
    """Parse an event stream into a Dataset.

    Repeated (seq, t, type) rows are kept: repeated events are
    legitimate.  Events of each sequence are sorted by timestamp with
    ties broken by row order.  The vocabulary is built in
    first-appearance order unless the sidecar supplies one.
    """
    sidecar = sidecar or {}
    rows = _parse_rows(source, format)

    vocabulary = list(sidecar.get("vocabulary", []))
    if vocabulary and len(set(vocabulary)) != len(vocabulary):
        raise IngestError("sidecar vocabulary contains duplicate names")
    fixed_vocab = bool(vocabulary)
    index = {name: i for i, name in enumerate(vocabulary)}

    by_seq = {}
    for row_no, (seq_id, type_name, t) in enumerate(rows, start=1):
        if type_name not in index:
            if fixed_vocab:
                raise IngestError(f"row {row_no}: type {type_name!r} not in declared vocabulary")
            index[type_name] = len(vocabulary)
            vocabulary.append(type_name)
        by_seq.setdefault(seq_id, []).append((t, row_no, index[type_name]))

    attributes = sidecar.get("attributes", {})
    horizons = sidecar.get("horizons", {})
    sequences = []
    for seq_id, evts in by_seq.items():
        evts.sort(key=lambda e: (e[0], e[1]))
        records = [EventRecord(seq_id, tid, t) for t, _, tid in evts]
        last = records[-1].timestamp
        horizon = float(horizons.get(seq_id, last))
        if horizon < last:
            raise IngestError(f"sequence {seq_id!r}: horizon {horizon} precedes last event at {last}")
        sequences.append(EventSequence(seq_id, records, horizon, dict(attributes.get(seq_id, {}))))

    return Dataset(
        vocabulary=vocabulary,
        sequences=sequences,
        attribute_schema=_infer_schema(attributes),
        time_unit=str(sidecar.get("time_unit", "")),
    )


def export_jsonl(dataset):
    """Serialize to the canonical jsonl format (ingest round-trips it)."""
    lines = []
    for seq in dataset.sequences:
        for e in seq.events:
            lines.append(json.dumps(
                {"seq": seq.id, "type": dataset.vocabulary[e.type_id], "t": e.timestamp}
            ))
    return "\n".join(lines) + ("\n" if lines else "")


def export_sidecar(dataset):
    sidecar = {"vocabulary": list(dataset.vocabulary)}
    horizons = {
        s.id: s.horizon
        for s in dataset.sequences
        if s.events and s.horizon != s.events[-1].timestamp
    }
    if horizons:
        sidecar["horizons"] = horizons
    attributes = {s.id: s.metadata for s in dataset.sequences if s.metadata}
    if attributes:
        sidecar["attributes"] = attributes
    if dataset.time_unit:
        sidecar["time_unit"] = dataset.time_unit
    return sidecar


def write_dataset(dataset, jsonl_path):
    with open(jsonl_path, "w") as fh:
        fh.write(export_jsonl(dataset))
    with open(str(jsonl_path) + ".sidecar.json", "w") as fh:
        json.dump(export_sidecar(dataset), fh, indent=1, sort_keys=True)


def read_dataset(jsonl_path):
    sidecar = None
    try:
        with open(str(jsonl_path) + ".sidecar.json") as fh:
            sidecar = json.load(fh)
    except FileNotFoundError:
        pass
    with open(jsonl_path) as fh:
        return ingest(fh.read(), "jsonl", sidecar=sidecar)


def coverage(dataset):
    """Per-type sequence coverage, ranked by rate descending.

    Returns ``[(type_id, covered_count, coverage_rate)]`` where the rate
    is the proportion of sequences containing at least one event of the
    type.  Ties are broken by vocabulary order so the ranking is stable.
    """
    n = len(dataset.sequences)
    if n == 0:
        raise ValueError("coverage of an empty dataset is undefined")
    counts = [0] * dataset.num_types
    for seq in dataset.sequences:
        for tid in {e.type_id for e in seq.events}:
            counts[tid] += 1
    ranked = sorted(range(dataset.num_types), key=lambda tid: (-counts[tid], tid))
    return [(tid, counts[tid], counts[tid] / n) for tid in ranked]


def _levenshtein(a, b):
    # Token-level edit distance; rows vectorized with numpy.
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    bb = np.asarray(b)
    prev = np.arange(len(b) + 1)
    for i, tok in enumerate(a, start=1):
        cur = np.empty(len(b) + 1, dtype=np.intp)
        cur[0] = i
        np.minimum(prev[:-1] + (bb != tok), prev[1:] + 1, out=cur[1:])
        for j in range(1, len(cur)):
            if cur[j] > cur[j - 1] + 1:
                cur[j] = cur[j - 1] + 1
        prev = cur
    return int(prev[-1])


def _major_cluster(sequences):
    """Largest complete-linkage cluster at normalized edit distance 0.5.

    Each sequence is reduced to its tuple of type ids; distance is the
    Levenshtein distance normalized by the longer length.  Ties on
    cluster size keep the cluster containing the earliest sequence.
    """
    n = len(sequences)
    if n <= 1:
        return list(sequences)
    words = [tuple(e.type_id for e in s.events) for s in sequences]
    dist = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            denom = max(len(words[i]), len(words[j]), 1)
            dist[i, j] = dist[j, i] = _levenshtein(words[i], words[j]) / denom
    labels = fcluster(linkage(squareform(dist), method="complete"), t=0.5, criterion="distance")
    sizes = np.bincount(labels)
    best = None
    for i, lab in enumerate(labels):
        if best is None or sizes[lab] > sizes[labels[best]]:
            best = i
    keep = labels == labels[best]
    return [s for s, k in zip(sequences, keep) if k]


def query(dataset, q):
    """Filter to sequences matching all query criteria.

    A sequence passes when it contains every inclusion event, none of
    the exclusion events, and satisfies every attribute filter; with
    ``use_major_cluster`` the result is further restricted to the
    largest progression cluster.  The vocabulary of the result is
    re-projected to the types that actually occur.
    """
    include = {dataset.type_index(name) for name in q.include_events if name in dataset.vocabulary}
    missing_includes = {name for name in q.include_events if name not in dataset.vocabulary}
    exclude = {dataset.type_index(name) for name in q.exclude_events if name in dataset.vocabulary}

    kept = []
    if not missing_includes:  # an include type absent from the vocabulary matches nothing
        for seq in dataset.sequences:
            present = {e.type_id for e in seq.events}
            if not include <= present or present & exclude:
                continue
            if all(_attr_match(seq.metadata, f) for f in q.attribute_filters):
                kept.append(seq)

    if q.use_major_cluster and kept:
        kept = _major_cluster(kept)

    occurring = sorted({e.type_id for s in kept for e in s.events})
    remap = {old: new for new, old in enumerate(occurring)}
    vocabulary = [dataset.vocabulary[i] for i in occurring]
    sequences = [
        EventSequence(
            s.id,
            [EventRecord(e.sequence_id, remap[e.type_id], e.timestamp) for e in s.events],
            s.horizon,
            dict(s.metadata),
        )
        for s in kept
    ]
    return Dataset(vocabulary, sequences, dict(dataset.attribute_schema), dataset.time_unit)


def _attr_match(metadata, filt):
    fld, op, value = filt
    if fld not in metadata:
        return False
    v = metadata[fld]
    if op == "equals":
        return v == value
    if op == "in":
        return v in value
    if op == "range":
        lo, hi = value
        return isinstance(v, (int, float)) and not isinstance(v, bool) and lo <= v <= hi
    raise ValueError(f"unknown attribute predicate {op!r}")


def event_coverage_for_edge(dataset, cause, effect, window):
    """Fraction of sequences where the cause is followed by the effect
    within ``window``.

    Order matters; cause == effect counts self-excitation (the effect
    occurrence must be strictly later).
    """
    if window <= 0:
        raise ValueError(f"window must be positive, got {window}")
    if not dataset.sequences:
        return 0.0
    hits = 0
    for seq in dataset.sequences:
        cause_times = seq.times_of(cause)
        effect_times = seq.times_of(effect)
        if _has_followup(cause_times, effect_times, window):
            hits += 1
    return hits / len(dataset.sequences)


def _has_followup(cause_times, effect_times, window):
    j = 0
    for tc in cause_times:
        while j < len(effect_times) and effect_times[j] <= tc:
            j += 1
        if j < len(effect_times) and effect_times[j] <= tc + window:
            return True
    return False
