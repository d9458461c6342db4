"""Subsequence pattern summarization around a selected causal edge.

Sequences touching the edge split into three exclusive groups: the cause
with no effect following within the window (A->?), cause followed by
effect (A->B), and effect with no cause in the window before (?->B).
Each row marks which other potential causes occur in its window (one
occurrence per cause; frequency is irrelevant to validity), rows are
reordered within each category by an annealed traveling-salesman pass so
that rows sharing anchors sit together, and adjacent runs of a shared
anchor (also across a category boundary) merge into one aggregated node.
"""

from dataclasses import dataclass, field

import numpy as np

from .hawkes import kernel_integral_matrix, kernel_matrix

CATEGORY_ORDER = ("cause_only", "cause_effect", "effect_only")


@dataclass(frozen=True)
class PatternQuery:
    cause: int
    effect: int
    window: float
    potential_causes: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "potential_causes", tuple(self.potential_causes))
        if self.window <= 0:
            raise ValueError("window must be positive")
        if self.cause in self.potential_causes:
            raise ValueError("the selected cause cannot also be a potential cause")


@dataclass
class SubsequenceRow:
    sequence_id: str
    category: str
    anchors: tuple  # presence per potential cause
    anchor_times: tuple  # mean offset within the window per present anchor, None if absent
    reference_time: float


@dataclass
class PatternSummary:
    rows: list  # SubsequenceRow in display order
    order: list  # permutation applied to the categorize() output
    groups: dict  # category -> count
    aggregated_anchors: list  # (potential cause index, row_start, row_end) inclusive
    column_order: list  # potential causes sorted by mean occurrence time
    group_likelihood: dict = field(default_factory=dict)

    def to_json(self, vocabulary, potential_causes):
        return {
            "rows": [
                {
                    "id": r.sequence_id,
                    "category": r.category,
                    "anchors": [int(a) for a in r.anchors],
                }
                for r in self.rows
            ],
            "order": list(self.order),
            "groups": dict(self.groups),
            "aggregates": [
                {"cause": vocabulary[potential_causes[k]], "row_start": s, "row_end": e}
                for k, s, e in self.aggregated_anchors
            ],
            "columns": [vocabulary[potential_causes[k]] for k in self.column_order],
            "group_likelihood": dict(self.group_likelihood),
        }


def _first_pair(cause_times, effect_times, window):
    """Earliest (t_cause, t_effect) with the effect inside the window."""
    j = 0
    for tc in cause_times:
        while j < len(effect_times) and effect_times[j] <= tc:
            j += 1
        if j < len(effect_times) and effect_times[j] <= tc + window:
            return tc, effect_times[j]
    return None


def categorize(dataset, q):
    """Assign each sequence containing the cause or effect to exactly one
    category.

    A sequence with the cause present but satisfying no cause->effect
    pairing is cause_only even when some effect occurrence also lacks a
    preceding cause (one sequence, one ribbon).  Anchor windows look
    forward from the first cause for cause_only rows and backward from
    the reference effect otherwise.
    """
    rows = []
    for seq in dataset.sequences:
        cause_times = seq.times_of(q.cause)
        effect_times = seq.times_of(q.effect)
        if not cause_times and not effect_times:
            continue
        if cause_times:
            pair = _first_pair(cause_times, effect_times, q.window)
            if pair is not None:
                category = "cause_effect"
                lo, hi, ref = pair[1] - q.window, pair[1], pair[1]
                half_open = "effect"
            else:
                category = "cause_only"
                lo, hi, ref = cause_times[0], cause_times[0] + q.window, cause_times[0]
                half_open = "cause"
        else:
            category = "effect_only"
            lo, hi, ref = effect_times[0] - q.window, effect_times[0], effect_times[0]
            half_open = "effect"

        anchors, times = [], []
        for pc in q.potential_causes:
            if half_open == "cause":  # (t_c, t_c + window]
                occ = [t for t in seq.times_of(pc) if lo < t <= hi]
            else:  # [t_e - window, t_e)
                occ = [t for t in seq.times_of(pc) if lo <= t < hi]
            if occ:
                anchors.append(True)
                times.append(float(np.mean(occ)) - lo)  # position within the window
            else:
                anchors.append(False)
                times.append(None)
        rows.append(SubsequenceRow(seq.id, category, tuple(anchors), tuple(times), ref))
    return rows


def anchor_coverage(rows, n_potential):
    """Fraction of the current rows containing each potential cause."""
    if not rows:
        return np.zeros(n_potential)
    mat = np.asarray([r.anchors for r in rows], dtype=float)
    return mat.mean(axis=0)


def _path_cost(dist, perm):
    if len(perm) < 2:
        return 0.0
    p = np.asarray(perm)
    return float(dist[p[:-1], p[1:]].sum())


def _anneal(dist, n, rng, iters_per_row=200):
    """Open-path TSP by simulated annealing: geometric 0.995 schedule
    from the max pairwise distance, 2-opt and relocate proposals.
    Returns an order never worse than the identity start."""
    perm = list(range(n))
    cost = _path_cost(dist, perm)
    best, best_cost = list(perm), cost
    t0 = float(dist.max())
    if t0 <= 0 or n <= 2:
        return best
    temp = t0
    for _ in range(iters_per_row * n):
        if rng.random() < 0.5 and n >= 3:
            i, j = sorted(rng.choice(n, size=2, replace=False))
            if i == j:
                continue
            # 2-opt: reverse perm[i..j]; internal edges are symmetric
            delta = 0.0
            if i > 0:
                delta += dist[perm[i - 1], perm[j]] - dist[perm[i - 1], perm[i]]
            if j < n - 1:
                delta += dist[perm[i], perm[j + 1]] - dist[perm[j], perm[j + 1]]
            if delta < 0 or rng.random() < np.exp(-delta / temp):
                perm[i:j + 1] = reversed(perm[i:j + 1])
                cost += delta
        else:
            i = int(rng.integers(n))
            k = int(rng.integers(n))  # insertion slot in the shortened path
            x = perm[i]
            rest = perm[:i] + perm[i + 1:]
            delta = 0.0
            if i > 0:
                delta -= dist[perm[i - 1], x]
            if i < n - 1:
                delta -= dist[x, perm[i + 1]]
            if 0 < i < n - 1:
                delta += dist[perm[i - 1], perm[i + 1]]
            if 0 < k:
                delta += dist[rest[k - 1], x]
                delta -= 0.0 if k >= len(rest) else dist[rest[k - 1], rest[k]]
            if k < len(rest):
                delta += dist[x, rest[k]]
            if delta < 0 or rng.random() < np.exp(-delta / temp):
                perm = rest[:k] + [x] + rest[k:]
                cost += delta
        if cost < best_cost - 1e-12:
            best, best_cost = list(perm), cost
        temp *= 0.995
    # guard against float drift in the incremental cost
    if _path_cost(dist, best) > _path_cost(dist, list(range(n))):
        return list(range(n))
    return best


def order_rows(rows, weights, seed):
    """Permutation of ``rows`` grouping categories and ordering each
    category along a short path through anchor space.

    The pairwise distance is the weighted Euclidean gap between anchor
    vectors, weights being the anchor coverage rates.
    """
    weights = np.asarray(weights, dtype=float)
    rng = np.random.default_rng(seed)
    perm = []
    for category in CATEGORY_ORDER:
        members = [i for i, r in enumerate(rows) if r.category == category]
        if len(members) <= 2:
            perm.extend(members)
            continue
        vecs = np.asarray([rows[i].anchors for i in members], dtype=float)
        diff = (vecs[:, None, :] - vecs[None, :, :]) * weights
        dist = np.sqrt((diff**2).sum(axis=2))
        order = _anneal(dist, len(members), rng)
        perm.extend(members[k] for k in order)
    return perm


def aggregate(rows):
    """Merge maximal runs of adjacent rows sharing an anchor (category
    boundaries do not break a run) into aggregated anchor nodes."""
    n_potential = len(rows[0].anchors) if rows else 0
    aggregates = []
    for k in range(n_potential):
        start = None
        for i, row in enumerate(rows):
            if row.anchors[k]:
                if start is None:
                    start = i
            elif start is not None:
                aggregates.append((k, start, i - 1))
                start = None
        if start is not None:
            aggregates.append((k, start, len(rows) - 1))
    aggregates.sort(key=lambda t: (t[1], t[0]))

    means = []
    for k in range(n_potential):
        vals = [r.anchor_times[k] for r in rows
                if r.anchors[k] and r.anchor_times[k] is not None]
        means.append(float(np.mean(vals)) if vals else float("inf"))
    column_order = sorted(range(n_potential), key=lambda k: (means[k], k))

    groups = {c: sum(1 for r in rows if r.category == c) for c in CATEGORY_ORDER}
    return PatternSummary(
        rows=list(rows),
        order=list(range(len(rows))),
        groups=groups,
        aggregated_anchors=aggregates,
        column_order=column_order,
    )


def _effect_type_score(model, seq, effect):
    """Normalized log-likelihood of the effect type on one sequence:
    (sum of log-intensities at effect events minus the effect
    compensator) over the effect event count (at least 1)."""
    times = np.asarray([e.timestamp for e in seq.events])
    types = np.asarray([e.type_id for e in seq.events], dtype=np.intp)
    comp = float(model.mu[effect]) * seq.horizon
    if len(times):
        integ = kernel_integral_matrix(model.kernels, seq.horizon - times)
        comp += float((model.a[effect][types] * integ).sum())
    log_terms = 0.0
    n_eff = 0
    for m in np.nonzero(types == effect)[0]:
        prior = times < times[m]
        lam = float(model.mu[effect])
        if prior.any():
            k = kernel_matrix(model.kernels, times[m] - times[prior])
            lam += float((model.a[effect][types[prior]] * k).sum())
        if lam <= 0:
            return float("-inf")
        log_terms += np.log(lam)
        n_eff += 1
    return (log_terms - comp) / max(1, n_eff)


def group_likelihood(model, dataset, q, rows):
    """Per-category fit score in [0, 1].

    The raw score of a category is the mean normalized effect-type
    log-likelihood over its member sequences; scores are min-max mapped
    across the categories present (all equal -> 0.5 each).
    """
    by_id = {s.id: s for s in dataset.sequences}
    raw = {}
    for category in CATEGORY_ORDER:
        members = [by_id[r.sequence_id] for r in rows if r.category == category]
        if members:
            raw[category] = float(np.mean(
                [_effect_type_score(model, s, q.effect) for s in members]
            ))
    if not raw:
        return {}
    lo, hi = min(raw.values()), max(raw.values())
    if hi - lo < 1e-12:
        return {c: 0.5 for c in raw}
    return {c: (v - lo) / (hi - lo) for c, v in raw.items()}


def causal_path_flow(dataset, path, window):
    """Continuation/drop-out counts along a causal path.

    A sequence continues past step k when the next path event occurs
    within the window after the previous matched occurrence (first
    occurrences chain greedily).  Continuing sets are nested, so counts
    telescope.
    """
    if len(path) < 2:
        raise ValueError("a causal path needs at least two events")
    if window <= 0:
        raise ValueError("window must be positive")
    reached = [0] * len(path)
    for seq in dataset.sequences:
        t = None
        for tt in seq.times_of(path[0]):
            t = tt
            break
        if t is None:
            continue
        reached[0] += 1
        for k in range(1, len(path)):
            nxt = None
            for tt in seq.times_of(path[k]):
                if t < tt <= t + window:
                    nxt = tt
                    break
            if nxt is None:
                break
            t = nxt
            reached[k] += 1
    steps = []
    for k in range(len(path) - 1):
        steps.append({
            "from": path[k],
            "to": path[k + 1],
            "continue": reached[k + 1],
            "drop": reached[k] - reached[k + 1],
        })
    return steps


def summarize(model, dataset, q, seed=0):
    """categorize -> order -> aggregate -> score, as one view payload."""
    rows = categorize(dataset, q)
    w = anchor_coverage(rows, len(q.potential_causes))
    perm = order_rows(rows, w, seed)
    ordered = [rows[i] for i in perm]
    summary = aggregate(ordered)
    summary.order = perm
    if model is not None:
        summary.group_likelihood = group_likelihood(model, dataset, q, rows)
    return summary
