"""Penalized maximum-likelihood fitting of the Hawkes model.

The objective is ``-L + alpha * sum_{v,v'} ||a[v,v']||_2`` (group lasso
over candidate edges).  Optimization is EM: responsibilities attribute
each event to the baseline or to (prior event, kernel) pairs, the M-step
has closed-form updates from responsibility sums over compensator
integrals (with the group penalty entering through its standard
quadratic bound, which keeps every step a true majorize-minimize
descent), and a proximal group-soft-threshold then drives negligible
groups to exact zero.  A zeroed group is absorbing: it receives no
responsibilities afterwards, which is how whole candidate edges die.

User feedback enters as in the refit objective: removed pairs are hard
constraints (projected to zero every step), confirmed pairs are exempt
from the penalty so the regularizer cannot kill them.

The problem separates over effect types: every update of row v depends
only on row v's parameters, so fitting all rows jointly equals fitting
them independently.
"""

from dataclasses import dataclass

import numpy as np

from .events import event_coverage_for_edge
from .hawkes import (
    CausalGraph,
    GraphEdge,
    HawkesModel,
    kernel_integral_matrix,
    kernel_matrix,
    log_likelihood,
)

MU_FLOOR = 1e-10
DEFAULT_STRENGTH_THRESHOLD = 1e-4


@dataclass(frozen=True)
class FitConfig:
    alpha: float = 10.0
    alpha_u: float = 10.0
    max_iters: int = 200
    tol: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.alpha < 0 or self.alpha_u < 0:
            raise ValueError("penalty weights must be nonnegative")

    def to_json(self):
        return {
            "alpha": self.alpha,
            "alpha_u": self.alpha_u,
            "max_iters": self.max_iters,
            "tol": self.tol,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, obj):
        return cls(**{k: obj[k] for k in ("alpha", "alpha_u", "max_iters", "tol", "seed") if k in obj})


@dataclass(frozen=True)
class FeedbackSet:
    """User-confirmed and user-removed (cause, effect) type-id pairs."""

    confirmed: frozenset = frozenset()
    removed: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "confirmed", frozenset(tuple(p) for p in self.confirmed))
        object.__setattr__(self, "removed", frozenset(tuple(p) for p in self.removed))
        overlap = self.confirmed & self.removed
        if overlap:
            raise ValueError(f"feedback both confirms and removes pairs: {sorted(overlap)}")

    def merged_with(self, confirmed=(), removed=()):
        return FeedbackSet(self.confirmed | set(confirmed), self.removed | set(removed))

    def to_json(self, vocabulary):
        name = lambda p: [vocabulary[p[0]], vocabulary[p[1]]]
        return {
            "confirmed": sorted(name(p) for p in self.confirmed),
            "removed": sorted(name(p) for p in self.removed),
        }

    @classmethod
    def from_json(cls, obj, vocabulary):
        idx = {n: i for i, n in enumerate(vocabulary)}
        pick = lambda pairs: frozenset((idx[c], idx[e]) for c, e in pairs)
        return cls(pick(obj.get("confirmed", ())), pick(obj.get("removed", ())))


EMPTY_FEEDBACK = FeedbackSet()


@dataclass
class FitReport:
    objective_trace: list
    iterations_run: int
    converged: bool
    final_nll: float


class _FitArrays:
    """Flattened event/pair arrays so each EM iteration is pure numpy.

    Kernel values at pair lags and the compensator integrals are fixed
    by (data, kernels) and computed once.
    """

    def __init__(self, dataset, kernels):
        V, Z = dataset.num_types, kernels.Z
        ev_types, pair_event, pair_cause, pair_lag = [], [], [], []
        g = np.zeros((V, Z))
        total_time = 0.0
        offset = 0
        for seq in dataset.sequences:
            times = np.asarray([e.timestamp for e in seq.events])
            types = np.asarray([e.type_id for e in seq.events], dtype=np.intp)
            n = len(times)
            ev_types.append(types)
            total_time += seq.horizon
            if n:
                np.add.at(g, types, kernel_integral_matrix(kernels, seq.horizon - times))
            if n > 1:
                dt = times[:, None] - times[None, :]
                m_idx, j_idx = np.nonzero(dt > 0)  # strict past
                pair_event.append(m_idx + offset)
                pair_cause.append(types[j_idx])
                pair_lag.append(dt[m_idx, j_idx])
            offset += n

        self.V, self.Z = V, Z
        self.total_time = total_time
        self.event_type = np.concatenate(ev_types) if ev_types else np.empty(0, np.intp)
        self.E = len(self.event_type)
        self.count_by_type = np.bincount(self.event_type, minlength=V).astype(float)
        self.G = g  # (cause, z) compensator integral sums
        if pair_event:
            self.pair_event = np.concatenate(pair_event)
            self.pair_cause = np.concatenate(pair_cause)
            self.K = kernel_matrix(kernels, np.concatenate(pair_lag))
        else:
            self.pair_event = np.empty(0, np.intp)
            self.pair_cause = np.empty(0, np.intp)
            self.K = np.empty((0, Z))
        self.pair_effect = self.event_type[self.pair_event]
        p = len(self.pair_event)
        self.P = p
        # flattened accumulation targets
        self._r_idx = ((self.pair_effect * V + self.pair_cause)[:, None] * Z
                       + np.arange(Z)[None, :]).ravel()
        self._exc_idx = self.pair_event * V + self.pair_cause
        self.events_of = [np.nonzero(self.event_type == v)[0] for v in range(V)]

    def excitation(self, a):
        """Per-event excitation split by cause type: (E, V)."""
        w = a[self.pair_effect, self.pair_cause]
        contrib = (w * self.K).sum(axis=1)
        exc = np.bincount(self._exc_idx, weights=contrib, minlength=self.E * self.V)
        return exc.reshape(self.E, self.V)

    def smooth_objective_terms(self, mu, a):
        """Negative log-likelihood split by effect type: (V,)."""
        lam = mu[self.event_type] + self.excitation(a).sum(axis=1)
        neg = np.bincount(self.event_type, weights=-np.log(lam), minlength=self.V)
        comp = mu * self.total_time + (a * self.G[None, :, :]).sum(axis=(1, 2))
        return neg + comp


def _penalty_by_effect(a, alpha, confirmed_mask):
    norms = np.linalg.norm(a, axis=2)
    return alpha * np.where(confirmed_mask, 0.0, norms).sum(axis=1)


def _masks(V, feedback):
    confirmed = np.zeros((V, V), dtype=bool)
    removed = np.zeros((V, V), dtype=bool)
    for c, e in feedback.confirmed:
        confirmed[e, c] = True
    for c, e in feedback.removed:
        removed[e, c] = True
    return confirmed, removed


def _validate_feedback(feedback, V):
    for c, e in feedback.confirmed | feedback.removed:
        if not (0 <= c < V and 0 <= e < V):
            raise ValueError(f"feedback pair ({c}, {e}) outside vocabulary of size {V}")


def _em_iteration(arr, mu, a, alpha, confirmed_mask, removed_mask):
    """One E-step + penalized M-step + guarded proximal threshold.

    Returns (mu_new, a_new, objective_by_effect_after).  The penalized
    objective of every effect type is non-increasing: the M-step exactly
    minimizes a majorizer, and the proximal shrinkage is kept only at a
    scale that the exact objective accepts (halving the step, down to no
    shrinkage, otherwise).
    """
    V, Z = arr.V, arr.Z

    exc = arr.excitation(a)
    lam = mu[arr.event_type] + exc.sum(axis=1)
    f_old = (np.bincount(arr.event_type, weights=-np.log(lam), minlength=V)
             + mu * arr.total_time + (a * arr.G[None, :, :]).sum(axis=(1, 2))
             + _penalty_by_effect(a, alpha, confirmed_mask))

    # E-step: responsibility sums for the baseline and each (pair, kernel)
    inv_lam = 1.0 / lam
    rho = mu * np.bincount(arr.event_type, weights=inv_lam, minlength=V)
    if arr.P:
        w = a[arr.pair_effect, arr.pair_cause]
        resp = w * arr.K * inv_lam[arr.pair_event][:, None]
        R = np.bincount(arr._r_idx, weights=resp.ravel(), minlength=V * V * Z).reshape(V, V, Z)
    else:
        R = np.zeros((V, V, Z))

    # M-step: mu exact; a from the quadratic bound of the group penalty
    mu_new = np.maximum(rho / arr.total_time, MU_FLOOR)
    G = np.broadcast_to(arr.G[None, :, :], (V, V, Z))
    norms_old = np.linalg.norm(a, axis=2)
    curv = np.zeros((V, V))
    np.divide(alpha, norms_old, out=curv, where=(norms_old > 0) & ~confirmed_mask)
    c3 = curv[:, :, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        plain = np.where(G > 0, R / np.where(G > 0, G, 1.0), 0.0)
        quad = (np.sqrt(G * G + 4.0 * c3 * R) - G) / (2.0 * c3)
    a_hat = np.where(c3 > 0, np.where(np.isfinite(quad), quad, 0.0), plain)
    a_hat[norms_old == 0] = 0.0  # zeroed groups are absorbing
    a_hat[removed_mask] = 0.0

    # proximal group-soft-threshold at step alpha * eta, eta being the
    # M-step scale ||a_hat||^2 / sum(R) of each group; guarded so the
    # exact per-effect objective never increases
    hat_norms = np.linalg.norm(a_hat, axis=2)
    r_group = R.sum(axis=2)
    eta = np.zeros((V, V))
    np.divide(hat_norms**2, r_group, out=eta, where=r_group > 0)
    exc_hat = arr.excitation(a_hat)  # (E, V) split by cause for cheap rescaling

    def objective_for(v, mu_v, scale_v):
        ev = arr.events_of[v]
        lam_v = mu_v + exc_hat[ev] @ scale_v
        if (lam_v <= 0).any():
            return float("inf")
        a_v = a_hat[v] * scale_v[:, None]
        comp = mu_v * arr.total_time + float((a_v * arr.G).sum())
        pen = alpha * float(np.where(confirmed_mask[v], 0.0, np.linalg.norm(a_v, axis=1)).sum())
        return -float(np.log(lam_v).sum()) + comp + pen

    mu_out = mu_new.copy()
    a_out = np.empty_like(a_hat)
    f_new = np.empty(V)
    for v in range(V):
        shrinkable = ~confirmed_mask[v] & (hat_norms[v] > 0)
        step = np.where(shrinkable, alpha * eta[v], 0.0)
        norms_safe = np.where(hat_norms[v] > 0, hat_norms[v], 1.0)
        accepted = None
        for _ in range(60):
            scale = np.where(hat_norms[v] > 0, np.maximum(0.0, 1.0 - step / norms_safe), 0.0)
            f_cand = objective_for(v, mu_new[v], scale)
            if f_cand <= f_old[v]:
                accepted = (scale, f_cand)
                break
            if not step.any():
                break
            step = step / 2.0
            step[step / norms_safe < 1e-15] = 0.0  # indistinguishable from no shrinkage
        if accepted is None:
            # fall back to the pure M-step point (majorizer guarantees it)
            scale = np.ones(V)
            accepted = (scale, objective_for(v, mu_new[v], scale))
        cur_scale, f_cur = accepted

        # exact pruning: a group goes to zero outright whenever the true
        # penalized objective prefers it dead (soft-thresholding alone
        # only reaches zero at penalty scales far past the useful range)
        candidates = np.nonzero(shrinkable & (cur_scale > 0))[0]
        for cause in sorted(candidates, key=lambda c: (hat_norms[v, c] * cur_scale[c], c)):
            trial = cur_scale.copy()
            trial[cause] = 0.0
            f_trial = objective_for(v, mu_new[v], trial)
            if f_trial <= f_cur:
                cur_scale, f_cur = trial, f_trial

        a_out[v] = a_hat[v] * cur_scale[:, None]
        f_new[v] = f_cur

    a_out[removed_mask] = 0.0
    return mu_out, a_out, f_new


def _initial_model(arr, kernels):
    mu = np.maximum(arr.count_by_type / arr.total_time, MU_FLOOR)
    a = np.full((arr.V, arr.V, arr.Z), 0.1 / arr.Z)
    return mu, a


def _run_em(dataset, config, kernels, alpha, feedback, start=None):
    if dataset.is_empty:
        raise ValueError("cannot fit a model on an empty dataset")
    if any(len(s) == 0 for s in dataset.sequences):
        raise ValueError("cannot fit: dataset contains sequences without events")
    _validate_feedback(feedback, dataset.num_types)

    arr = _FitArrays(dataset, kernels)
    confirmed_mask, removed_mask = _masks(arr.V, feedback)
    if start is None:
        mu, a = _initial_model(arr, kernels)
    else:
        mu = np.maximum(start.mu.copy(), MU_FLOOR)
        a = start.a.copy()
    a[removed_mask] = 0.0

    trace = [float((arr.smooth_objective_terms(mu, a)
                    + _penalty_by_effect(a, alpha, confirmed_mask)).sum())]
    converged = False
    iterations = 0
    for _ in range(config.max_iters):
        mu, a, f_by_effect = _em_iteration(arr, mu, a, alpha, confirmed_mask, removed_mask)
        iterations += 1
        obj = float(f_by_effect.sum())
        prev = trace[-1]
        trace.append(obj)
        if abs(prev - obj) < config.tol * (abs(prev) + 1e-12):
            converged = True
            break

    model = HawkesModel(mu=mu, a=a, kernels=kernels)
    report = FitReport(
        objective_trace=trace,
        iterations_run=iterations,
        converged=converged,
        final_nll=-log_likelihood(model, dataset),
    )
    return model, report


def fit(dataset, config, kernels):
    """Fit by penalized MLE; deterministic for a given dataset/config."""
    return _run_em(dataset, config, kernels, config.alpha, EMPTY_FEEDBACK)


def refit_with_feedback(dataset, prior, feedback, config):
    """Re-optimize under feedback constraints, warm-started from ``prior``.

    Removed pairs are exact zeros in the result; confirmed pairs escape
    the group penalty.  A confirmed group the prior had driven to exact
    zero is re-seeded at the warm-start level, since EM responsibilities
    cannot revive an all-zero group on their own.
    """
    start = prior.copy()
    for c, e in feedback.confirmed:
        if not start.a[e, c].any():
            start.a[e, c] = 0.1 / start.kernels.Z
    return _run_em(dataset, config, prior.kernels, config.alpha_u, feedback, start=start)


def em_step(model, dataset, config, feedback=EMPTY_FEEDBACK):
    """One EM + proximal step; the penalized objective does not increase."""
    _validate_feedback(feedback, dataset.num_types)
    arr = _FitArrays(dataset, model.kernels)
    confirmed_mask, removed_mask = _masks(arr.V, feedback)
    mu = np.maximum(model.mu.copy(), MU_FLOOR)
    a = model.a.copy()
    a[removed_mask] = 0.0
    mu, a, _ = _em_iteration(arr, mu, a, config.alpha, confirmed_mask, removed_mask)
    return HawkesModel(mu=mu, a=a, kernels=model.kernels)


def penalized_objective(model, dataset, alpha, feedback=EMPTY_FEEDBACK):
    """-L + alpha * sum of unconfirmed group norms, via the exact
    likelihood (independent of the EM internals)."""
    confirmed_mask, _ = _masks(model.V, feedback)
    norms = np.linalg.norm(model.a, axis=2)
    penalty = alpha * float(np.where(confirmed_mask, 0.0, norms).sum())
    return -log_likelihood(model, dataset) + penalty


def responsibilities(model, seq, m):
    """E-step attribution for event ``m`` of a sequence.

    Returns (baseline share, {(prior_index, z): share}); shares sum to 1.
    """
    target = seq.events[m]
    v = target.type_id
    lam = model.mu[v]
    contribs = {}
    for j, e in enumerate(seq.events):
        if e.timestamp >= target.timestamp:
            break
        k = kernel_matrix(model.kernels, np.asarray([target.timestamp - e.timestamp]))[0]
        for z in range(model.kernels.Z):
            val = model.a[v, e.type_id, z] * k[z]
            if val:
                contribs[(j, z)] = val
            lam += val
    return model.mu[v] / lam, {key: val / lam for key, val in contribs.items()}


def extract_graph(model, dataset, strength_threshold=DEFAULT_STRENGTH_THRESHOLD,
                  coverage_window=None):
    """Read the causal graph off the impact tensor.

    An edge cause -> effect exists when the mean impact coefficient of
    the group exceeds the threshold; each edge is annotated with its
    event coverage within ``coverage_window``.
    """
    if coverage_window is None:
        coverage_window = default_coverage_window(model.kernels)
    strengths = model.strengths()
    edges = []
    for effect in range(model.V):
        for cause in range(model.V):
            s = float(strengths[effect, cause])
            if s > strength_threshold:
                edges.append(GraphEdge(
                    cause=dataset.vocabulary[cause],
                    effect=dataset.vocabulary[effect],
                    strength=s,
                    coverage=event_coverage_for_edge(dataset, cause, effect, coverage_window),
                ))
    return CausalGraph(nodes=list(dataset.vocabulary), edges=edges)


def default_coverage_window(kernels):
    """Span where the kernel bank has meaningful mass."""
    return max(kernels.centers) + 2 * kernels.sigma
