"""Multivariate Hawkes process with a shared Gaussian kernel bank.

The conditional intensity of event type v is

    lambda_v(t) = mu_v + sum_{(v', t_m) : t_m < t} sum_z a[v, v', z] * kappa_z(t - t_m)

with kappa_z a Gaussian bump of bandwidth sigma centered at c_z (zero for
negative lags).  Everything the learner optimizes lives in
:class:`HawkesModel`; intensities and the exact log-likelihood (with the
compensator in closed form through the Gaussian error function) are pure
functions of it.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr  # standard normal CDF

Z_MAX = 10


@dataclass(frozen=True)
class KernelBank:
    """Z Gaussian bumps with strictly increasing centers and one shared
    bandwidth."""

    centers: tuple
    sigma: float

    def __post_init__(self):
        centers = tuple(float(c) for c in self.centers)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "sigma", float(self.sigma))
        if len(centers) < 1:
            raise ValueError("kernel bank needs at least one center")
        if any(c < 0 for c in centers) or any(b <= a for a, b in zip(centers, centers[1:])):
            raise ValueError("centers must be nonnegative and strictly increasing")
        if self.sigma <= 0:
            raise ValueError("bandwidth must be positive")

    @property
    def Z(self):
        return len(self.centers)


def kernel_value(bank, z, t):
    """kappa_z(t); zero for t < 0 (no influence before the cause)."""
    if t < 0:
        return 0.0
    c = bank.centers[z]
    s = bank.sigma
    return math.exp(-((t - c) ** 2) / (2 * s * s)) / math.sqrt(2 * math.pi * s * s)


def kernel_matrix(bank, dt):
    """kappa_z evaluated on an array of lags: shape ``dt.shape + (Z,)``."""
    dt = np.asarray(dt, dtype=float)
    c = np.asarray(bank.centers)
    s = bank.sigma
    vals = np.exp(-((dt[..., None] - c) ** 2) / (2 * s * s)) / math.sqrt(2 * math.pi * s * s)
    return np.where(dt[..., None] < 0, 0.0, vals)


def kernel_integral(bank, z, upto):
    """Closed form of ``int_0^upto kappa_z``."""
    if upto <= 0:
        return 0.0
    c = bank.centers[z]
    s = bank.sigma
    return float(ndtr((upto - c) / s) - ndtr(-c / s))


def kernel_integral_matrix(bank, upto):
    """Integrals of every kernel up to an array of bounds: shape ``upto.shape + (Z,)``."""
    upto = np.asarray(upto, dtype=float)
    c = np.asarray(bank.centers)
    s = bank.sigma
    vals = ndtr((upto[..., None] - c) / s) - ndtr(-c / s)
    return np.where(upto[..., None] <= 0, 0.0, vals)


def kernel_total_mass(bank):
    """Mass of each kernel on [0, inf)."""
    c = np.asarray(bank.centers)
    return ndtr(c / bank.sigma)


def _pair_gaps(dataset):
    gaps = []
    for seq in dataset.sequences:
        times = np.asarray([e.timestamp for e in seq.events])
        if len(times) < 2:
            continue
        diff = times[None, :] - times[:, None]
        gaps.append(diff[np.triu_indices(len(times), k=1)])
    if not gaps:
        return np.empty(0)
    return np.concatenate(gaps)


def default_kernel_bank(dataset, z_max=Z_MAX):
    """Bandwidth by Silverman's rule on within-sequence event gaps.

    sigma = 1.06 * s * m**(-1/5) over the m observed pairwise gaps; the
    kernel count Z = ceil(T_span / sigma) is clamped to [1, z_max] with
    centers evenly spaced on [0, T_span], T_span being the 95th
    percentile of gaps.  Degenerate gap collections floor sigma at
    1e-3 * T_span; with no co-occurring pairs at all the bank falls back
    to a single kernel at zero with sigma = T_span / 2 over the horizon
    span.
    """
    gaps = _pair_gaps(dataset)
    if gaps.size == 0 or float(np.percentile(gaps, 95)) <= 0:
        span = max((s.horizon for s in dataset.sequences), default=0.0)
        if span <= 0:
            span = 1.0
        return KernelBank(centers=(0.0,), sigma=span / 2)

    t_span = float(np.percentile(gaps, 95))
    m = gaps.size
    s = float(np.std(gaps, ddof=1)) if m > 1 else 0.0
    sigma = 1.06 * s * m ** (-0.2)
    floor = 1e-3 * t_span
    if not math.isfinite(sigma) or sigma < floor:
        sigma = floor
    z = max(1, min(z_max, math.ceil(t_span / sigma)))
    if z == 1:
        centers = (0.0,)
    else:
        centers = tuple(np.linspace(0.0, t_span, z))
    return KernelBank(centers=centers, sigma=sigma)


@dataclass
class HawkesModel:
    """Baselines ``mu`` (V,), impact tensor ``a`` (V x V x Z indexed
    [effect, cause, z]) and the kernel bank they refer to."""

    mu: np.ndarray
    a: np.ndarray
    kernels: KernelBank

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=float)
        self.a = np.asarray(self.a, dtype=float)
        v = self.mu.shape[0]
        if self.a.shape != (v, v, self.kernels.Z):
            raise ValueError(f"impact tensor shape {self.a.shape} does not match V={v}, Z={self.kernels.Z}")
        if (self.mu < 0).any() or (self.a < 0).any():
            raise ValueError("baselines and impact coefficients must be nonnegative")

    @property
    def V(self):
        return self.mu.shape[0]

    def copy(self):
        return HawkesModel(self.mu.copy(), self.a.copy(), self.kernels)

    def strengths(self):
        """Causal strength matrix [effect, cause]: mean impact over kernels."""
        return self.a.mean(axis=2)

    def branching_matrix(self):
        """Total kernel mass per (effect, cause) pair; its spectral radius
        gates simulation stability."""
        return self.a.sum(axis=2)

    def to_json(self):
        return {
            "V": self.V,
            "mu": self.mu.tolist(),
            "a": self.a.tolist(),
            "kernels": {"centers": list(self.kernels.centers), "sigma": self.kernels.sigma},
        }

    @classmethod
    def from_json(cls, obj):
        bank = KernelBank(centers=tuple(obj["kernels"]["centers"]), sigma=obj["kernels"]["sigma"])
        return cls(mu=np.asarray(obj["mu"]), a=np.asarray(obj["a"]), kernels=bank)


def intensity(model, seq, v, t):
    """lambda_v(t) given the sequence history strictly before t."""
    lam = float(model.mu[v])
    for e in seq.events:
        if e.timestamp >= t:
            break
        dt = t - e.timestamp
        k = kernel_matrix(model.kernels, np.asarray([dt]))[0]
        lam += float(model.a[v, e.type_id] @ k)
    return lam


def sequence_log_likelihood(model, seq):
    """Exact log-likelihood contribution of one sequence.

    Returns -inf when some event falls at zero intensity (degenerate
    likelihood) rather than raising.
    """
    times = np.asarray([e.timestamp for e in seq.events])
    types = np.asarray([e.type_id for e in seq.events], dtype=np.intp)
    horizon = seq.horizon
    comp = float(model.mu.sum()) * horizon
    if len(times) == 0:
        return -comp

    dt = times[:, None] - times[None, :]
    mask = dt > 0  # strict past only
    kmat = kernel_matrix(model.kernels, np.where(mask, dt, 0.0))
    apairs = model.a[types[:, None], types[None, :]]
    excitation = np.where(mask, (apairs * kmat).sum(axis=2), 0.0).sum(axis=1)
    lam = model.mu[types] + excitation

    integ = kernel_integral_matrix(model.kernels, horizon - times)
    a_effect_sum = model.a.sum(axis=0)  # (cause, z)
    comp += float((a_effect_sum[types] * integ).sum())

    if (lam <= 0).any():
        return float("-inf")
    return float(np.log(lam).sum()) - comp


def log_likelihood(model, dataset):
    """Dataset log-likelihood; the compensator integral is exact."""
    total = 0.0
    for seq in dataset.sequences:
        ll = sequence_log_likelihood(model, seq)
        if ll == float("-inf"):
            return float("-inf")
        total += ll
    return total


@dataclass
class GraphEdge:
    cause: str
    effect: str
    strength: float
    coverage: float
    confirmed: bool = False
    removed: bool = False

    def to_json(self):
        return {
            "cause": self.cause,
            "effect": self.effect,
            "strength": self.strength,
            "coverage": self.coverage,
            "confirmed": self.confirmed,
            "removed": self.removed,
        }


@dataclass
class CausalGraph:
    """Directed weighted graph over event types; the object the analyst
    edits.  At most one edge per ordered (cause, effect) pair."""

    nodes: list
    edges: list = field(default_factory=list)

    def __post_init__(self):
        seen = set()
        for e in self.edges:
            key = (e.cause, e.effect)
            if key in seen:
                raise ValueError(f"duplicate edge {key}")
            if e.confirmed and e.removed:
                raise ValueError(f"edge {key} cannot be both confirmed and removed")
            seen.add(key)

    def edge_map(self):
        return {(e.cause, e.effect): e for e in self.edges}

    def visible_edges(self):
        return [e for e in self.edges if not e.removed]

    def to_json(self):
        return {"nodes": list(self.nodes), "edges": [e.to_json() for e in self.edges]}

    @classmethod
    def from_json(cls, obj):
        edges = [GraphEdge(**e) for e in obj["edges"]]
        return cls(nodes=list(obj["nodes"]), edges=edges)
