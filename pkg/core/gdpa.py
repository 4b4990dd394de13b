"""Global-level private alignment.

Global embeddings far from their domain's memory-bank centroid (beyond a learnable radius)
are treated as domain-private candidates; only those enter the adversarial focal loss, whose
source/target coefficients come from Gaussian cdfs of the batch domain probabilities.
"""

from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from loguru import logger

from core import autodiff as ad
from core import events as ev
from core.autodiff import Tensor
from core.errors import CentroidError
from core.gaussmath import cdf, fit_gauss
from core.optim import AdamState, adam_step
from core.settings import settings

ZMode = Literal["mean", "fixed"]


@dataclass
class MemoryBank:
    """one centroid row per domain (0 = source, 1 = target)."""

    centroids: np.ndarray
    initialized: np.ndarray

    @classmethod
    def empty(cls, dim: int) -> "MemoryBank":
        return cls(centroids=np.zeros((2, dim)), initialized=np.zeros(2, dtype=bool))

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]

    def centroid(self, domain: int) -> np.ndarray:
        if not self.initialized[domain]:
            raise CentroidError(f"memory bank row {domain} is not initialized; run update_centroid first")
        return self.centroids[domain]


@dataclass
class LearnableRadius:
    """raw boundary parameters; the effective radius is softplus(raw) > 0."""

    raw: Tensor = field(default_factory=lambda: ad.parameter(np.zeros(2), name="radius_raw"))

    @classmethod
    def init(cls, value: float = 0.0) -> "LearnableRadius":
        return cls(ad.parameter(np.full(2, float(value)), name="radius_raw"))

    def effective(self, domain: int) -> Tensor:
        """differentiable scalar d for `domain`."""
        return ad.sum(ad.softplus(ad.take(self.raw, [domain])))


@dataclass(frozen=True)
class GlobalSplit:
    pos_idx: tuple[int, ...]
    neg_idx: tuple[int, ...]
    distances: tuple[float, ...] = ()

    @property
    def n(self) -> int:
        return len(self.pos_idx) + len(self.neg_idx)

    @property
    def neg_fraction(self) -> float:
        return len(self.neg_idx) / self.n if self.n else 0.0


@dataclass(frozen=True)
class GlobalWeights:
    w_s: float
    w_t: float
    phi_s: float = 0.5
    phi_t: float = 0.5
    z: float = 0.5
    weight_fig: float = 0.0
    fallback: bool = False

    def __iter__(self):
        return iter((self.w_s, self.w_t))


def distances(features: np.ndarray | Tensor, centroid: np.ndarray) -> np.ndarray:
    x = features.data if isinstance(features, Tensor) else np.asarray(features, dtype=np.float64)
    return np.linalg.norm(x - np.asarray(centroid)[None, :], axis=1)


def global_sample(features: np.ndarray | Tensor, centroid: np.ndarray | None, d: float) -> GlobalSplit:
    """negative iff ||x_i - C|| > d; a distance equal to d stays positive."""
    if centroid is None:
        raise CentroidError("centroid is not initialized; run update_centroid first")
    if not d > 0:
        raise ValueError(f"global_sample: radius must be > 0, got {d}")
    dist = distances(features, centroid)
    neg = np.flatnonzero(dist > d)
    pos = np.flatnonzero(dist <= d)
    return GlobalSplit(tuple(int(i) for i in pos), tuple(int(i) for i in neg), tuple(float(v) for v in dist))


def update_centroid(
    bank: MemoryBank,
    domain: int,
    batch_mean: np.ndarray,
    events: ev.EventLog | None = None,
) -> float | None:
    """M <- M * pi + mean * (1 - pi), pi = cos(mean, M). Returns pi (None when skipped or first fill)."""
    batch_mean = np.asarray(batch_mean, dtype=np.float64)
    if not np.all(np.isfinite(batch_mean)):
        raise ValueError("update_centroid: non-finite batch mean")
    mean_norm = float(np.linalg.norm(batch_mean))
    if mean_norm == 0.0:
        ev.record(events, ev.WARN_ZERO_NORM_MEAN, domain=domain)
        return None
    if not bank.initialized[domain]:
        bank.centroids[domain] = batch_mean
        bank.initialized[domain] = True
        logger.debug(f"memory bank row {domain} initialized")
        return None

    current = bank.centroids[domain]
    cur_norm = float(np.linalg.norm(current))
    pi = float(batch_mean @ current / (mean_norm * cur_norm)) if cur_norm > 0 else 0.0
    pi = min(max(pi, -1.0), 1.0)
    bank.centroids[domain] = current * pi + batch_mean * (1.0 - pi)
    return pi


def radius(r: LearnableRadius, domain: int) -> float:
    return float(np.logaddexp(0.0, r.raw.data[domain]))


def boundary_loss(dists: Sequence[float], split: GlobalSplit, d: Tensor | float) -> Tensor:
    """(1/n) sum eps_i (d - dist_i) + (1 - eps_i)(dist_i - d); only d carries gradient."""
    dist = np.asarray(dists, dtype=np.float64)
    signs = np.full(dist.shape, -1.0)
    signs[list(split.neg_idx)] = 1.0
    d = d if isinstance(d, Tensor) else ad.constant(d)
    return ad.mean(ad.mul(ad.constant(signs), ad.sub(d, ad.constant(dist))))


def gdpa_weights(
    probs_s: Sequence[float],
    probs_t: Sequence[float],
    z_mode: ZMode = "mean",
    z_fixed: float = 0.5,
    events: ev.EventLog | None = None,
) -> GlobalWeights:
    """Phi_s / (Phi_s + 1 - Phi_t) and its complement, Phi evaluated at z under each domain's batch Gaussian.

    `probs_*` are source probabilities (high for confidently-source samples).
    """
    ps = np.asarray(probs_s, dtype=np.float64).reshape(-1)
    pt = np.asarray(probs_t, dtype=np.float64).reshape(-1)
    if ps.size == 0 or pt.size == 0:
        raise ValueError("gdpa_weights: both probability lists must be non-empty")
    z = float(np.concatenate([ps, pt]).mean()) if z_mode == "mean" else float(z_fixed)
    phi_s = cdf(z, fit_gauss(ps))
    phi_t = cdf(z, fit_gauss(pt))
    denom = phi_s + (1.0 - phi_t)
    floor = settings.WEIGHT_DENOM_FLOOR

    weight_fig = 0.0
    if denom >= floor and (1.0 - phi_t) >= floor:
        weight_fig = (phi_s / (1.0 - phi_t)) / denom

    if denom < floor:
        ev.record(events, ev.WARN_WEIGHT_FALLBACK, phi_s=phi_s, phi_t=phi_t, z=z)
        return GlobalWeights(0.5, 0.5, phi_s, phi_t, z, weight_fig, fallback=True)

    w_s = phi_s / denom
    return GlobalWeights(w_s, 1.0 - w_s, phi_s, phi_t, z, weight_fig)


def gdpa_loss(
    p_neg_s: Tensor,
    p_neg_t: Tensor,
    w: Sequence[float],
    gamma: float = 2.0,
    literal: bool = False,
    events: ev.EventLog | None = None,
) -> Tensor:
    """-(1/n_neg) sum [ w_s (1-p_s)^g log p_s + w_t p_t^g log(1-p_t) ] over negative samples of both domains.

    `literal` swaps the target term for the printed p_t^g (1 - log p_t).
    """
    w_s, w_t = (float(v) for v in w)
    n_neg = p_neg_s.size + p_neg_t.size
    if n_neg == 0:
        ev.record(events, ev.SKIP_GDPA_EMPTY_NEG)
        return ad.constant(0.0)

    total: Tensor | float = 0.0
    if p_neg_s.size:
        src = ad.power(ad.sub(1.0, p_neg_s), gamma) * ad.plog(p_neg_s)
        total = total + w_s * ad.sum(src)
    if p_neg_t.size:
        tail = ad.sub(1.0, ad.plog(p_neg_t)) if literal else ad.log1m(p_neg_t)
        tgt = ad.power(p_neg_t, gamma) * tail
        total = total + w_t * ad.sum(tgt)
    return ad.mul(total, -1.0 / n_neg)


def fit_radius(
    dists: Sequence[float],
    raw_init: float = 0.0,
    lr: float = 0.1,
    max_steps: int = 5000,
    patience: int = 100,
) -> tuple[float, list[GlobalSplit]]:
    """Adam on the boundary loss alone over fixed distances; stops once the split is unchanged for `patience` steps.

    Returns the final radius and the split history.
    """
    dists = np.asarray(dists, dtype=np.float64)
    rad = LearnableRadius.init(raw_init)
    state = AdamState(lr=lr)
    history: list[GlobalSplit] = []
    stable = 0
    for _ in range(max_steps):
        d = rad.effective(0)
        split = global_sample(dists[:, None], np.zeros(1), d.item())
        if history and split.neg_idx == history[-1].neg_idx:
            stable += 1
        else:
            stable = 0
        history.append(split)
        if stable >= patience:
            break
        with ad.Tape() as tape:
            loss = boundary_loss(dists, split, rad.effective(0))
        grads = tape.backward(loss)
        adam_step({"raw": rad.raw}, {"raw": grads.get(rad.raw, np.zeros(2))}, state)
    return radius(rad, 0), history
