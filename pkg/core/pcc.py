"""Private-class constraint: cross-space consistency of domain-private samples."""

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from core import autodiff as ad
from core import events as ev
from core.autodiff import Tensor


@dataclass(frozen=True)
class PrivateSet:
    """classes predicted in exactly one domain, with the member sample indices per domain."""

    categories: frozenset[int]
    private_s: frozenset[int]
    private_t: frozenset[int]
    members_s: tuple[int, ...]
    members_t: tuple[int, ...]


@dataclass(frozen=True)
class ConsistencyScore:
    epsilon: Tensor | None
    n: int = 0

    @property
    def defined(self) -> bool:
        return self.epsilon is not None

    @property
    def value(self) -> float:
        return self.epsilon.item() if self.epsilon is not None else 0.0


def private_categories(preds_s: Sequence[int], preds_t: Sequence[int]) -> PrivateSet:
    preds_s = [int(c) for c in np.asarray(preds_s).reshape(-1)]
    preds_t = [int(c) for c in np.asarray(preds_t).reshape(-1)]
    set_s, set_t = set(preds_s), set(preds_t)
    private_s = frozenset(set_s - set_t)
    private_t = frozenset(set_t - set_s)
    return PrivateSet(
        categories=private_s | private_t,
        private_s=private_s,
        private_t=private_t,
        members_s=tuple(i for i, c in enumerate(preds_s) if c in private_s),
        members_t=tuple(i for i, c in enumerate(preds_t) if c in private_t),
    )


def consistency(features: Tensor, probs: Tensor, events: ev.EventLog | None = None) -> ConsistencyScore:
    """eps = (1/n) cos(G, g), G_i = ||x_i - mean x||, g_i = |p_i - mean p|."""
    n = features.shape[0] if features.data.ndim else 0
    if n < 2:
        ev.record(events, ev.SKIP_PCC_UNDEFINED, reason="fewer than 2 private samples", n=n)
        return ConsistencyScore(None, n)

    centroid = ad.mean(features, axis=0)
    G = ad.norm(ad.bias_add(features, ad.mul(centroid, -1.0)), axis=1)
    g = ad.absolute(ad.sub(probs, ad.mean(probs)))
    norm_G, norm_g = ad.norm(G), ad.norm(g)
    if norm_G.item() == 0.0 or norm_g.item() == 0.0:
        ev.record(events, ev.SKIP_PCC_UNDEFINED, reason="zero-norm distance profile", n=n)
        return ConsistencyScore(None, n)

    cos = ad.div(ad.sum(ad.mul(G, g)), ad.mul(norm_G, norm_g))
    return ConsistencyScore(ad.mul(cos, 1.0 / n), n)


def pcc_loss(eps_s: ConsistencyScore, eps_t: ConsistencyScore, events: ev.EventLog | None = None) -> Tensor:
    """(eps_s - eps_t)^2 with the source side detached."""
    if not (eps_s.defined and eps_t.defined):
        ev.record(events, ev.SKIP_PCC_UNDEFINED, reason="undefined consistency", s=eps_s.defined, t=eps_t.defined)
        return ad.constant(0.0)
    return ad.power(ad.sub(ad.detach(eps_s.epsilon), eps_t.epsilon), 2)
