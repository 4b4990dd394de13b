"""Instance-level shared alignment.

Gradient norms eta = |q - y_d| of the instance discriminator are binned with width
psi = min((eta_max - eta_min) * eta_std, delta). The run of consecutive non-empty bins holding
the most frequent bin is kept (positives); sparse bins outside it are negatives; the rest is
excluded. Positives share one weight 1 - |mean eta - 0.5| / 0.5.
"""

import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from core import autodiff as ad
from core import events as ev
from core.autodiff import Tensor
from core.settings import settings


@dataclass(frozen=True)
class EtaStats:
    min: float
    max: float
    std: float
    mean: float


@dataclass
class GradNormHistogram:
    """`freqs[i]` counts bin `first_bin + i`; `bin_of_sample` holds absolute bin indices."""

    psi: float
    freqs: np.ndarray
    bin_of_sample: np.ndarray
    first_bin: int = 0
    eta_stats: EtaStats | None = None
    degenerate: bool = False

    @property
    def n(self) -> int:
        return int(self.bin_of_sample.size)

    @classmethod
    def from_freqs(cls, freqs: Sequence[int], psi: float = 0.1) -> "GradNormHistogram":
        """histogram whose samples are laid out bin by bin, in order."""
        freqs = np.asarray(freqs, dtype=np.int64)
        bins = np.repeat(np.arange(freqs.size), freqs)
        return cls(psi=psi, freqs=freqs, bin_of_sample=bins)


@dataclass(frozen=True)
class InstanceSplit:
    pos_idx: tuple[int, ...]
    neg_idx: tuple[int, ...]
    excluded_idx: tuple[int, ...] = ()
    run: tuple[int, int] | None = None  # absolute first/last bin of the kept run
    tau_omega: int = 0

    @property
    def n(self) -> int:
        return len(self.pos_idx) + len(self.neg_idx) + len(self.excluded_idx)


@dataclass(frozen=True)
class InstanceWeights:
    weights: np.ndarray = field(default_factory=lambda: np.zeros(0))
    positive_weight: float = 0.0
    eta_mean: float = float("nan")


def grad_norm(p: float, y_d: int) -> float:
    return abs(float(p) - float(y_d))


def grad_norms(probs: Sequence[float], labels: Sequence[int] | int) -> np.ndarray:
    return np.abs(np.asarray(probs, dtype=np.float64) - np.asarray(labels, dtype=np.float64))


def build_histogram(etas: Sequence[float], delta: float = 0.1) -> GradNormHistogram:
    arr = np.asarray(etas, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise ValueError("build_histogram: no samples")
    if not delta > 0:
        raise ValueError(f"build_histogram: delta must be > 0, got {delta}")

    stats = EtaStats(float(arr.min()), float(arr.max()), float(arr.std()), math.fsum(arr) / arr.size)
    psi = min((stats.max - stats.min) * stats.std, delta)

    if psi < settings.PSI_FLOOR:
        # all eta (nearly) equal: one bin of width delta
        b = int(math.floor(stats.mean / delta))
        return GradNormHistogram(
            psi=delta,
            freqs=np.array([arr.size], dtype=np.int64),
            bin_of_sample=np.full(arr.size, b, dtype=np.int64),
            first_bin=b,
            eta_stats=stats,
            degenerate=True,
        )

    bins = np.floor(arr / psi).astype(np.int64)
    first = int(bins.min())
    freqs = np.bincount(bins - first).astype(np.int64)
    return GradNormHistogram(psi=psi, freqs=freqs, bin_of_sample=bins, first_bin=first, eta_stats=stats)


def _runs(freqs: np.ndarray) -> list[tuple[int, int]]:
    """maximal [start, end] runs of non-empty bins (relative indices)."""
    nz = np.flatnonzero(freqs > 0)
    if nz.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(nz) != 1)
    starts = np.concatenate([[nz[0]], nz[breaks + 1]])
    ends = np.concatenate([nz[breaks], [nz[-1]]])
    return [(int(s), int(e)) for s, e in zip(starts, ends)]


def instance_sample(hist: GradNormHistogram) -> InstanceSplit:
    """Keep the run containing the most frequent bin (lowest start on ties).

    tau_omega = min(freq of the run's first bin, freq of its last bin); samples in outside bins
    with tau < tau_omega are negative, the remaining outside samples are excluded.
    """
    freqs = hist.freqs
    runs = _runs(freqs)
    if not runs:
        return InstanceSplit((), (), tuple(range(hist.n)))

    peak = freqs.max()
    start, end = min(r for r in runs if np.any(freqs[r[0] : r[1] + 1] == peak))
    tau_omega = int(min(freqs[start], freqs[end]))

    rel = hist.bin_of_sample - hist.first_bin
    in_run = (rel >= start) & (rel <= end)
    sparse = freqs[rel] < tau_omega
    pos = np.flatnonzero(in_run)
    neg = np.flatnonzero(~in_run & sparse)
    excluded = np.flatnonzero(~in_run & ~sparse)
    return InstanceSplit(
        tuple(int(i) for i in pos),
        tuple(int(i) for i in neg),
        tuple(int(i) for i in excluded),
        run=(start + hist.first_bin, end + hist.first_bin),
        tau_omega=tau_omega,
    )


def instance_weight(
    split: InstanceSplit,
    etas: Sequence[float],
    events: ev.EventLog | None = None,
) -> InstanceWeights:
    """shared weight for positives from their mean eta; 0 for everyone else."""
    etas = np.asarray(etas, dtype=np.float64).reshape(-1)
    weights = np.zeros(etas.size)
    if not split.pos_idx:
        ev.record(events, ev.SKIP_IDSA_EMPTY_POS, n=int(etas.size))
        return InstanceWeights(weights)

    pos = list(split.pos_idx)
    eta_mean = math.fsum(etas[pos]) / len(pos)
    w = min(max(1.0 - abs(eta_mean - 0.5) / 0.5, 0.0), 1.0)
    weights[pos] = w
    return InstanceWeights(weights, w, eta_mean)


def idsa_loss(
    probs: Tensor,
    weights: Sequence[float],
    labels: Sequence[int],
    literal: bool = False,
) -> Tensor:
    """-(1/n) sum W_i [ (1-y_i)(1-p_i) log p_i + y_i p_i log(1-p_i) ] over source probabilities p.

    `literal` applies the printed (1-p) log p + p (1 - log p) to every sample.
    """
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    if probs.size == 0:
        return ad.constant(0.0)

    if literal:
        terms = ad.sub(1.0, probs) * ad.plog(probs) + probs * ad.sub(1.0, ad.plog(probs))
        return ad.mul(ad.mean(ad.constant(w) * terms), -1.0)

    src = ad.constant(w * (1.0 - y)) * ad.sub(1.0, probs) * ad.plog(probs)
    tgt = ad.constant(w * y) * probs * ad.log1m(probs)
    return ad.mul(ad.mean(src + tgt), -1.0)
