"""Synthetic universal-domain-adaptation scenarios.

Each class is an isotropic unit-variance Gaussian cluster; target copies of shared classes are
translated by a constant shift along the axes no class mean uses, so the shift carries no class
information. A pseudo-image draws `m` instances from one class cluster and its global feature is
the instance mean plus small isotropic noise.

Random draws come from `SeedSequence([seed, stream, call_index])`, so any (stream, call) pair can
be regenerated independently of the others.
"""

from dataclasses import dataclass
from fractions import Fraction
from typing import Literal

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict

from core.errors import ScenarioError
from core.settings import settings

ScenarioKind = Literal["open", "partial_source", "partial_target", "closed"]

TRAIN_STREAM = 0
EVAL_STREAM = 1
LAYOUT_STREAM = 2


@dataclass(frozen=True, eq=False)
class Scenario:
    beta: float
    n_union: int
    dim: int
    shift: float
    seed: int
    kind: str
    categories_s: tuple[int, ...]
    categories_t: tuple[int, ...]
    means: np.ndarray  # (n_union, dim) source-domain class means
    shift_vector: np.ndarray  # (dim,) added to target shared-class means
    instances_per_image: int = 8
    spacing: float = 2.0
    global_noise: float = 0.05

    @property
    def shared(self) -> tuple[int, ...]:
        return tuple(sorted(set(self.categories_s) & set(self.categories_t)))

    @property
    def private_s(self) -> tuple[int, ...]:
        return tuple(sorted(set(self.categories_s) - set(self.categories_t)))

    @property
    def private_t(self) -> tuple[int, ...]:
        return tuple(sorted(set(self.categories_t) - set(self.categories_s)))

    @property
    def realized_beta(self) -> float:
        union = set(self.categories_s) | set(self.categories_t)
        return len(self.shared) / len(union)

    def categories(self, domain: int) -> tuple[int, ...]:
        return self.categories_s if domain == settings.SOURCE else self.categories_t

    def class_mean(self, domain: int, cls: int) -> np.ndarray:
        if domain == settings.TARGET and cls in self.shared:
            return self.means[cls] + self.shift_vector
        return self.means[cls]

    def to_document(self) -> "ScenarioDocument":
        return ScenarioDocument(
            beta=self.beta,
            n_union=self.n_union,
            dim=self.dim,
            shift=self.shift,
            seed=self.seed,
            kind=self.kind,
            categories_s=list(self.categories_s),
            categories_t=list(self.categories_t),
            means=self.means.tolist(),
            shift_vector=self.shift_vector.tolist(),
            instances_per_image=self.instances_per_image,
            spacing=self.spacing,
            global_noise=self.global_noise,
        )

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_document().model_dump(), sort_keys=False)

    @classmethod
    def from_yaml(cls, text: str) -> "Scenario":
        doc = ScenarioDocument.model_validate(yaml.safe_load(text))
        return doc.to_scenario()


class ScenarioDocument(BaseModel):
    """versioned, serializable form of a Scenario."""

    model_config = ConfigDict(extra="forbid")

    schema_version: Literal[1] = settings.SCHEMA_VERSION
    beta: float
    n_union: int
    dim: int
    shift: float
    seed: int
    kind: ScenarioKind
    categories_s: list[int]
    categories_t: list[int]
    means: list[list[float]]
    shift_vector: list[float]
    instances_per_image: int = 8
    spacing: float = 2.0
    global_noise: float = 0.05

    def to_scenario(self) -> Scenario:
        return Scenario(
            beta=self.beta,
            n_union=self.n_union,
            dim=self.dim,
            shift=self.shift,
            seed=self.seed,
            kind=self.kind,
            categories_s=tuple(self.categories_s),
            categories_t=tuple(self.categories_t),
            means=_frozen(np.asarray(self.means, dtype=np.float64)),
            shift_vector=_frozen(np.asarray(self.shift_vector, dtype=np.float64)),
            instances_per_image=self.instances_per_image,
            spacing=self.spacing,
            global_noise=self.global_noise,
        )


@dataclass(frozen=True, eq=False)
class PseudoImage:
    instances: np.ndarray  # (m, dim)
    global_feature: np.ndarray  # (dim,)
    domain: int
    labels: np.ndarray | None = None  # per-instance class ids; None on the training view of target images

    @property
    def label(self) -> int | None:
        return None if self.labels is None else int(self.labels[0])


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


def realizable_ratios(n_union: int) -> list[Fraction]:
    return [Fraction(k, n_union) for k in range(1, n_union + 1)]


def _nearest(beta: float, n_union: int) -> tuple[Fraction, ...]:
    ratios = realizable_ratios(n_union)
    below = [r for r in ratios if r < beta]
    above = [r for r in ratios if r > beta]
    return tuple(([below[-1]] if below else []) + ([above[0]] if above else []))


def shared_count(beta: float, n_union: int) -> int:
    """number of shared classes realizing `beta`; raises ScenarioError listing the nearest ratios otherwise."""
    if n_union < 1:
        raise ScenarioError(f"n_union must be >= 1, got {n_union}")
    k = round(beta * n_union)
    if abs(k - beta * n_union) > 1e-9 or not 1 <= k <= n_union:
        nearest = _nearest(beta, n_union)
        shown = ", ".join(f"{r.numerator}/{r.denominator}={float(r):.4g}" for r in nearest)
        raise ScenarioError(
            f"beta={beta} is not realizable with n_union={n_union}; nearest realizable ratios: {shown}",
            nearest=nearest,
        )
    return k


def _layout(n_union: int, dim: int, spacing: float, seed: int) -> np.ndarray:
    """Class means on scaled axes, pairwise exactly `spacing` apart, when n_union <= dim.

    Otherwise random unit directions of the same norm: distances then scatter around `spacing`
    and can fall below it.
    """
    scale = spacing / np.sqrt(2.0)
    if n_union <= dim:
        return np.eye(n_union, dim) * scale
    rng = np.random.default_rng(np.random.SeedSequence([seed, LAYOUT_STREAM]))
    dirs = rng.standard_normal((n_union, dim))
    return dirs / np.linalg.norm(dirs, axis=1, keepdims=True) * scale


def _shift_direction(n_union: int, dim: int) -> np.ndarray:
    """unit direction spread over the axes no class mean uses; all axes when there are none."""
    direction = np.zeros(dim)
    free = dim - n_union
    if free > 0:
        direction[n_union:] = 1.0 / np.sqrt(free)
    else:
        direction[:] = 1.0 / np.sqrt(dim)
    return direction


def make_scenario(
    beta: float,
    n_union: int,
    dim: int = 16,
    shift: float = 0.75,
    seed: int = 0,
    kind: ScenarioKind = "open",
    instances_per_image: int = 8,
    spacing: float = 2.0,
    global_noise: float = 0.05,
) -> Scenario:
    k = shared_count(beta, n_union)
    shared = list(range(k))
    private = list(range(k, n_union))
    if k == n_union:
        kind = "closed"
    elif kind == "closed":
        raise ScenarioError(f"closed scenario needs beta=1, got beta={beta}", nearest=(Fraction(1),))

    if kind == "partial_source":
        priv_s, priv_t = private, []
    elif kind == "partial_target":
        priv_s, priv_t = [], private
    else:
        priv_s, priv_t = private[0::2], private[1::2]

    means = _layout(n_union, dim, spacing, seed)
    shift_vector = shift * _shift_direction(n_union, dim)
    return Scenario(
        beta=float(beta),
        n_union=n_union,
        dim=dim,
        shift=float(shift),
        seed=seed,
        kind=kind,
        categories_s=tuple(shared + priv_s),
        categories_t=tuple(shared + priv_t),
        means=_frozen(means),
        shift_vector=_frozen(shift_vector),
        instances_per_image=instances_per_image,
        spacing=spacing,
        global_noise=global_noise,
    )


def _rng(sc: Scenario, stream: int, call_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([sc.seed, stream, call_index]))


def _draw(sc: Scenario, domain: int, n_images: int, rng: np.random.Generator) -> list[PseudoImage]:
    cats = np.asarray(sc.categories(domain))
    classes = rng.choice(cats, size=n_images)
    m = sc.instances_per_image
    images = []
    for cls in classes:
        inst = sc.class_mean(domain, int(cls))[None, :] + rng.standard_normal((m, sc.dim))
        glob = inst.mean(axis=0) + sc.global_noise * rng.standard_normal(sc.dim)
        images.append(PseudoImage(inst, glob, domain, np.full(m, int(cls))))
    return images


def sample_batch(sc: Scenario, images_per_domain: int, call_index: int = 0) -> tuple[list, list]:
    """training view: source images carry labels, target labels are stripped."""
    rng = _rng(sc, TRAIN_STREAM, call_index)
    source = _draw(sc, settings.SOURCE, images_per_domain, rng)
    target = [PseudoImage(im.instances, im.global_feature, im.domain) for im in _draw(sc, settings.TARGET, images_per_domain, rng)]
    return source, target


def sample_holdout(sc: Scenario, images_per_domain: int, call_index: int = 0) -> tuple[list, list]:
    """evaluation view from a separate stream; both domains labeled."""
    rng = _rng(sc, EVAL_STREAM, call_index)
    return _draw(sc, settings.SOURCE, images_per_domain, rng), _draw(sc, settings.TARGET, images_per_domain, rng)


def stack_images(images: list[PseudoImage]) -> tuple[np.ndarray, np.ndarray | None, np.ndarray]:
    """(instances (n*m, dim), instance labels or None, global features (n, dim))."""
    inst = np.concatenate([im.instances for im in images], axis=0)
    glob = np.stack([im.global_feature for im in images], axis=0)
    if any(im.labels is None for im in images):
        return inst, None, glob
    return inst, np.concatenate([im.labels for im in images]), glob
