"""DPA training loop.

Total objective per step: L_det + L_gdpa + L_idsa + alpha * L_pcc, minimized with momentum SGD over the
model parameters. The learnable radius is trained on its own tape with Adam on the boundary loss,
so neither optimizer ever sees the other's parameters.

Discriminator heads output logits; sigmoid gives q = P(target). The adversarial losses are written
for the source probability 1 - q. Discriminator parameters step with `disc_lr_mult` times the model lr.
Logged per-level domain probabilities come from the fixed monitor holdout, not the training batch.
"""

from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from loguru import logger
from pydantic import BaseModel, ConfigDict
from sklearn.linear_model import LogisticRegression
from sklearn.model_selection import train_test_split
from tqdm import tqdm

from core import autodiff as ad
from core import events as ev
from core.autodiff import Tape, Tensor
from core.config import AblationConfig, RunConfig, TrainerConfig
from core.errors import NumericError
from core.gdpa import (
    GlobalSplit,
    GlobalWeights,
    LearnableRadius,
    MemoryBank,
    boundary_loss,
    gdpa_loss,
    gdpa_weights,
    global_sample,
    radius,
    update_centroid,
)
from core.idsa import InstanceSplit, build_histogram, grad_norms, idsa_loss, instance_sample, instance_weight
from core.optim import AdamState, SGDState, adam_step, sgd_step
from core.pcc import ConsistencyScore, consistency, pcc_loss, private_categories
from core.scenario import (
    EVAL_STREAM,
    PseudoImage,
    Scenario,
    make_scenario,
    sample_batch,
    sample_holdout,
    stack_images,
)
from core.settings import settings

__all__ = [
    "AdamState",
    "DPATrainer",
    "EvaluationRecord",
    "MetricsRow",
    "ModelParams",
    "SGDState",
    "adam_step",
    "evaluate",
    "sgd_step",
]

INIT_STREAM = 3
RADIUS_RAW_BOUND = 50.0  # softplus(-50) is still a positive double
DISCRIMINATOR_PARAMS = ("genc_w", "genc_b", "ghead_w", "ghead_b", "inst_w", "inst_b", "ihead_w", "ihead_b")


@dataclass
class ModelParams:
    """feature extractor, global discriminator (encoder + head), instance discriminator and classifier."""

    feat_w: Tensor
    feat_b: Tensor
    genc_w: Tensor
    genc_b: Tensor
    ghead_w: Tensor
    ghead_b: Tensor
    inst_w: Tensor
    inst_b: Tensor
    ihead_w: Tensor
    ihead_b: Tensor
    cls_w: Tensor
    cls_b: Tensor

    @classmethod
    def init(cls, in_dim: int, embed_dim: int, hidden: int, n_classes: int, seed: int = 0) -> "ModelParams":
        rng = np.random.default_rng(np.random.SeedSequence([seed, INIT_STREAM]))

        def dense(fan_in: int, *shape: int) -> np.ndarray:
            return rng.standard_normal(shape) / np.sqrt(fan_in)

        return cls(
            feat_w=ad.parameter(dense(in_dim, in_dim, embed_dim), "feat_w"),
            feat_b=ad.parameter(np.zeros(embed_dim), "feat_b"),
            genc_w=ad.parameter(dense(embed_dim, embed_dim, hidden), "genc_w"),
            genc_b=ad.parameter(np.zeros(hidden), "genc_b"),
            ghead_w=ad.parameter(dense(hidden, hidden), "ghead_w"),
            ghead_b=ad.parameter(0.0, "ghead_b"),
            inst_w=ad.parameter(dense(embed_dim, embed_dim, hidden), "inst_w"),
            inst_b=ad.parameter(np.zeros(hidden), "inst_b"),
            ihead_w=ad.parameter(dense(hidden, hidden), "ihead_w"),
            ihead_b=ad.parameter(0.0, "ihead_b"),
            cls_w=ad.parameter(dense(embed_dim, embed_dim, n_classes), "cls_w"),
            cls_b=ad.parameter(np.zeros(n_classes), "cls_b"),
        )

    def named(self) -> dict[str, Tensor]:
        return dict(vars(self))

    def copy(self) -> "ModelParams":
        return ModelParams(**{k: ad.parameter(v.data.copy(), k) for k, v in self.named().items()})

    # forward pieces
    def features(self, x: np.ndarray | Tensor) -> Tensor:
        x = x if isinstance(x, Tensor) else ad.constant(x)
        return ad.bias_add(ad.matmul(x, self.feat_w), self.feat_b)

    def global_embed(self, feats: Tensor, lam: float = 1.0) -> Tensor:
        """encoder output x_e, fed through gradient reversal."""
        return ad.tanh(ad.bias_add(ad.matmul(ad.grl(feats, lam), self.genc_w), self.genc_b))

    def global_logit(self, embed: Tensor) -> Tensor:
        return ad.add(ad.matmul(embed, self.ghead_w), self.ghead_b)

    def instance_logit(self, feats: Tensor, lam: float = 1.0) -> Tensor:
        hidden = ad.tanh(ad.bias_add(ad.matmul(ad.grl(feats, lam), self.inst_w), self.inst_b))
        return ad.add(ad.matmul(hidden, self.ihead_w), self.ihead_b)

    def class_logits(self, feats: Tensor) -> Tensor:
        return ad.bias_add(ad.matmul(feats, self.cls_w), self.cls_b)

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.argmax(self.class_logits(self.features(x)).data, axis=1)


class MetricsRow(BaseModel):
    """one CSV row; field order is the column order."""

    model_config = ConfigDict(extra="forbid")

    iteration: int
    epoch: int
    alpha: float
    lr: float
    p_global_s: float
    p_global_t: float
    p_inst_s: float
    p_inst_t: float
    gap_global: float
    gap_instance: float
    w_s: float
    w_t: float
    weight_fig: float
    inst_weight_s: float
    inst_weight_t: float
    neg_frac_global_s: float
    neg_frac_global_t: float
    neg_frac_inst_s: float
    neg_frac_inst_t: float
    excluded_frac_inst: float
    loss_det: float
    loss_gdpa: float
    loss_idsa: float
    loss_pcc: float
    loss_bound: float
    loss_total: float
    target_shared_acc: float
    radius_s: float
    radius_t: float
    eps_s: float
    eps_t: float
    events: str = "none"


class EvaluationRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    shared_accuracy: float
    centroid_accuracy: float
    gap_global: float
    gap_instance: float
    probe_accuracy: float
    alignment_score: float
    n_shared_target: int


@dataclass
class StepTerms:
    """loss tensors of one forward pass plus the sampling state that produced them."""

    det: Tensor
    gdpa: Tensor
    idsa: Tensor
    pcc: Tensor
    total: Tensor
    alpha: float
    embed_means: tuple[np.ndarray, np.ndarray]
    splits: tuple[GlobalSplit, GlobalSplit]
    inst_splits: tuple[InstanceSplit, InstanceSplit]
    global_weights: GlobalWeights
    inst_weights: tuple[float, float]
    eps: tuple[ConsistencyScore, ConsistencyScore]


@dataclass(frozen=True)
class MonitorStats:
    target_shared_acc: float
    p_global_s: float
    p_global_t: float
    p_inst_s: float
    p_inst_t: float


def shared_accuracy(preds: np.ndarray, labels: np.ndarray, shared: tuple[int, ...]) -> tuple[float, int]:
    """accuracy over samples whose true class is shared; (0, 0) when there are none."""
    mask = np.isin(labels, shared)
    n = int(mask.sum())
    if n == 0:
        return 0.0, 0
    return float(np.mean(preds[mask] == labels[mask])), n


def _mean_q(logit: Tensor) -> float:
    return float(ad.sigmoid(logit).data.mean())


@dataclass
class DPATrainer:
    scenario: Scenario
    config: TrainerConfig = field(default_factory=TrainerConfig)
    ablation: AblationConfig = field(default_factory=AblationConfig)

    def __post_init__(self) -> None:
        cfg = self.config
        self.params = ModelParams.init(
            self.scenario.dim, cfg.embed_dim, cfg.disc_hidden, self.scenario.n_union, seed=self.scenario.seed
        )
        self.bank = MemoryBank.empty(cfg.disc_hidden)
        self.radius = LearnableRadius.init(cfg.radius_init)
        self.sgd = SGDState(
            lr=cfg.lr,
            momentum=cfg.momentum,
            weight_decay=cfg.weight_decay,
            lr_mult=dict.fromkeys(DISCRIMINATOR_PARAMS, cfg.disc_lr_mult),
        )
        self.adam = AdamState(lr=cfg.radius_lr)
        self.events = ev.EventLog()
        self.iteration = 0
        self._monitor: tuple[list, list] | None = None
        self._holdout: tuple[list, list] | None = None

    @classmethod
    def from_config(cls, cfg: RunConfig, seed: int) -> "DPATrainer":
        sc = cfg.scenario
        scenario = make_scenario(
            sc.beta,
            sc.n_union,
            dim=sc.dim,
            shift=sc.shift,
            seed=seed,
            kind=sc.kind,
            instances_per_image=sc.instances_per_image,
            spacing=sc.spacing,
            global_noise=sc.global_noise,
        )
        return cls(scenario, cfg.trainer, cfg.ablation)

    # schedules
    def lr_at(self, iteration: int) -> float:
        return self.config.lr if iteration < self.config.decay_at else self.config.lr_decayed

    def alpha_at(self, iteration: int) -> float:
        if not self.ablation.pcc or iteration < self.config.epoch_iters:
            return 0.0
        return self.config.alpha

    @property
    def monitor(self) -> tuple[list, list]:
        if self._monitor is None:
            self._monitor = sample_holdout(self.scenario, self.config.monitor_images, call_index=1)
        return self._monitor

    @property
    def holdout(self) -> tuple[list, list]:
        if self._holdout is None:
            self._holdout = sample_holdout(self.scenario, self.config.holdout_images, call_index=0)
        return self._holdout

    def _instance_weights(
        self, q_s: np.ndarray, q_t: np.ndarray
    ) -> tuple[np.ndarray, tuple[InstanceSplit, InstanceSplit], tuple[float, float]]:
        cfg = self.config
        eta_s = grad_norms(q_s, settings.SOURCE)
        eta_t = grad_norms(q_t, settings.TARGET)
        if cfg.histogram_mode == "joint":
            etas = np.concatenate([eta_s, eta_t])
            split = instance_sample(build_histogram(etas, cfg.delta))
            w = instance_weight(split, etas, self.events)
            n_s = eta_s.size
            split_s = _restrict(split, 0, n_s)
            split_t = _restrict(split, n_s, etas.size)
            return w.weights, (split_s, split_t), (w.positive_weight, w.positive_weight)

        split_s = instance_sample(build_histogram(eta_s, cfg.delta))
        split_t = instance_sample(build_histogram(eta_t, cfg.delta))
        w_s = instance_weight(split_s, eta_s, self.events)
        w_t = instance_weight(split_t, eta_t, self.events)
        return (
            np.concatenate([w_s.weights, w_t.weights]),
            (split_s, split_t),
            (w_s.positive_weight, w_t.positive_weight),
        )

    def forward(self, source: list[PseudoImage], target: list[PseudoImage]) -> StepTerms:
        """Builds every loss term for one batch. Call inside a `Tape` to get gradients."""
        cfg, abl, p = self.config, self.ablation, self.params
        inst_s, labels_s, glob_s = stack_images(source)
        inst_t, _, glob_t = stack_images(target)

        h_s, h_t = p.features(inst_s), p.features(inst_t)
        loss_det = ad.cross_entropy(p.class_logits(h_s), labels_s)

        # global level
        e_s = p.global_embed(p.features(glob_s), cfg.grl_lambda)
        e_t = p.global_embed(p.features(glob_t), cfg.grl_lambda)
        q_gs, q_gt = ad.sigmoid(p.global_logit(e_s)), ad.sigmoid(p.global_logit(e_t))
        src_gs, src_gt = ad.sub(1.0, q_gs), ad.sub(1.0, q_gt)
        means = (e_s.data.mean(axis=0), e_t.data.mean(axis=0))
        for domain, m in enumerate(means):
            if not self.bank.initialized[domain]:
                update_centroid(self.bank, domain, m, self.events)
        splits = tuple(
            global_sample(e.data, self.bank.centroid(domain), radius(self.radius, domain))
            if self.bank.initialized[domain]
            else GlobalSplit(tuple(range(e.shape[0])), ())
            for domain, e in enumerate((e_s, e_t))
        )
        weights = gdpa_weights(src_gs.data, src_gt.data, cfg.z_mode, cfg.z_fixed, self.events)
        if abl.gdpa:
            loss_gdpa = gdpa_loss(
                ad.take(src_gs, splits[0].neg_idx),
                ad.take(src_gt, splits[1].neg_idx),
                weights,
                cfg.gamma,
                cfg.literal_gdpa,
                self.events,
            )
        else:
            loss_gdpa = gdpa_loss(src_gs, src_gt, (0.5, 0.5), cfg.gamma, cfg.literal_gdpa, self.events)

        # instance level
        q_is = ad.sigmoid(p.instance_logit(h_s, cfg.grl_lambda))
        q_it = ad.sigmoid(p.instance_logit(h_t, cfg.grl_lambda))
        inst_w, inst_splits, pos_w = self._instance_weights(q_is.data, q_it.data)
        if not abl.idsa:
            inst_w = np.ones_like(inst_w)
        domain_labels = np.concatenate(
            [np.full(q_is.size, settings.SOURCE), np.full(q_it.size, settings.TARGET)]
        )
        loss_idsa = idsa_loss(ad.sub(1.0, ad.concat([q_is, q_it])), inst_w, domain_labels, cfg.literal_idsa)

        # private classes
        alpha = self.alpha_at(self.iteration)
        pcc_events = self.events if alpha > 0 else None
        preds_s = np.argmax(p.class_logits(h_s).data, axis=1)
        preds_t = np.argmax(p.class_logits(h_t).data, axis=1)
        private = private_categories(preds_s, preds_t)
        eps_s = consistency(ad.take(h_s, private.members_s), ad.take(q_is, private.members_s), pcc_events)
        eps_t = consistency(ad.take(h_t, private.members_t), ad.take(q_it, private.members_t), pcc_events)

        total = ad.add(ad.add(loss_det, loss_gdpa), loss_idsa)
        loss_pcc = ad.constant(0.0)
        if alpha > 0:
            loss_pcc = pcc_loss(eps_s, eps_t, self.events)
            total = ad.add(total, ad.mul(loss_pcc, alpha))

        return StepTerms(
            det=loss_det,
            gdpa=loss_gdpa,
            idsa=loss_idsa,
            pcc=loss_pcc,
            total=total,
            alpha=alpha,
            embed_means=means,
            splits=splits,
            inst_splits=inst_splits,
            global_weights=weights,
            inst_weights=pos_w,
            eps=(eps_s, eps_t),
        )

    def _radius_step(self, splits: tuple[GlobalSplit, GlobalSplit]) -> float:
        with Tape() as tape:
            terms = [
                boundary_loss(split.distances, split, self.radius.effective(domain))
                for domain, split in enumerate(splits)
                if split.distances
            ]
            loss = ad.add(terms[0], terms[1]) if len(terms) == 2 else (terms[0] if terms else None)
        if loss is None:
            return 0.0
        grads = tape.backward(loss)
        raw = self.radius.raw
        adam_step({"radius_raw": raw}, {"radius_raw": grads.get(raw)}, self.adam, self.events)
        np.clip(raw.data, -RADIUS_RAW_BOUND, RADIUS_RAW_BOUND, out=raw.data)
        return loss.item()

    def monitor_stats(self) -> MonitorStats:
        """shared accuracy and per-level mean P(target) on the fixed monitor holdout."""
        p, lam = self.params, self.config.grl_lambda
        source, target = self.monitor
        inst_s, _, glob_s = stack_images(source)
        inst_t, labels_t, glob_t = stack_images(target)
        h_t = p.features(inst_t)
        acc, _ = shared_accuracy(np.argmax(p.class_logits(h_t).data, axis=1), labels_t, self.scenario.shared)
        return MonitorStats(
            target_shared_acc=acc,
            p_global_s=_mean_q(p.global_logit(p.global_embed(p.features(glob_s), lam))),
            p_global_t=_mean_q(p.global_logit(p.global_embed(p.features(glob_t), lam))),
            p_inst_s=_mean_q(p.instance_logit(p.features(inst_s), lam)),
            p_inst_t=_mean_q(p.instance_logit(h_t, lam)),
        )

    def train_step(self, batch: tuple[list, list] | None = None) -> MetricsRow:
        it = self.iteration
        if batch is None:
            batch = sample_batch(self.scenario, self.config.images_per_domain, call_index=it)
        radii = (radius(self.radius, 0), radius(self.radius, 1))

        with Tape() as tape:
            terms = self.forward(*batch)
        if not np.isfinite(terms.total.item()):
            raise NumericError(f"non-finite total loss at iteration {it}")
        grads = tape.backward(terms.total)

        self.sgd.lr = self.lr_at(it)
        named = self.params.named()
        sgd_step(named, {k: grads[t] for k, t in named.items() if t in grads}, self.sgd, self.events)
        loss_bound = self._radius_step(terms.splits)
        for domain, m in enumerate(terms.embed_means):
            update_centroid(self.bank, domain, m, self.events)

        row = self._row(it, terms, loss_bound, radii)
        self.iteration += 1
        return row

    def _row(self, it: int, t: StepTerms, loss_bound: float, radii: tuple[float, float]) -> MetricsRow:
        mon = self.monitor_stats()
        split_s, split_t = t.inst_splits
        n_inst = split_s.n + split_t.n
        names = sorted(set(e.name for e in self.events.drain()))
        return MetricsRow(
            iteration=it,
            epoch=it // self.config.epoch_iters,
            alpha=t.alpha,
            lr=self.sgd.lr,
            p_global_s=mon.p_global_s,
            p_global_t=mon.p_global_t,
            p_inst_s=mon.p_inst_s,
            p_inst_t=mon.p_inst_t,
            gap_global=abs(mon.p_global_t - mon.p_global_s),
            gap_instance=abs(mon.p_inst_t - mon.p_inst_s),
            w_s=t.global_weights.w_s,
            w_t=t.global_weights.w_t,
            weight_fig=t.global_weights.weight_fig,
            inst_weight_s=t.inst_weights[0],
            inst_weight_t=t.inst_weights[1],
            neg_frac_global_s=t.splits[0].neg_fraction,
            neg_frac_global_t=t.splits[1].neg_fraction,
            neg_frac_inst_s=len(split_s.neg_idx) / split_s.n if split_s.n else 0.0,
            neg_frac_inst_t=len(split_t.neg_idx) / split_t.n if split_t.n else 0.0,
            excluded_frac_inst=(len(split_s.excluded_idx) + len(split_t.excluded_idx)) / n_inst if n_inst else 0.0,
            loss_det=t.det.item(),
            loss_gdpa=t.gdpa.item(),
            loss_idsa=t.idsa.item(),
            loss_pcc=t.pcc.item(),
            loss_bound=loss_bound,
            loss_total=t.total.item(),
            target_shared_acc=mon.target_shared_acc,
            radius_s=radii[0],
            radius_t=radii[1],
            eps_s=t.eps[0].value,
            eps_t=t.eps[1].value,
            events=";".join(names) or "none",
        )

    def fit(self, iterations: int | None = None, progress: bool = True) -> pd.DataFrame:
        """Runs the schedule; keeps every `log_every`-th row and the last one."""
        total = iterations or self.config.iterations
        last = self.iteration + total - 1
        rows = []
        logger.info(
            f"training: beta={self.scenario.beta} seed={self.scenario.seed} ablation={self.ablation.name} "
            f"iterations={total}"
        )
        for _ in tqdm(range(total), desc="train", disable=not progress):
            row = self.train_step()
            if row.iteration % self.config.log_every == 0 or row.iteration == last:
                rows.append(row.model_dump())
                logger.debug(
                    f"it={row.iteration} total={row.loss_total:.4f} gap_g={row.gap_global:.4f} "
                    f"gap_i={row.gap_instance:.4f} acc={row.target_shared_acc:.3f}"
                )
        return pd.DataFrame(rows, columns=list(settings.METRICS_COLUMNS))

    def evaluate(self) -> EvaluationRecord:
        return evaluate(self.params.copy(), self.scenario, self.holdout, self.config.grl_lambda)


def _restrict(split: InstanceSplit, lo: int, hi: int) -> InstanceSplit:
    """the part of a joint split covering indices [lo, hi), re-based to 0."""

    def part(idx: tuple[int, ...]) -> tuple[int, ...]:
        return tuple(i - lo for i in idx if lo <= i < hi)

    return InstanceSplit(part(split.pos_idx), part(split.neg_idx), part(split.excluded_idx), split.run, split.tau_omega)


def _probe_accuracy(feats_s: np.ndarray, feats_t: np.ndarray, seed: int) -> float:
    """held-out accuracy of a logistic-regression domain classifier on class-balanced domain samples."""
    n = min(len(feats_s), len(feats_t))
    if n < 4:
        return 0.5
    rng = np.random.default_rng(np.random.SeedSequence([seed, EVAL_STREAM, 2]))
    feats_s = feats_s[rng.choice(len(feats_s), n, replace=False)]
    feats_t = feats_t[rng.choice(len(feats_t), n, replace=False)]
    X = np.concatenate([feats_s, feats_t])
    y = np.concatenate([np.zeros(n, dtype=int), np.ones(n, dtype=int)])
    X_train, X_test, y_train, y_test = train_test_split(X, y, test_size=0.3, stratify=y, random_state=seed)
    probe = LogisticRegression(max_iter=1000)
    probe.fit(X_train, y_train)
    return float(probe.score(X_test, y_test))


def evaluate(
    params: ModelParams,
    scenario: Scenario,
    holdout: tuple[list[PseudoImage], list[PseudoImage]],
    grl_lambda: float = 1.0,
) -> EvaluationRecord:
    """
    Scores a model on a labeled holdout.

    Params:
        - shared_accuracy: classifier accuracy on target instances of shared classes
        - centroid_accuracy: same instances, nearest source class centroid in feature space
        - gap_global / gap_instance: |mean P(target) on target - on source| per level
        - probe_accuracy: domain probe on shared-class features; alignment_score = 1 - probe_accuracy
    """
    source, target = holdout
    inst_s, labels_s, glob_s = stack_images(source)
    inst_t, labels_t, glob_t = stack_images(target)
    shared = scenario.shared

    h_s, h_t = params.features(inst_s), params.features(inst_t)
    acc, n_shared = shared_accuracy(np.argmax(params.class_logits(h_t).data, axis=1), labels_t, shared)

    classes = np.unique(labels_s)
    centroids = np.stack([h_s.data[labels_s == c].mean(axis=0) for c in classes])
    dist = np.linalg.norm(h_t.data[:, None, :] - centroids[None, :, :], axis=2)
    centroid_acc, _ = shared_accuracy(classes[np.argmin(dist, axis=1)], labels_t, shared)

    gap_g = abs(
        _mean_q(params.global_logit(params.global_embed(params.features(glob_t), grl_lambda)))
        - _mean_q(params.global_logit(params.global_embed(params.features(glob_s), grl_lambda)))
    )
    gap_i = abs(_mean_q(params.instance_logit(h_t, grl_lambda)) - _mean_q(params.instance_logit(h_s, grl_lambda)))

    probe = _probe_accuracy(
        h_s.data[np.isin(labels_s, shared)], h_t.data[np.isin(labels_t, shared)], scenario.seed
    )
    return EvaluationRecord(
        shared_accuracy=acc,
        centroid_accuracy=centroid_acc,
        gap_global=gap_g,
        gap_instance=gap_i,
        probe_accuracy=probe,
        alignment_score=1.0 - probe,
        n_shared_target=n_shared,
    )
