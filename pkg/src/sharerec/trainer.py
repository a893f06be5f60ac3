"""Joint training loop: BPR on the (rewired) social backbone plus weighted InfoNCE."""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .backbone import BACKBONES, LIGHTGCN_SOCIAL, Propagator, bpr_loss, sample_negatives
from .evaluator import MetricsReport, evaluate
from .graphs import TRAIN, VAL, InteractionGraph, SocialGraph
from .homophily import graph_homophily
from .hra import PositiveSampleSets, infonce_loss, select_positives
from .optim import EmbeddingState, TrainingFault, adam_step, init_embeddings
from .rewire import Encoder, RewireReport, pairwise_cosine, rewire

logger = logging.getLogger(__name__)

SHARE, MULTI_SGR, NO_WARMUP, VANILLA = "share", "multi-sgr", "no-warmup", "vanilla"
STRATEGIES = (SHARE, MULTI_SGR, NO_WARMUP, VANILLA)
ABLATIONS = ("no_sgr", "no_hra", "no_sw", "cut_only", "add_only")

# independent random streams, so toggling one feature never shifts another's draws
STREAM_SPLIT, STREAM_INIT, STREAM_NEG, STREAM_SHUFFLE, STREAM_SYNTH = 1, 2, 3, 4, 5


def stream(seed: int, purpose: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), purpose])


class ConfigError(ValueError):
    pass


@dataclass
class TrainConfig:
    backbone: str = LIGHTGCN_SOCIAL
    epochs: int = 200
    batch_size: int = 2048
    lr: float = 1e-3
    dim: int = 64
    layers: int = 2
    encoder_layers: int = 2
    zeta: float = 0.5
    lam: float = 0.1
    tau: float = 0.1
    weight_decay: float = 1e-4
    strategy: str = SHARE
    warmup_epoch: int = 10
    ablations: tuple[str, ...] = ()
    seed: int = 0
    patience: int = 50
    cl_negatives: str = "batch"
    separate_encoder: bool = True
    candidate_cap: int | None = None
    k: int = 10

    def __post_init__(self):
        if isinstance(self.ablations, str):
            self.ablations = tuple(a for a in self.ablations.split(",") if a)
        self.ablations = tuple(sorted({a.strip().replace("-", "_") for a in self.ablations}))
        self.validate()

    def validate(self) -> None:
        if self.backbone not in BACKBONES:
            raise ConfigError(f"unknown backbone {self.backbone!r}")
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}; choose from {STRATEGIES}")
        bad = set(self.ablations) - set(ABLATIONS)
        if bad:
            raise ConfigError(f"unknown ablation(s) {sorted(bad)}")
        ab = set(self.ablations)
        if "no_sgr" in ab and ab & {"cut_only", "add_only"}:
            raise ConfigError("no_sgr cannot be combined with cut_only/add_only")
        if {"cut_only", "add_only"} <= ab:
            raise ConfigError("cut_only and add_only are mutually exclusive")
        if self.cl_negatives not in ("batch", "all"):
            raise ConfigError("cl_negatives must be 'batch' or 'all'")
        if self.epochs < 0 or self.batch_size < 1 or self.dim < 1 or self.layers < 1:
            raise ConfigError("epochs, batch_size, dim and layers must be positive")
        if not 0.0 <= self.zeta <= 1.0:
            raise ConfigError("zeta must lie in [0, 1]")
        if self.tau <= 0:
            raise ConfigError("tau must be positive")

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ablations"] = ",".join(self.ablations)
        return d


@dataclass
class Pipeline:
    sgr: bool
    cut: bool
    add: bool
    unit_weights: bool
    cl_weight: float


def apply_ablations(config: TrainConfig) -> Pipeline:
    """Resolve strategy and ablation flags into what the loop actually does."""
    ab = set(config.ablations)
    if config.strategy == VANILLA:
        return Pipeline(sgr=False, cut=False, add=False, unit_weights=False, cl_weight=0.0)
    return Pipeline(
        sgr="no_sgr" not in ab,
        cut="add_only" not in ab,
        add="cut_only" not in ab,
        unit_weights="no_sw" in ab,
        cl_weight=0.0 if "no_hra" in ab else config.lam,
    )


def rewire_scheduled(strategy: str, epoch: int, iteration: int, warmup_epoch: int) -> bool:
    """Gate for one rewiring pass at (1-based) ``epoch`` and ``iteration``."""
    if strategy == SHARE:
        return epoch >= warmup_epoch and iteration == 1
    if strategy == MULTI_SGR:
        return epoch >= warmup_epoch
    if strategy == NO_WARMUP:
        return iteration == 1
    return False


def expected_rewire_events(strategy: str, epochs: int, iterations: int, warmup_epoch: int) -> int:
    active = max(0, epochs - max(warmup_epoch, 1) + 1)
    if strategy == SHARE:
        return active
    if strategy == MULTI_SGR:
        return active * iterations
    if strategy == NO_WARMUP:
        return epochs
    return 0


METRIC_KEYS = ("val_recall", "val_precision", "val_ndcg")


def early_stop(history, patience: int, keys=METRIC_KEYS) -> bool:
    """True once no tracked metric has beaten its running best for ``max(patience, 1)`` epochs."""
    rows = history.rows if isinstance(history, TrainHistory) else history
    best = {k: -math.inf for k in keys}
    stale = 0
    for row in rows:
        improved = False
        for k in keys:
            if row[k] > best[k]:
                best[k] = row[k]
                improved = True
        stale = 0 if improved else stale + 1
    return stale >= max(patience, 1)


@dataclass
class TrainHistory:
    rows: list[dict] = field(default_factory=list)
    rewires: list[RewireReport] = field(default_factory=list)
    wall_time: list[float] = field(default_factory=list)

    COLUMNS = ("epoch", "rec_loss", "cl_loss", "val_recall", "val_precision", "val_ndcg",
               "rewire_events", "cut_count", "add_count", "social_edges")

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.COLUMNS)
            for row in self.rows:
                w.writerow([repr(float(row[c])) if isinstance(row[c], float) else row[c] for c in self.COLUMNS])

    def write_rewire_csv(self, path) -> None:
        """One row per rewiring pass."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "cut_count", "add_count"])
            for r in self.rewires:
                w.writerow([r.epoch, r.cut_count, r.add_count])

    def write_timing_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "seconds"])
            for row, t in zip(self.rows, self.wall_time):
                w.writerow([row["epoch"], f"{t:.6f}"])


@dataclass
class TrainResult:
    state: EmbeddingState
    history: TrainHistory
    best_social: SocialGraph
    final_social: SocialGraph
    best_epoch: int
    best_metrics: MetricsReport | None
    iterations_per_epoch: int


class Objective:
    """L_rec + lambda * L_cl with gradients on every base table.

    The propagator is swapped whenever the social graph is rewired; the
    encoder and positive sets are fixed for a run.
    """

    def __init__(self, propagator: Propagator, encoder: Encoder, positives: PositiveSampleSets | None,
                 cl_weight: float, tau: float, cl_negatives: str = "batch"):
        self.propagator = propagator
        self.encoder = encoder
        self.positives = positives
        self.cl_weight = cl_weight
        self.tau = tau
        self.cl_negatives = cl_negatives

    @property
    def uses_cl(self) -> bool:
        return self.cl_weight != 0.0 and self.positives is not None

    def __call__(self, state: EmbeddingState, users, pos, neg, Z=None):
        """Return (total, rec, cl, grads)."""
        out = self.propagator.forward(state.P0, state.Q0)
        rec, gP, gQ = bpr_loss(users, pos, neg, out.P, out.Q)
        gP0, gQ0 = self.propagator.backward(gP, gQ)
        grads = {"user": gP0, "item": gQ0}
        cl = 0.0
        if self.uses_cl:
            if Z is None:
                Z = self.encoder.forward(state.Q_enc)
            anchors = np.unique(users)
            pool = None if self.cl_negatives == "all" else anchors
            cl, gZ = infonce_loss(Z, self.positives, self.tau, anchors=anchors, negative_pool=pool)
            g_enc = self.cl_weight * self.encoder.backward(gZ)
            key = "item_enc" if "item_enc" in state.params else "item"
            grads[key] = grads[key] + g_enc if key in grads else g_enc
        return rec + self.cl_weight * cl, rec, cl, grads


def train(config: TrainConfig, graph: InteractionGraph, social: SocialGraph,
          state: EmbeddingState | None = None) -> TrainResult:
    """Run the joint optimisation with strategy-gated rewiring and early stopping.

    ``graph`` must already carry split tags. The returned state is the
    best-validation snapshot (NDCG, then Recall).
    """
    pipe = apply_ablations(config)
    m, n = graph.num_users, graph.num_items
    if social.num_users != m:
        raise ValueError("social graph and interaction graph disagree on the user count")
    if state is None:
        state = init_embeddings(m, n, config.dim, rng=stream(config.seed, STREAM_INIT),
                                separate_encoder=config.separate_encoder, lr=config.lr,
                                weight_decay=config.weight_decay)
    R = graph.matrix(TRAIN)
    tr = graph.mask(TRAIN)
    train_u, train_v = graph.users[tr], graph.items[tr]
    n_train = len(train_u)
    if n_train == 0:
        raise ValueError("no training interactions")
    iters = math.ceil(n_train / config.batch_size)

    encoder = Encoder(R, config.encoder_layers)
    positives = None
    if pipe.cl_weight != 0.0 and social.num_edges:
        table = graph_homophily(social, graph)
        positives = select_positives(table, social, config.zeta)
    objective = Objective(Propagator(social, R, config.layers, config.backbone), encoder, positives,
                          pipe.cl_weight, config.tau, config.cl_negatives)

    neg_rng = stream(config.seed, STREAM_NEG)
    shuffle_rng = stream(config.seed, STREAM_SHUFFLE)
    history = TrainHistory()
    current = social
    best_key, best = (-math.inf, -math.inf), None

    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        perm = shuffle_rng.permutation(n_train)
        rec_sum = cl_sum = 0.0
        events = cuts = adds = 0
        for it in range(1, iters + 1):
            idx = perm[(it - 1) * config.batch_size: it * config.batch_size]
            users, pos = train_u[idx], train_v[idx]
            neg = sample_negatives(users, R, neg_rng)
            Z = None
            do_rewire = pipe.sgr and rewire_scheduled(config.strategy, epoch, it, config.warmup_epoch)
            if do_rewire or objective.uses_cl:
                Z = encoder.forward(state.Q_enc)
            if do_rewire:
                current, report = rewire(social, Z, cut=pipe.cut, add=pipe.add,
                                         unit_weights=pipe.unit_weights, candidate_cap=config.candidate_cap)
                report.epoch, report.iteration = epoch, it
                history.rewires.append(report)
                events += 1
                cuts += report.cut_count
                adds += report.add_count
                objective.propagator = Propagator(current, R, config.layers, config.backbone)
            total, rec, cl, grads = objective(state, users, pos, neg, Z)
            if not (math.isfinite(total)):
                err = TrainingFault(f"non-finite loss at epoch {epoch}, iteration {it}: rec={rec}, cl={cl}")
                err.snapshot = state.copy()
                raise err
            adam_step(state, grads)
            rec_sum += rec
            cl_sum += cl

        out = objective.propagator.forward(state.P0, state.Q0)
        val = evaluate(out.P, out.Q, graph, VAL, config.k)
        history.rows.append({
            "epoch": epoch, "rec_loss": rec_sum, "cl_loss": cl_sum,
            "val_recall": val.recall, "val_precision": val.precision, "val_ndcg": val.ndcg,
            "rewire_events": events, "cut_count": cuts, "add_count": adds,
            "social_edges": current.num_edges,
        })
        history.wall_time.append(time.perf_counter() - t0)
        key = (val.ndcg, val.recall)
        if key > best_key:
            best_key = key
            best = (state.copy(), current, epoch, val)
        logger.debug("epoch %d rec=%.4f cl=%.4f val_ndcg=%.4f", epoch, rec_sum, cl_sum, val.ndcg)
        if early_stop(history, config.patience):
            logger.info("early stop at epoch %d", epoch)
            break

    if best is None:
        return TrainResult(state, history, social, current, 0, None, iters)
    best_state, best_social, best_epoch, best_val = best
    return TrainResult(best_state, history, best_social, current, best_epoch, best_val, iters)
