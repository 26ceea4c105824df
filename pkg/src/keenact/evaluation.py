"""Evaluation harness: MAP@k over ranked (item, activity) pairs.

Every variant is scored on the same task: rank candidate pairs for each
user, compare against the held-out positives, report MAP at several
depths.  Training positives are removed from every candidate list so
variants cannot pad precision with pairs already observed.

Single-model baselines treat each (item, activity) pair as one pseudo
item in a flat space and train one scorer over it, with either a
single-negative logistic update or the same rank-weighted update the
two-stage scorers use.
"""

from __future__ import annotations

import dataclasses
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from keenact.data import InteractionStore, split_per_user
from keenact.features import (
    FeatureLayout,
    FeatureMatrix,
    activity_part,
    assemble_act_input,
    co_participation_features,
    empty_features,
    item_part,
    l2_normalize_rows,
    user_part,
)
from keenact.fm import AdamState, adam_update, combine_gradients, fm_gradient, init_params
from keenact.scoring import Scorer, part_stats
from keenact.training import (
    NumericalError,
    TrainConfig,
    TrainedModel,
    estimate_rank,
    phi,
    train,
)
from keenact.recommend import recommend, select_items

logger = logging.getLogger("keenact.evaluation")

VARIANTS = ("keen2act", "keen", "act", "fm_bpr", "fm_warp")
VARIANT_LABELS = {
    "keen2act": "Keen2Act",
    "keen": "Keen Model",
    "act": "Act Model",
    "fm_bpr": "FM_BPR",
    "fm_warp": "FM_WARP",
}
DEFAULT_KS = (5, 10, 20, 50, None)


@dataclass(frozen=True)
class FlatPairSpace:
    """Bijection between (item, activity) pairs and flat candidate ids."""

    n_items: int
    n_activities: int

    @property
    def size(self) -> int:
        return self.n_items * self.n_activities

    def flatten(self, v: int, z: int) -> int:
        if not (0 <= v < self.n_items and 0 <= z < self.n_activities):
            raise ValueError(f"pair ({v}, {z}) outside space")
        return v * self.n_activities + z

    def unflatten(self, f: int) -> tuple[int, int]:
        if not 0 <= f < self.size:
            raise ValueError(f"flat id {f} outside space")
        return divmod(f, self.n_activities)


def average_precision_at_k(ranked, relevant, k: int | None = None) -> float:
    """AP@k with the min(|relevant|, k) normalizer; k=None means no cutoff."""
    if not relevant:
        raise ValueError("average precision is undefined for an empty relevant set")
    if k is not None and k < 1:
        raise ValueError("k must be >= 1 or None")
    cutoff = len(ranked) if k is None else min(k, len(ranked))
    hits = 0
    score = 0.0
    for i in range(cutoff):
        if ranked[i] in relevant:
            hits += 1
            score += hits / (i + 1)
    denom = len(relevant) if k is None else min(len(relevant), k)
    return score / denom


def map_at_k(ranked_by_user: dict, relevant_by_user: dict, k: int | None = None) -> float:
    """Mean AP@k over users with a non-empty relevant set."""
    scores = [
        average_precision_at_k(ranked_by_user.get(u, []), relevant, k)
        for u, relevant in relevant_by_user.items()
        if relevant
    ]
    if not scores:
        raise ValueError("no users with held-out positives")
    return float(np.mean(scores))


# -- single-model baselines over the flat pair space ------------------------


@dataclass
class BaselineModel:
    params: object
    layout: FeatureLayout
    user_feats: FeatureMatrix
    item_feats: FeatureMatrix
    seen_items: frozenset
    kind: str
    report: list[tuple[int, str, str, float]] = field(default_factory=list)


def _sigmoid_scalar(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + np.exp(-x))
    e = np.exp(x)
    return e / (1.0 + e)


class _FlatTrainer:
    """One FM over flat pairs, trained with logistic or rank-weighted updates."""

    def __init__(self, store, user_feats, item_feats, config, kind):
        if kind not in ("bpr", "warp"):
            raise ValueError(f"unknown baseline kind {kind!r}")
        self.store = store
        self.config = config
        self.kind = kind
        self.user_feats = user_feats
        self.item_feats = item_feats
        catalog = store.catalog
        self.layout = FeatureLayout.for_act(catalog, user_feats, item_feats, config.id_onehots)
        self.params = init_params(self.layout.dim, config.k, seed=config.seed + 3, scale=config.init_scale)
        self.state = AdamState.for_params(self.params, **config.adam_kwargs())
        self.rng = np.random.Generator(np.random.PCG64(config.seed))
        self.train_items = np.array(store.items_with_interactions(), dtype=np.int64)
        self.space = FlatPairSpace(catalog.n_items, catalog.n_activities)
        self.positives = {
            u: frozenset(self.space.flatten(v, z) for (_, v, z) in rows)
            for u, rows in store.triples_by_user().items()
        }
        self.report: list[tuple[int, str, str, float]] = []

    def _pair_stats(self, v: int, z: int, ubase, us):
        iidx, ival = item_part(v, self.layout, self.item_feats)
        zidx, zval = activity_part(z, self.layout)
        idx = np.concatenate([iidx, zidx])
        val = np.concatenate([ival, zval])
        base, s = part_stats(self.params, idx, val)
        return base + us @ s, idx, val

    def _draw_negative(self, pos_flat: frozenset) -> tuple[int, int]:
        n_items = len(self.train_items)
        nz = self.space.n_activities
        while True:
            v = int(self.train_items[self.rng.integers(n_items)])
            z = int(self.rng.integers(nz))
            if self.space.flatten(v, z) not in pos_flat:
                return v, z

    def _decayed(self, grads):
        grad = combine_gradients(grads)
        # the flat space is dominated by item coordinates, so the
        # item-stage decay is the comparable setting for the baselines
        lam = self.config.lambda_keen
        if lam:
            grad.w = grad.w + lam * self.params.w[grad.indices]
            grad.factors = grad.factors + lam * self.params.factors[grad.indices]
        return grad

    def _bpr_step(self, u, v, z) -> float:
        pos_flat = self.positives[u]
        total_neg = len(self.train_items) * self.space.n_activities - len(pos_flat)
        if total_neg <= 0:
            return 0.0
        uidx, uval = user_part(u, self.layout, self.user_feats)
        ubase, us = part_stats(self.params, uidx, uval)
        s_pos, _, _ = self._pair_stats(v, z, ubase, us)
        vn, zn = self._draw_negative(pos_flat)
        s_neg, _, _ = self._pair_stats(vn, zn, ubase, us)
        diff = s_pos - s_neg
        slope = _sigmoid_scalar(-diff)
        x_pos = assemble_act_input(u, v, z, self.layout, self.user_feats, self.item_feats)
        x_neg = assemble_act_input(u, vn, zn, self.layout, self.user_feats, self.item_feats)
        grad = self._decayed([fm_gradient(self.params, x_pos, -slope), fm_gradient(self.params, x_neg, slope)])
        adam_update(self.params, self.state, grad)
        return float(np.logaddexp(0.0, -diff))

    def _warp_step(self, u, v, z) -> float:
        cfg = self.config
        pos_flat = self.positives[u]
        total_neg = len(self.train_items) * self.space.n_activities - len(pos_flat)
        if total_neg <= 0:
            return 0.0
        uidx, uval = user_part(u, self.layout, self.user_feats)
        ubase, us = part_stats(self.params, uidx, uval)
        s_pos, _, _ = self._pair_stats(v, z, ubase, us)
        cap = min(cfg.max_neg_samples, total_neg)
        drawn: set[int] = set()
        while len(drawn) < cap:
            vn, zn = self._draw_negative(pos_flat)
            f = self.space.flatten(vn, zn)
            if f in drawn:
                continue
            drawn.add(f)
            # w0 and the user part are shared by both sides and cancel
            s_neg, _, _ = self._pair_stats(vn, zn, ubase, us)
            if s_pos < cfg.margin + s_neg:
                weight = phi(estimate_rank(total_neg, len(drawn)))
                x_pos = assemble_act_input(u, v, z, self.layout, self.user_feats, self.item_feats)
                x_neg = assemble_act_input(u, vn, zn, self.layout, self.user_feats, self.item_feats)
                grad = self._decayed(
                    [fm_gradient(self.params, x_pos, -weight), fm_gradient(self.params, x_neg, weight)]
                )
                adam_update(self.params, self.state, grad)
                return float(weight * (cfg.margin - s_pos + s_neg))
        return 0.0

    def run(self) -> BaselineModel:
        step = self._bpr_step if self.kind == "bpr" else self._warp_step
        triples = list(self.store.triples)
        for epoch in range(self.config.epochs):
            order = self.rng.permutation(len(triples))
            total = 0.0
            for i in order:
                total += step(*triples[i])
            mean_loss = total / max(len(triples), 1)
            self.report.append((epoch, f"fm_{self.kind}", "loss", mean_loss))
            if not np.isfinite(mean_loss) or not self.params.all_finite():
                raise NumericalError(epoch, f"non-finite baseline loss at epoch {epoch}")
        return BaselineModel(
            params=self.params,
            layout=self.layout,
            user_feats=self.user_feats,
            item_feats=self.item_feats,
            seen_items=frozenset(int(v) for v in self.train_items),
            kind=self.kind,
            report=self.report,
        )


def train_baseline(store, user_feats, item_feats, config: TrainConfig, kind: str) -> BaselineModel:
    """Train a flat single-model baseline: kind is "bpr" or "warp"."""
    return _FlatTrainer(store, user_feats, item_feats, config, kind).run()


# -- ranked candidate lists per variant -------------------------------------


def _ordered_flat(scores: np.ndarray, exclude: frozenset) -> list[int]:
    flat_ids = np.arange(len(scores), dtype=np.int64)
    order = np.lexsort((flat_ids, -scores))
    return [int(f) for f in flat_ids[order] if f not in exclude]


def rank_keen2act(model: TrainedModel, space: FlatPairSpace, u: int, exclude: frozenset) -> list[int]:
    """Thresholded two-stage list in recommendation order (may be short)."""
    recs = recommend(model, u)
    return [
        space.flatten(e.item, e.activity)
        for e in recs.entries
        if space.flatten(e.item, e.activity) not in exclude
    ]


def rank_keen_only(model: TrainedModel, space: FlatPairSpace, u: int, exclude: frozenset) -> list[int]:
    """Stage-one items by keen score, each expanded to all activities in id order."""
    selected = select_items(model, u)
    keen_scorer, _ = model.scorers()
    scores = keen_scorer.score_items(u, selected)
    order = np.lexsort((selected, -scores))
    out = []
    for v in selected[order]:
        for z in range(space.n_activities):
            f = space.flatten(int(v), z)
            if f not in exclude:
                out.append(f)
    return out


def rank_act_only(model: TrainedModel, space: FlatPairSpace, u: int, exclude: frozenset) -> list[int]:
    """Pairs whose act score clears its activity cutoff, by score alone (no item stage)."""
    _, act_scorer = model.scorers()
    scores = act_scorer.score_pair_matrix(u)
    keep = (scores >= model.thresholds.activity_thresholds).reshape(-1)
    flat_scores = scores.reshape(-1)
    flat_ids = np.flatnonzero(keep)
    order = np.lexsort((flat_ids, -flat_scores[flat_ids]))
    return [int(f) for f in flat_ids[order] if f not in exclude]


def rank_baseline(baseline: BaselineModel, space: FlatPairSpace, u: int, exclude: frozenset) -> list[int]:
    scorer = Scorer(
        baseline.params,
        baseline.layout,
        baseline.user_feats,
        baseline.item_feats,
        seen_items=baseline.seen_items,
    )
    scores = scorer.score_pair_matrix(u).reshape(-1)
    return _ordered_flat(scores, exclude)


# -- experiment driver -------------------------------------------------------


@dataclass
class EvalReport:
    """Per-variant MAP records: (dataset, variant, metric, split, value)."""

    dataset: str
    records: list[tuple[str, str, str, str, float]] = field(default_factory=list)

    def add(self, variant: str, metric: str, split: str, value: float) -> None:
        self.records.append((self.dataset, variant, metric, split, float(value)))

    def value(self, variant: str, metric: str, split: str) -> float:
        for ds, var, met, sp, val in self.records:
            if var == variant and met == metric and sp == split:
                return val
        raise KeyError((variant, metric, split))

    def values(self, variant: str, metric: str) -> list[float]:
        return [
            val
            for _, var, met, sp, val in self.records
            if var == variant and met == metric and sp != "mean"
        ]

    def variants(self) -> list[str]:
        seen = dict.fromkeys(var for _, var, _, _, _ in self.records)
        return list(seen)

    def metrics(self) -> list[str]:
        seen = dict.fromkeys(met for _, _, met, _, _ in self.records if met.startswith("map@"))
        return list(seen)

    def table(self) -> str:
        """Aligned text table of mean MAP per variant."""
        metrics = self.metrics()
        rows = []
        header = ["variant"] + metrics
        for variant in self.variants():
            label = VARIANT_LABELS.get(variant, variant)
            row = [label]
            for metric in metrics:
                try:
                    row.append(f"{self.value(variant, metric, 'mean'):.4f}")
                except KeyError:
                    row.append("-")
            rows.append(row)
        widths = [max(len(r[i]) for r in [header] + rows) for i in range(len(header))]
        lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
        for row in rows:
            lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)))
        return "\n".join(lines)

    def write_tsv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for ds, var, met, sp, val in self.records:
                fh.write(f"{ds}\t{var}\t{met}\t{sp}\t{val!r}\n")


def _metric_name(k: int | None) -> str:
    return "map@inf" if k is None else f"map@{k}"


def evaluate_split(
    store: InteractionStore,
    seed: int,
    config: TrainConfig,
    variants,
    ks,
    fraction: float = 0.8,
    item_feats: FeatureMatrix | None = None,
) -> dict[str, dict[str, float]]:
    """Train on one split and return {variant: {metric: value}}.

    User features are co-participation counts rebuilt from the training
    half only; item features default to none (identity one-hots carry
    the items) unless an item feature matrix is supplied.
    """
    split = split_per_user(store, fraction=fraction, seed=seed)
    catalog = store.catalog
    user_feats = l2_normalize_rows(co_participation_features(split.train))
    if item_feats is None:
        item_feats = empty_features(catalog.n_items, "item")
    cfg = dataclasses.replace(config, seed=seed)
    space = FlatPairSpace(catalog.n_items, catalog.n_activities)

    grouped: dict[int, set] = {}
    for u, v, z in split.test.triples:
        grouped.setdefault(u, set()).add(space.flatten(v, z))
    relevant = {u: frozenset(s) for u, s in grouped.items() if s}
    if not relevant:
        raise ValueError("split produced no held-out positives")
    train_by_user = split.train.triples_by_user()
    exclude = {
        u: frozenset(space.flatten(v, z) for (_, v, z) in train_by_user.get(u, []))
        for u in relevant
    }
    empty = frozenset()

    out: dict[str, dict[str, float]] = {}
    two_stage = [v for v in variants if v in ("keen2act", "keen", "act")]
    model = None
    if two_stage:
        started = time.perf_counter()
        model = train(split.train, user_feats, item_feats, cfg)
        train_seconds = time.perf_counter() - started
    rankers = {}
    if model is not None:
        rankers["keen2act"] = lambda u: rank_keen2act(model, space, u, exclude.get(u, empty))
        rankers["keen"] = lambda u: rank_keen_only(model, space, u, exclude.get(u, empty))
        rankers["act"] = lambda u: rank_act_only(model, space, u, exclude.get(u, empty))
    for variant in variants:
        if variant not in VARIANTS:
            raise ValueError(f"unknown variant {variant!r}")
        started = time.perf_counter()
        if variant in ("fm_bpr", "fm_warp"):
            baseline = train_baseline(split.train, user_feats, item_feats, cfg, kind=variant.removeprefix("fm_"))
            ranker = lambda u, b=baseline: rank_baseline(b, space, u, exclude.get(u, empty))
            seconds = time.perf_counter() - started
        else:
            ranker = rankers[variant]
            seconds = train_seconds
        ranked = {u: ranker(u) for u in relevant}
        metrics = {_metric_name(k): map_at_k(ranked, relevant, k) for k in ks}
        metrics["train_seconds"] = seconds
        metrics["eval_users"] = float(len(relevant))
        out[variant] = metrics
    return out


def run_experiment(
    store: InteractionStore,
    config: TrainConfig,
    n_splits: int = 5,
    variants=VARIANTS,
    ks=DEFAULT_KS,
    dataset: str = "dataset",
    fraction: float = 0.8,
    item_feats: FeatureMatrix | None = None,
) -> EvalReport:
    """Repeated-split evaluation; records per-split values plus means."""
    if n_splits < 1:
        raise ValueError("n_splits must be >= 1")
    report = EvalReport(dataset=dataset)
    per_split: list[dict] = []
    for i in range(n_splits):
        seed = config.seed + i
        logger.info("split %d/%d (seed %d)", i + 1, n_splits, seed)
        result = evaluate_split(store, seed, config, variants, ks, fraction=fraction, item_feats=item_feats)
        per_split.append(result)
        for variant, metrics in result.items():
            for metric, value in metrics.items():
                report.add(variant, metric, str(i), value)
    for variant in variants:
        for metric in per_split[0][variant]:
            vals = [split_result[variant][metric] for split_result in per_split]
            report.add(variant, metric, "mean", float(np.mean(vals)))
    return report
