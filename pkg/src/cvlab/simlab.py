"""Data generators, reference trainers, and the Monte-Carlo campaigns.

Two campaigns are provided:

- :func:`run_weak_correlation` draws many training sets from a two-class
  multinormal model, and for each one records the true conditional
  performance S (scored on a fresh pseudo-infinite test set), the apparent
  (resubstitution) performance Sbar, and a resampling estimate Shat.  The
  aggregated rows quantify how weakly the estimate correlates with the
  conditional truth.
- :func:`run_ratio_curve` measures the ratio between the two leave-one-out
  bootstrap error variants against sample size on a one-dimensional
  two-normal problem (unit variances, means 0 and 1), next to the
  (2n-2)/(2n-1) theory curve.

Data model: class 1 is N(0, I_p), class 2 is N(c * 1, I_p) with
c = delta / sqrt(p), so the Mahalanobis separation is delta and the
population AUC of the Bayes direction is Phi(delta / sqrt(2)).

Both reference trainers are linear:

- nearest-mean:  w = m2 - m1
- LDA:           w = (pooled covariance + ridge I)^(-1) (m2 - m1)

with score(x) = w . (x - (m1+m2)/2), so threshold 0 is the natural midpoint.
Each also implements the ``weighted_scores`` batch hook used by the bootstrap
estimators: given a matrix of replicate multiplicities it trains every
replicate's rule and scores all evaluation points in a few vectorized
operations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from cvlab import analysis, estimators
from cvlab.core import (
    DomainError,
    LinearScoringRule,
    ScoringRule,
    StratifiedDataset,
    Trainer,
    empirical_auc,
    zero_one_losses,
)
from cvlab.combinatorics import expected_oob_weight
from cvlab.estimators import (
    EstimationError,
    EstimatorConfig,
    Metric,
    Variant,
    Version,
)
from cvlab.resampling import SamplingModel, derive_rng, derive_seed


def normal_cdf(z: float) -> float:
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


@dataclass(frozen=True)
class MultinormalSpec:
    """Two-class multinormal model with identity covariances.

    ``delta`` is the Mahalanobis distance between the class means; the class-2
    mean is the constant vector c * 1 with c = delta / sqrt(p).
    """

    p: int
    delta: float
    n1: int
    n2: int

    def __post_init__(self):
        if self.p < 1:
            raise DomainError("p must be >= 1")
        if self.delta < 0:
            raise DomainError("delta must be >= 0")
        if self.n1 < 1 or self.n2 < 1:
            raise DomainError("class sizes must be >= 1")

    @property
    def offset(self) -> float:
        """Per-coordinate mean shift c = delta / sqrt(p) of class 2."""
        return self.delta / math.sqrt(self.p)

    @property
    def population_auc(self) -> float:
        """AUC of the optimal direction in the infinite-sample limit."""
        return normal_cdf(self.delta / math.sqrt(2.0))

    def sample(self, n1: int, n2: int, rng: np.random.Generator) -> StratifiedDataset:
        class1 = rng.normal(0.0, 1.0, size=(n1, self.p))
        class2 = rng.normal(self.offset, 1.0, size=(n2, self.p))
        return StratifiedDataset(class1, class2)


def gen_multinormal(spec: MultinormalSpec, seed: int) -> StratifiedDataset:
    """Draw the spec's training set; deterministic per seed."""
    return spec.sample(spec.n1, spec.n2, derive_rng(seed, "data"))


def _weighted_class_moments(X, labels, counts):
    counts = np.asarray(counts, dtype=float)
    m1 = labels == 1
    m2 = labels == 2
    n1 = counts[:, m1].sum(axis=1)
    n2 = counts[:, m2].sum(axis=1)
    if np.any(n1 <= 0) or np.any(n2 <= 0):
        raise EstimationError("weighted batch: a replicate lost one class")
    mean1 = counts[:, m1] @ X[m1] / n1[:, None]
    mean2 = counts[:, m2] @ X[m2] / n2[:, None]
    return n1, n2, mean1, mean2


def _linear_batch_scores(directions, mean1, mean2, X_eval):
    mid = 0.5 * (mean1 + mean2)
    return directions @ X_eval.T - (directions * mid).sum(axis=1, keepdims=True)


class NearestMeanTrainer(Trainer):
    """Linear rule along the difference of the class sample means."""

    name = "nearest-mean"

    def train(self, dataset: StratifiedDataset) -> ScoringRule:
        m1 = dataset.class1.mean(axis=0)
        m2 = dataset.class2.mean(axis=0)
        w = m2 - m1
        return LinearScoringRule(w, -float(w @ (m1 + m2)) / 2.0)

    def weighted_scores(self, X, labels, counts, X_eval) -> np.ndarray:
        _, _, mean1, mean2 = _weighted_class_moments(X, labels, counts)
        return _linear_batch_scores(mean2 - mean1, mean1, mean2, np.asarray(X_eval, dtype=float))


class LdaTrainer(Trainer):
    """Fisher rule with pooled covariance (divide by n1+n2-2) plus a ridge."""

    def __init__(self, ridge: float = 0.0):
        if ridge < 0:
            raise DomainError("ridge must be >= 0")
        self.ridge = float(ridge)

    @property
    def name(self) -> str:
        return f"lda(ridge={self.ridge:g})"

    def train(self, dataset: StratifiedDataset) -> ScoringRule:
        n1, n2, p = dataset.n1, dataset.n2, dataset.p
        if n1 + n2 < 3:
            raise EstimationError("lda needs at least three observations")
        if self.ridge == 0.0 and n1 + n2 - 2 < p:
            raise EstimationError("pooled covariance is singular; set a ridge")
        m1 = dataset.class1.mean(axis=0)
        m2 = dataset.class2.mean(axis=0)
        c1 = dataset.class1 - m1
        c2 = dataset.class2 - m2
        cov = (c1.T @ c1 + c2.T @ c2) / (n1 + n2 - 2) + self.ridge * np.eye(p)
        try:
            w = np.linalg.solve(cov, m2 - m1)
        except np.linalg.LinAlgError as exc:
            raise EstimationError(f"singular pooled covariance: {exc}") from exc
        if not np.all(np.isfinite(w)):
            raise EstimationError("lda produced non-finite coefficients")
        return LinearScoringRule(w, -float(w @ (m1 + m2)) / 2.0)

    def weighted_scores(self, X, labels, counts, X_eval) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        counts = np.asarray(counts, dtype=float)
        n1, n2, mean1, mean2 = _weighted_class_moments(X, labels, counts)
        total = counts.sum(axis=1)
        if np.any(total < 3):
            raise EstimationError("lda needs at least three observations")
        second = np.einsum("bi,ip,iq->bpq", counts, X, X)
        scatter = (
            second
            - n1[:, None, None] * mean1[:, :, None] * mean1[:, None, :]
            - n2[:, None, None] * mean2[:, :, None] * mean2[:, None, :]
        )
        p = X.shape[1]
        cov = scatter / (total - 2.0)[:, None, None] + self.ridge * np.eye(p)
        try:
            directions = np.linalg.solve(cov, (mean2 - mean1)[..., None])[..., 0]
        except np.linalg.LinAlgError as exc:
            raise EstimationError(f"singular pooled covariance: {exc}") from exc
        if not np.all(np.isfinite(directions)):
            raise EstimationError("lda produced non-finite coefficients")
        return _linear_batch_scores(directions, mean1, mean2, np.asarray(X_eval, dtype=float))


def train_nearest_mean(dataset: StratifiedDataset) -> ScoringRule:
    return NearestMeanTrainer().train(dataset)


def train_lda(dataset: StratifiedDataset, ridge: float = 0.0) -> ScoringRule:
    return LdaTrainer(ridge).train(dataset)


_TRAINERS = {
    "nearest-mean": lambda params: NearestMeanTrainer(),
    "lda": lambda params: LdaTrainer(ridge=float(params.get("ridge", 0.0))),
}


def trainer_from_id(trainer_id: str, params: dict | None = None) -> Trainer:
    """Look up a built-in trainer by identifier ('lda', 'nearest-mean')."""
    try:
        factory = _TRAINERS[trainer_id]
    except KeyError:
        raise DomainError(
            f"unknown trainer '{trainer_id}' (known: {sorted(_TRAINERS)})"
        ) from None
    return factory(params or {})


def truncate_count(n: int, n_folds: int) -> int:
    """Largest multiple of the fold count not exceeding n."""
    if n_folds < 1:
        raise DomainError("fold count must be >= 1")
    return n - (n % n_folds)


def truncate_per_class(dataset: StratifiedDataset, n_folds1: int, n_folds2: int) -> StratifiedDataset:
    """Drop trailing rows of each class so the fold counts divide the sizes."""
    k1 = truncate_count(dataset.n1, n_folds1)
    k2 = truncate_count(dataset.n2, n_folds2)
    if k1 < 1 or k2 < 1:
        raise DomainError("truncation would empty a class")
    return StratifiedDataset(dataset.class1[:k1], dataset.class2[:k2])


def truncate_pooled(dataset: StratifiedDataset, n_folds: int) -> StratifiedDataset:
    """Drop trailing observations (class-2 tail first) until K divides n."""
    drop = dataset.n % n_folds
    drop2 = min(drop, dataset.n2 - 1)
    drop1 = drop - drop2
    if drop1 > dataset.n1 - 1:
        raise DomainError("truncation would empty a class")
    return StratifiedDataset(
        dataset.class1[: dataset.n1 - drop1], dataset.class2[: dataset.n2 - drop2]
    )


def true_conditional_performance(
    rule: ScoringRule,
    spec: MultinormalSpec,
    test_per_class: int,
    seed: int,
    metric: Metric = Metric.AUC,
    th: float = 0.0,
) -> float:
    """Performance of one trained rule on a fresh pseudo-infinite test draw."""
    if test_per_class < 1:
        raise DomainError("test_per_class must be >= 1")
    test = spec.sample(test_per_class, test_per_class, derive_rng(seed, "test"))
    return _performance_on(rule, test, metric, th)


def _performance_on(rule: ScoringRule, data: StratifiedDataset, metric: Metric, th: float) -> float:
    s1 = rule.score_many(data.class1)
    s2 = rule.score_many(data.class2)
    if metric is Metric.AUC:
        return empirical_auc(s1, s2)
    labels = np.concatenate([np.ones(data.n1, dtype=int), np.full(data.n2, 2, dtype=int)])
    losses = zero_one_losses(np.concatenate([s1, s2]), labels, th)
    return float(losses.mean())


def apparent_performance(
    rule: ScoringRule, dataset: StratifiedDataset, metric: Metric = Metric.AUC, th: float = 0.0
) -> float:
    """Resubstitution performance: score the training set itself."""
    return _performance_on(rule, dataset, metric, th)


DEFAULT_ESTIMATOR = EstimatorConfig(
    version=Version.LOOB,
    metric=Metric.AUC,
    variant=Variant.PARTITIONED,
    n_bootstrap=200,
    sampling=SamplingModel.ORDERED,
)


@dataclass(frozen=True)
class WeakCorrConfig:
    """Configuration of one weak-correlation campaign."""

    spec: MultinormalSpec
    trials: int
    test_per_class: int
    trainer: Trainer
    estimator: EstimatorConfig = DEFAULT_ESTIMATOR
    seed: int = 0

    def __post_init__(self):
        if self.trials < 2:
            raise DomainError("trials must be >= 2")
        if self.test_per_class < 1:
            raise DomainError("test_per_class must be >= 1")


@dataclass(frozen=True)
class ExperimentRow:
    """One row of the campaign table (role is S, Sbar or Shat)."""

    role: str
    mean: float
    sigma: float
    rms_cond: float
    rms_mean: float
    rho: float
    n: int


@dataclass(frozen=True, eq=False)
class WeakCorrResult:
    rows: tuple[ExperimentRow, ExperimentRow, ExperimentRow]
    triples: np.ndarray  # (trials, 3): S, Sbar, Shat
    decomposition: analysis.DecompositionReport
    aborted: int

    @property
    def mean_s(self) -> float:
        return self.rows[0].mean


def _row_against_truth(role: str, values: np.ndarray, s: np.ndarray, n: int) -> ExperimentRow:
    rep = analysis.decompose(analysis.PairedPerformanceSample(s=s, s_hat=values))
    return ExperimentRow(
        role=role,
        mean=rep.mean_s_hat,
        sigma=rep.sigma_s_hat,
        rms_cond=rep.rms_cond,
        rms_mean=rep.rms_mean,
        rho=rep.rho if rep.rho is not None else float("nan"),
        n=n,
    )


def run_weak_correlation(config: WeakCorrConfig) -> WeakCorrResult:
    """Run the campaign: per trial, draw / train / score S, Sbar and Shat.

    Trials whose estimator run fails are dropped and counted; the run aborts
    if more than 1% of trials fail.
    """
    spec = config.spec
    metric = config.estimator.metric
    th = config.estimator.th
    triples = []
    aborted = 0
    for trial in range(config.trials):
        dataset = gen_multinormal(spec, derive_seed(config.seed, "trial-data", trial))
        rule = config.trainer.train(dataset)
        s_true = true_conditional_performance(
            rule, spec, config.test_per_class,
            derive_seed(config.seed, "trial-test", trial), metric, th,
        )
        s_bar = apparent_performance(rule, dataset, metric, th)
        est_cfg = replace(
            config.estimator, seed=derive_seed(config.seed, "trial-est", trial)
        )
        try:
            s_hat = estimators.run(dataset, config.trainer, est_cfg).value
        except EstimationError:
            aborted += 1
            continue
        triples.append((s_true, s_bar, s_hat))
    if aborted > 0.01 * config.trials:
        raise EstimationError(
            f"{aborted}/{config.trials} trials aborted (more than 1%)"
        )
    if len(triples) < 2:
        raise EstimationError("fewer than two usable trials")
    arr = np.array(triples, dtype=float)
    s, s_bar, s_hat = arr[:, 0], arr[:, 1], arr[:, 2]
    n = spec.n1 + spec.n2
    rows = (
        _row_against_truth("S", s, s, n),
        _row_against_truth("Sbar", s_bar, s, n),
        _row_against_truth("Shat", s_hat, s, n),
    )
    decomposition = analysis.decompose(analysis.PairedPerformanceSample(s=s, s_hat=s_hat))
    return WeakCorrResult(rows=rows, triples=arr, decomposition=decomposition, aborted=aborted)


@dataclass(frozen=True)
class RatioPoint:
    """One grid point of the bootstrap-variant ratio curve."""

    n1: int
    ratio_empirical: float
    ratio_theory: float
    model: SamplingModel
    err_pooled_mean: float
    err_partitioned_mean: float


def ratio_curve_dataset(n1: int, seed: int) -> StratifiedDataset:
    """One-dimensional two-normal draw (means 0 and 1, unit variance)."""
    rng = derive_rng(seed, "ratio-data")
    return StratifiedDataset(
        rng.normal(0.0, 1.0, size=(n1, 1)), rng.normal(1.0, 1.0, size=(n1, 1))
    )


def run_ratio_curve(
    n1_grid,
    trainer: Trainer,
    n_bootstrap: int,
    model: SamplingModel,
    seeds,
) -> list[RatioPoint]:
    """Bootstrap-variant error ratio vs class size, averaged over the seeds.

    For each n1 (with n2 = n1), every seed draws a fresh dataset; the ratio
    is the seed-mean of the partitioned variant over the seed-mean of the
    pooled variant, next to the theory value (2n-2)/(2n-1) with n = 2*n1.
    """
    n1_grid = list(n1_grid)
    seeds = list(seeds)
    if not n1_grid or not seeds:
        raise DomainError("both the n1 grid and the seed list must be non-empty")
    if n_bootstrap < 1:
        raise DomainError("n_bootstrap must be >= 1")
    points = []
    for n1 in n1_grid:
        pooled_values = np.empty(len(seeds), dtype=float)
        partitioned_values = np.empty(len(seeds), dtype=float)
        for idx, seed in enumerate(seeds):
            dataset = ratio_curve_dataset(n1, seed)
            est_seed = derive_seed(seed, "ratio-est")
            pooled_values[idx] = estimators.err_loob(
                dataset, trainer, 0.0, n_bootstrap, est_seed, model, Variant.POOLED
            ).value
            partitioned_values[idx] = estimators.err_loob(
                dataset, trainer, 0.0, n_bootstrap, est_seed, model, Variant.PARTITIONED
            ).value
        pooled_mean = float(pooled_values.mean())
        partitioned_mean = float(partitioned_values.mean())
        if pooled_mean == 0.0:
            raise EstimationError(f"n1={n1}: pooled error mean is zero, ratio undefined")
        points.append(
            RatioPoint(
                n1=int(n1),
                ratio_empirical=partitioned_mean / pooled_mean,
                ratio_theory=float(expected_oob_weight(2 * int(n1))),
                model=model,
                err_pooled_mean=pooled_mean,
                err_partitioned_mean=partitioned_mean,
            )
        )
    return points
