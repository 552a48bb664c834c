"""Cross-validation and bootstrap estimators for error rate and AUC.

Five estimator versions are implemented, each in a pooled variant (outer
average over observations or pairs) and a partitioned variant (average per
fold / repetition / replicate first, then across them):

===========  =============================  ====================================
version      pooled variant                 partitioned variant
===========  =============================  ====================================
CVN          leave-one-out (leave-pair-out  (identical; single variant)
             for AUC)
CVK          one-run K-fold, average once   per-fold means, then fold average
CVKR         M shuffled K-fold runs,        per-run K-fold value, then run
             per-observation average first  average
CVKM         Monte-Carlo CV: one test fold  per-run test-fold mean, then run
             per run, per-observation       average
             out-of-fold ratio
LOOB         leave-one-out bootstrap:       per-replicate out-of-bag mean,
             per-observation out-of-bag     then replicate average
             ratio (leave-pair-out for
             AUC)
===========  =============================  ====================================

For CVN, CVK and CVKR the two variants are algebraically identical (the
equal-fold-size condition makes the nested averages collapse); for CVKM they
agree only as the number of runs grows, and for LOOB they differ even in the
limit.  The AUC estimator for CVK additionally has a reduced variant that
pairs only same-index folds, trading the full n1*n2 pair coverage for K
trainings.

Error-rate estimators pool both classes into a single set of n = n1+n2
labeled points before partitioning or resampling; AUC estimators always
resample the two classes independently (stratification).

Zero test coverage (an observation never out-of-fold / out-of-bag, or a pair
never jointly so) is handled by dropping the observation or pair and counting
it in ``EstimatorReport.excluded_count``; with ``strict=True`` it raises
:class:`CoverageError` instead.  A bootstrap replicate that lost one of the
classes (pooled error resampling only) is redrawn from a derived seed, up to
100 attempts.  An all-in-bag replicate contributes nothing to the partitioned
bootstrap value and is counted as excluded.

Every training task (a fold complement or a replicate multiset) is expressed
as a weight vector over the original observations.  Trainers exposing the
vectorized ``weighted_scores(X, labels, weights, X_eval)`` hook handle all
tasks of an estimator in one batched call; other trainers are invoked task by
task on the materialized subset.  Aggregation order is fixed
(observation-major, then repetition/replicate) so results are reproducible
bit-for-bit from (dataset, config, seed).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from cvlab.core import (
    DomainError,
    StratifiedDataset,
    Trainer,
    pairwise_kernel,
    zero_one_losses,
)
from cvlab.resampling import (
    PartitionMap,
    SamplingModel,
    bootstrap_counts_matrix,
    derive_seed,
    make_partition,
    repeated_partitions,
)

MAX_ONE_CLASS_RETRIES = 100


class EstimationError(RuntimeError):
    """A training/testing step failed (bad fold, singular trainer, ...)."""


class CoverageError(EstimationError):
    """Strict mode: some observation or pair had zero test coverage."""


class Version(Enum):
    CVN = "CVN"
    CVK = "CVK"
    CVKR = "CVKR"
    CVKM = "CVKM"
    LOOB = "LOOB"


class Variant(Enum):
    POOLED = "pooled"
    PARTITIONED = "partitioned"
    REDUCED = "reduced"


class Metric(Enum):
    ERROR = "error"
    AUC = "auc"


@dataclass(frozen=True, eq=False)
class CoverageLedger:
    """Per-observation (or per-pair, flattened) test-appearance counts."""

    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=int)
        if counts.min(initial=0) < 0:
            raise DomainError("coverage counts must be non-negative")
        counts = counts.copy()
        counts.flags.writeable = False
        object.__setattr__(self, "counts", counts)

    @property
    def uncovered(self) -> int:
        return int(np.count_nonzero(self.counts == 0))


@dataclass(frozen=True)
class EstimatorReport:
    """Value plus the full configuration that produced it."""

    value: float
    version: Version
    variant: Variant
    metric: Metric
    config: dict
    excluded_count: int = 0

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise EstimationError(f"estimator value {self.value} outside [0, 1]")
        if self.excluded_count < 0:
            raise EstimationError("excluded_count must be non-negative")

    def to_json_dict(self) -> dict:
        out = {
            "schema": 1,
            "value": self.value,
            "version": self.version.value,
            "variant": self.variant.value,
            "metric": self.metric.value,
            "excluded_count": self.excluded_count,
        }
        out.update({k: _plain(v) for k, v in sorted(self.config.items())})
        return out

    def csv_fields(self) -> tuple[list[str], list[str]]:
        d = self.to_json_dict()
        keys = list(d.keys())
        return keys, ["" if d[k] is None else str(d[k]) for k in keys]


def _plain(v):
    if isinstance(v, Enum):
        return v.value
    return v


def _echo(dataset: StratifiedDataset, trainer: Trainer, **kw) -> dict:
    base = {"n1": dataset.n1, "n2": dataset.n2, "trainer": trainer.name}
    base.update(kw)
    return base


def _train(trainer: Trainer, subset: StratifiedDataset, context: str):
    try:
        return trainer.train(subset)
    except Exception as exc:
        raise EstimationError(f"trainer failed on {context}: {exc}") from exc


def task_scores(
    trainer: Trainer,
    features: np.ndarray,
    labels: np.ndarray,
    weights: np.ndarray,
    contexts: Sequence[str],
) -> np.ndarray:
    """Scores of every original point under each training task's rule.

    ``weights`` is (tasks, n): row r gives the multiplicity of each pooled
    observation in task r's training set (0/1 for fold complements, counts
    for bootstrap replicates).  Tasks that would train on a one-class set
    raise, naming the task.  Returns a (tasks, n) float matrix.
    """
    weights = np.asarray(weights)
    present1 = weights[:, labels == 1].sum(axis=1) > 0
    present2 = weights[:, labels == 2].sum(axis=1) > 0
    bad = np.flatnonzero(~(present1 & present2))
    if bad.size:
        raise EstimationError(f"{contexts[bad[0]]} leaves a one-class training set")
    weighted = getattr(trainer, "weighted_scores", None)
    if weighted is not None:
        try:
            out = np.asarray(weighted(features, labels, weights, features), dtype=float)
        except EstimationError:
            raise
        except Exception as exc:
            raise EstimationError(f"trainer failed on batched tasks: {exc}") from exc
        if out.shape != weights.shape:
            raise EstimationError("weighted_scores returned a misshaped matrix")
        return out
    scores = np.empty(weights.shape, dtype=float)
    index = np.arange(weights.shape[1])
    for r in range(weights.shape[0]):
        reps = np.repeat(index, weights[r])
        subset = StratifiedDataset(
            features[reps][labels[reps] == 1], features[reps][labels[reps] == 2]
        )
        rule = _train(trainer, subset, contexts[r])
        scores[r] = rule.score_many(features)
    return scores


def _fold_weights(partition: PartitionMap) -> np.ndarray:
    """(K, n) 0/1 matrix: row k-1 keeps everything outside fold k."""
    folds = np.arange(1, partition.n_folds + 1)
    return (partition.assign[None, :] != folds[:, None]).astype(int)


# ---------------------------------------------------------------------------
# Error rate
# ---------------------------------------------------------------------------


def _partition_losses(
    features: np.ndarray,
    labels: np.ndarray,
    partitions: Sequence[PartitionMap],
    trainer: Trainer,
    th: float,
    context: str = "fold",
) -> np.ndarray:
    """(runs, n) zero-one losses; observation i of run m is scored by the rule
    trained on everything outside its fold of run m."""
    weights = np.vstack([_fold_weights(pm) for pm in partitions])
    contexts = [
        f"run {m} {context} {k}" if len(partitions) > 1 else f"{context} {k}"
        for m, pm in enumerate(partitions)
        for k in range(1, pm.n_folds + 1)
    ]
    scores = task_scores(trainer, features, labels, weights, contexts)
    n_folds = partitions[0].n_folds
    losses = np.empty((len(partitions), features.shape[0]), dtype=float)
    for m, pm in enumerate(partitions):
        own_task = m * n_folds + (pm.assign - 1)
        own_scores = scores[own_task, np.arange(pm.n)]
        losses[m] = zero_one_losses(own_scores, labels, th)
    return losses


def err_cvn(dataset: StratifiedDataset, trainer: Trainer, th: float = 0.0) -> EstimatorReport:
    """Leave-one-out CV: train n times on n-1 points, test the held-out one."""
    if dataset.n < 2:
        raise DomainError("err_cvn requires n >= 2")
    features, labels = dataset.pooled()
    partition = make_partition(dataset.n, dataset.n)
    losses = _partition_losses(features, labels, [partition], trainer, th)[0]
    return EstimatorReport(
        value=float(losses.mean()),
        version=Version.CVN,
        variant=Variant.POOLED,
        metric=Metric.ERROR,
        config=_echo(dataset, trainer, th=th),
    )


def _aggregate_fold_values(losses: np.ndarray, partition: PartitionMap, variant: Variant) -> float:
    if variant is Variant.POOLED:
        return float(losses.mean())
    if variant is Variant.PARTITIONED:
        fold_means = [
            losses[partition.fold_members(k)].mean()
            for k in range(1, partition.n_folds + 1)
        ]
        return float(np.mean(fold_means))
    raise DomainError(f"variant {variant} not defined for this estimator")


def err_cvk(
    dataset: StratifiedDataset,
    trainer: Trainer,
    th: float = 0.0,
    n_folds: int = 2,
    variant: Variant = Variant.POOLED,
    perm: Sequence[int] | None = None,
) -> EstimatorReport:
    """One-run K-fold CV over the pooled observations.

    The pooled variant averages the per-observation losses once; the
    partitioned variant averages within each fold first.  With equal fold
    sizes the two coincide; with ``n_folds == n`` both reduce to ``err_cvn``.
    """
    if n_folds < 2:
        raise DomainError("err_cvk requires K >= 2")
    features, labels = dataset.pooled()
    partition = make_partition(dataset.n, n_folds, perm)
    losses = _partition_losses(features, labels, [partition], trainer, th)[0]
    return EstimatorReport(
        value=_aggregate_fold_values(losses, partition, variant),
        version=Version.CVK,
        variant=variant,
        metric=Metric.ERROR,
        config=_echo(dataset, trainer, th=th, n_folds=n_folds),
    )


def err_cvkr(
    dataset: StratifiedDataset,
    trainer: Trainer,
    th: float = 0.0,
    n_folds: int = 2,
    repetitions: int = 1,
    seed: int = 0,
    variant: Variant = Variant.POOLED,
) -> EstimatorReport:
    """Repeated K-fold CV: M independently shuffled K-fold runs.

    Pooled: every observation's loss is averaged over the M runs first, then
    across observations.  Partitioned: per-run partitioned K-fold values are
    averaged across runs.
    """
    if n_folds < 2:
        raise DomainError("err_cvkr requires K >= 2")
    features, labels = dataset.pooled()
    repeated = repeated_partitions(dataset.n, n_folds, repetitions, seed)
    per_run = _partition_losses(features, labels, repeated.maps, trainer, th)
    if variant is Variant.POOLED:
        value = float(per_run.mean(axis=0).mean())
    elif variant is Variant.PARTITIONED:
        run_values = [
            _aggregate_fold_values(per_run[m], repeated.maps[m], Variant.PARTITIONED)
            for m in range(repetitions)
        ]
        value = float(np.mean(run_values))
    else:
        raise DomainError(f"variant {variant} not defined for err_cvkr")
    return EstimatorReport(
        value=value,
        version=Version.CVKR,
        variant=variant,
        metric=Metric.ERROR,
        config=_echo(dataset, trainer, th=th, n_folds=n_folds, repetitions=repetitions, seed=seed),
    )


def err_cvkm(
    dataset: StratifiedDataset,
    trainer: Trainer,
    th: float = 0.0,
    n_folds: int = 2,
    repetitions: int = 1,
    seed: int = 0,
    variant: Variant = Variant.POOLED,
    strict: bool = False,
) -> EstimatorReport:
    """Monte-Carlo CV: each run trains once and tests on the first fold only.

    Pooled: per observation, the out-of-fold losses are summed over runs and
    divided by the number of runs that tested it; observations never tested
    are dropped and counted (strict mode raises).  Partitioned: the test-fold
    mean of each run is averaged over runs.  The variants differ for finite
    run counts.
    """
    if n_folds < 2:
        raise DomainError("err_cvkm requires K >= 2")
    features, labels = dataset.pooled()
    repeated = repeated_partitions(dataset.n, n_folds, repetitions, seed)
    in_test = np.vstack([pm.assign == 1 for pm in repeated.maps])  # (M, n)
    weights = (~in_test).astype(int)
    contexts = [f"run {m} fold 1" for m in range(repetitions)]
    scores = task_scores(trainer, features, labels, weights, contexts)
    losses = (np.where(scores >= float(th), 2, 1) != labels[None, :]).astype(float)
    hits = in_test.sum(axis=0)
    ledger = CoverageLedger(hits)
    if variant is Variant.POOLED:
        if strict and ledger.uncovered:
            raise CoverageError(
                f"{ledger.uncovered} observation(s) never appeared in a test fold"
            )
        covered = hits > 0
        if not covered.any():
            raise EstimationError("no observation was ever tested")
        sums = (losses * in_test).sum(axis=0)
        value = float((sums[covered] / hits[covered]).mean())
        excluded = ledger.uncovered
    elif variant is Variant.PARTITIONED:
        fold_size = dataset.n // n_folds
        value = float(((losses * in_test).sum(axis=1) / fold_size).mean())
        excluded = 0
    else:
        raise DomainError(f"variant {variant} not defined for err_cvkm")
    return EstimatorReport(
        value=value,
        version=Version.CVKM,
        variant=variant,
        metric=Metric.ERROR,
        config=_echo(dataset, trainer, th=th, n_folds=n_folds, repetitions=repetitions, seed=seed),
        excluded_count=excluded,
    )


def _two_class_counts(counts: np.ndarray, labels: np.ndarray) -> bool:
    return bool(counts[labels == 1].sum() > 0 and counts[labels == 2].sum() > 0)


def _pooled_bootstrap_counts(
    n: int, draws: int, model: SamplingModel, seed: int, labels: np.ndarray
) -> np.ndarray:
    """Replicate counts for pooled-class resampling; one-class rows redrawn."""
    counts = bootstrap_counts_matrix(n, draws, model, seed)
    for b in range(draws):
        if _two_class_counts(counts[b], labels):
            continue
        for attempt in range(1, MAX_ONE_CLASS_RETRIES + 1):
            retry = bootstrap_counts_matrix(
                n, 1, model, derive_seed(seed, f"retry-{b}", attempt)
            )[0]
            if _two_class_counts(retry, labels):
                counts[b] = retry
                break
        else:
            raise EstimationError(
                f"replicate {b}: still one-class after {MAX_ONE_CLASS_RETRIES} redraws"
            )
    return counts


def _loob_values(
    losses: np.ndarray, oob: np.ndarray
) -> tuple[float | None, int, float | None, int]:
    """(pooled value, uncovered count, partitioned value, skipped replicates).

    ``losses`` and ``oob`` are (B, n); values are None when undefined.
    """
    hit_counts = oob.sum(axis=0)  # per observation
    covered = hit_counts > 0
    pooled = None
    if covered.any():
        sums = (losses * oob).sum(axis=0)
        pooled = float((sums[covered] / hit_counts[covered]).mean())
    unseen_per_rep = oob.sum(axis=1)
    usable = unseen_per_rep > 0
    partitioned = None
    if usable.any():
        rep_means = (losses * oob).sum(axis=1)[usable] / unseen_per_rep[usable]
        partitioned = float(rep_means.mean())
    return pooled, int(np.count_nonzero(~covered)), partitioned, int(np.count_nonzero(~usable))


def err_loob(
    dataset: StratifiedDataset,
    trainer: Trainer,
    th: float = 0.0,
    n_bootstrap: int = 1,
    seed: int = 0,
    model: SamplingModel = SamplingModel.ORDERED,
    variant: Variant = Variant.POOLED,
    strict: bool = False,
) -> EstimatorReport:
    """Leave-one-out bootstrap error (pooled) and its replicate-averaged variant.

    Pooled: each observation's losses over the replicates that left it out
    are averaged, then averaged across observations; never-left-out
    observations are dropped and counted (strict mode raises).  Partitioned:
    each replicate contributes the mean loss over its out-of-bag set;
    all-in-bag replicates are skipped and counted.  The two variants are not
    equal, even for many replicates.
    """
    if dataset.n < 2:
        raise DomainError("err_loob requires n >= 2")
    if n_bootstrap < 1:
        raise DomainError("err_loob requires B >= 1")
    features, labels = dataset.pooled()
    counts = _pooled_bootstrap_counts(dataset.n, n_bootstrap, model, seed, labels)
    contexts = [f"replicate {b}" for b in range(n_bootstrap)]
    scores = task_scores(trainer, features, labels, counts, contexts)
    losses = (np.where(scores >= float(th), 2, 1) != labels[None, :]).astype(float)
    pooled, uncovered, partitioned, skipped = _loob_values(losses, counts == 0)
    if variant is Variant.POOLED:
        if strict and uncovered:
            raise CoverageError(f"{uncovered} observation(s) never out-of-bag")
        if pooled is None:
            raise EstimationError("no observation was ever out-of-bag")
        value, excluded = pooled, uncovered
    elif variant is Variant.PARTITIONED:
        if partitioned is None:
            raise EstimationError("every replicate contained all observations")
        value, excluded = partitioned, skipped
    else:
        raise DomainError(f"variant {variant} not defined for err_loob")
    return EstimatorReport(
        value=value,
        version=Version.LOOB,
        variant=variant,
        metric=Metric.ERROR,
        config=_echo(
            dataset, trainer, th=th, n_bootstrap=n_bootstrap, seed=seed, sampling=model
        ),
        excluded_count=excluded,
    )


# ---------------------------------------------------------------------------
# AUC
# ---------------------------------------------------------------------------


def _check_auc_sizes(dataset: StratifiedDataset) -> None:
    if dataset.n1 < 2 or dataset.n2 < 2:
        raise DomainError("AUC estimators require n1 >= 2 and n2 >= 2")


def _pair_task_scores(
    dataset: StratifiedDataset,
    trainer: Trainer,
    weights1: np.ndarray,
    weights2: np.ndarray,
    contexts: Sequence[str],
) -> tuple[np.ndarray, np.ndarray]:
    """Class-wise score matrices for stratified training tasks.

    ``weights1``/``weights2`` are (tasks, n1) and (tasks, n2) multiplicities;
    each task trains on the weighted union of the two classes and scores all
    original points of both.
    """
    features = np.vstack([dataset.class1, dataset.class2])
    labels = np.concatenate(
        [np.ones(dataset.n1, dtype=int), np.full(dataset.n2, 2, dtype=int)]
    )
    scores = task_scores(
        trainer, features, labels, np.hstack([weights1, weights2]), contexts
    )
    return scores[:, : dataset.n1], scores[:, dataset.n1 :]


def _auc_fold_kernel(
    dataset: StratifiedDataset,
    part1: PartitionMap,
    part2: PartitionMap,
    trainer: Trainer,
    run: int | None = None,
) -> np.ndarray:
    """(n1, n2) kernel values: pair (i, j) is scored by the rule trained
    without fold K1(i) of class 1 and fold K2(j) of class 2."""
    k1s, k2s = np.meshgrid(
        np.arange(1, part1.n_folds + 1), np.arange(1, part2.n_folds + 1), indexing="ij"
    )
    k1s, k2s = k1s.ravel(), k2s.ravel()
    weights1 = (part1.assign[None, :] != k1s[:, None]).astype(int)
    weights2 = (part2.assign[None, :] != k2s[:, None]).astype(int)
    prefix = f"run {run} " if run is not None else ""
    contexts = [f"{prefix}fold pair ({a}, {b})" for a, b in zip(k1s, k2s)]
    s1, s2 = _pair_task_scores(dataset, trainer, weights1, weights2, contexts)
    psi = np.empty((dataset.n1, dataset.n2), dtype=float)
    for t, (k1, k2) in enumerate(zip(k1s, k2s)):
        rows = part1.fold_members(k1)
        cols = part2.fold_members(k2)
        psi[np.ix_(rows, cols)] = pairwise_kernel(s1[t, rows], s2[t, cols])
    return psi


def _aggregate_pair_values(
    psi: np.ndarray, part1: PartitionMap, part2: PartitionMap, variant: Variant
) -> float:
    if variant is Variant.POOLED:
        return float(psi.mean())
    if variant is Variant.PARTITIONED:
        cell_means = [
            psi[np.ix_(part1.fold_members(k1), part2.fold_members(k2))].mean()
            for k1 in range(1, part1.n_folds + 1)
            for k2 in range(1, part2.n_folds + 1)
        ]
        return float(np.mean(cell_means))
    raise DomainError(f"variant {variant} not defined for this estimator")


def auc_cvn(dataset: StratifiedDataset, trainer: Trainer) -> EstimatorReport:
    """Leave-pair-out CV: n1*n2 trainings, one per held-out pair."""
    _check_auc_sizes(dataset)
    part1 = make_partition(dataset.n1, dataset.n1)
    part2 = make_partition(dataset.n2, dataset.n2)
    psi = _auc_fold_kernel(dataset, part1, part2, trainer)
    return EstimatorReport(
        value=float(psi.mean()),
        version=Version.CVN,
        variant=Variant.POOLED,
        metric=Metric.AUC,
        config=_echo(dataset, trainer),
    )


def auc_cvk(
    dataset: StratifiedDataset,
    trainer: Trainer,
    n_folds1: int = 2,
    n_folds2: int = 2,
    variant: Variant = Variant.POOLED,
    perms: tuple[Sequence[int] | None, Sequence[int] | None] | None = None,
) -> EstimatorReport:
    """One-run K-fold CV for AUC with per-class fold counts K1, K2.

    Pooled and partitioned variants train K1*K2 times and agree exactly; the
    reduced variant (K1 == K2 required) pairs only same-index folds, training
    K times, and generally differs.  ``n_folds1 == n1`` with ``n_folds2 == n2``
    reduces to ``auc_cvn``.
    """
    _check_auc_sizes(dataset)
    if n_folds1 < 2 or n_folds2 < 2:
        raise DomainError("auc_cvk requires K1 >= 2 and K2 >= 2")
    perm1, perm2 = perms if perms is not None else (None, None)
    part1 = make_partition(dataset.n1, n_folds1, perm1)
    part2 = make_partition(dataset.n2, n_folds2, perm2)
    if variant is Variant.REDUCED:
        if n_folds1 != n_folds2:
            raise DomainError("reduced variant requires K1 == K2")
        folds = np.arange(1, n_folds1 + 1)
        weights1 = (part1.assign[None, :] != folds[:, None]).astype(int)
        weights2 = (part2.assign[None, :] != folds[:, None]).astype(int)
        contexts = [f"fold pair ({k}, {k})" for k in folds]
        s1, s2 = _pair_task_scores(dataset, trainer, weights1, weights2, contexts)
        cell_means = [
            pairwise_kernel(
                s1[t, part1.fold_members(k)], s2[t, part2.fold_members(k)]
            ).mean()
            for t, k in enumerate(folds)
        ]
        value = float(np.mean(cell_means))
    else:
        psi = _auc_fold_kernel(dataset, part1, part2, trainer)
        value = _aggregate_pair_values(psi, part1, part2, variant)
    return EstimatorReport(
        value=value,
        version=Version.CVK,
        variant=variant,
        metric=Metric.AUC,
        config=_echo(dataset, trainer, n_folds1=n_folds1, n_folds2=n_folds2),
    )


def _stratified_repeats(dataset, n_folds1, n_folds2, repetitions, seed):
    rep1 = repeated_partitions(dataset.n1, n_folds1, repetitions, derive_seed(seed, "class1"))
    rep2 = repeated_partitions(dataset.n2, n_folds2, repetitions, derive_seed(seed, "class2"))
    return rep1, rep2


def auc_cvkr(
    dataset: StratifiedDataset,
    trainer: Trainer,
    n_folds1: int = 2,
    n_folds2: int = 2,
    repetitions: int = 1,
    seed: int = 0,
    variant: Variant = Variant.POOLED,
) -> EstimatorReport:
    """Repeated K-fold CV for AUC over M independent per-class shuffles."""
    _check_auc_sizes(dataset)
    if n_folds1 < 2 or n_folds2 < 2:
        raise DomainError("auc_cvkr requires K1 >= 2 and K2 >= 2")
    rep1, rep2 = _stratified_repeats(dataset, n_folds1, n_folds2, repetitions, seed)
    kernels = [
        _auc_fold_kernel(dataset, rep1.maps[m], rep2.maps[m], trainer, run=m)
        for m in range(repetitions)
    ]
    if variant is Variant.POOLED:
        value = float(np.mean(kernels, axis=0).mean())
    elif variant is Variant.PARTITIONED:
        run_values = [
            _aggregate_pair_values(kernels[m], rep1.maps[m], rep2.maps[m], Variant.PARTITIONED)
            for m in range(repetitions)
        ]
        value = float(np.mean(run_values))
    else:
        raise DomainError(f"variant {variant} not defined for auc_cvkr")
    return EstimatorReport(
        value=value,
        version=Version.CVKR,
        variant=variant,
        metric=Metric.AUC,
        config=_echo(
            dataset, trainer, n_folds1=n_folds1, n_folds2=n_folds2,
            repetitions=repetitions, seed=seed,
        ),
    )


def auc_cvkm(
    dataset: StratifiedDataset,
    trainer: Trainer,
    n_folds1: int = 2,
    n_folds2: int = 2,
    repetitions: int = 1,
    seed: int = 0,
    variant: Variant = Variant.POOLED,
    strict: bool = False,
) -> EstimatorReport:
    """Monte-Carlo CV for AUC: one test fold per class per run.

    Pooled: per pair, kernel values from runs where both members sat in the
    test folds, divided by the number of such runs; uncovered pairs are
    dropped and counted.  Partitioned: per-run mean over the test-fold pair
    block, averaged over runs.  Not equal for finite run counts.
    """
    _check_auc_sizes(dataset)
    if n_folds1 < 2 or n_folds2 < 2:
        raise DomainError("auc_cvkm requires K1 >= 2 and K2 >= 2")
    rep1, rep2 = _stratified_repeats(dataset, n_folds1, n_folds2, repetitions, seed)
    in_test1 = np.vstack([pm.assign == 1 for pm in rep1.maps])  # (M, n1)
    in_test2 = np.vstack([pm.assign == 1 for pm in rep2.maps])  # (M, n2)
    contexts = [f"run {m} fold pair (1, 1)" for m in range(repetitions)]
    s1, s2 = _pair_task_scores(
        dataset, trainer, (~in_test1).astype(int), (~in_test2).astype(int), contexts
    )
    pair_hits = np.zeros((dataset.n1, dataset.n2), dtype=int)
    pair_sums = np.zeros((dataset.n1, dataset.n2), dtype=float)
    run_means = np.empty(repetitions, dtype=float)
    for m in range(repetitions):
        rows = np.flatnonzero(in_test1[m])
        cols = np.flatnonzero(in_test2[m])
        psi = pairwise_kernel(s1[m, rows], s2[m, cols])
        pair_hits[np.ix_(rows, cols)] += 1
        pair_sums[np.ix_(rows, cols)] += psi
        run_means[m] = psi.mean()
    ledger = CoverageLedger(pair_hits.ravel())
    if variant is Variant.POOLED:
        if strict and ledger.uncovered:
            raise CoverageError(f"{ledger.uncovered} pair(s) never jointly tested")
        covered = pair_hits > 0
        if not covered.any():
            raise EstimationError("no pair was ever jointly tested")
        value = float((pair_sums[covered] / pair_hits[covered]).mean())
        excluded = ledger.uncovered
    elif variant is Variant.PARTITIONED:
        value = float(run_means.mean())
        excluded = 0
    else:
        raise DomainError(f"variant {variant} not defined for auc_cvkm")
    return EstimatorReport(
        value=value,
        version=Version.CVKM,
        variant=variant,
        metric=Metric.AUC,
        config=_echo(
            dataset, trainer, n_folds1=n_folds1, n_folds2=n_folds2,
            repetitions=repetitions, seed=seed,
        ),
        excluded_count=excluded,
    )


def auc_lpobs(
    dataset: StratifiedDataset,
    trainer: Trainer,
    n_bootstrap: int = 1,
    seed: int = 0,
    model: SamplingModel = SamplingModel.ORDERED,
    variant: Variant = Variant.POOLED,
    strict: bool = False,
) -> EstimatorReport:
    """Leave-pair-out bootstrap AUC; the classes are resampled independently.

    Pooled: per pair, kernel values from replicates where both members are
    out-of-bag, divided by the number of such replicates; never-covered pairs
    are dropped and counted.  Partitioned: per replicate, the mean kernel
    over its out-of-bag pair block, averaged over replicates; replicates with
    an empty out-of-bag set on either class are skipped and counted.  The
    variants differ even in the many-replicate limit.
    """
    _check_auc_sizes(dataset)
    if n_bootstrap < 1:
        raise DomainError("auc_lpobs requires B >= 1")
    counts1 = bootstrap_counts_matrix(dataset.n1, n_bootstrap, model, derive_seed(seed, "class1"))
    counts2 = bootstrap_counts_matrix(dataset.n2, n_bootstrap, model, derive_seed(seed, "class2"))
    contexts = [f"replicate {b}" for b in range(n_bootstrap)]
    scores1, scores2 = _pair_task_scores(dataset, trainer, counts1, counts2, contexts)
    oob1 = counts1 == 0
    oob2 = counts2 == 0
    pair_hits = np.zeros((dataset.n1, dataset.n2), dtype=int)
    pair_sums = np.zeros((dataset.n1, dataset.n2), dtype=float)
    rep_means: list[float] = []
    skipped = 0
    for b in range(n_bootstrap):
        rows = np.flatnonzero(oob1[b])
        cols = np.flatnonzero(oob2[b])
        if rows.size == 0 or cols.size == 0:
            skipped += 1
            continue
        psi = pairwise_kernel(scores1[b, rows], scores2[b, cols])
        pair_hits[np.ix_(rows, cols)] += 1
        pair_sums[np.ix_(rows, cols)] += psi
        rep_means.append(float(psi.mean()))
    ledger = CoverageLedger(pair_hits.ravel())
    if variant is Variant.POOLED:
        if strict and ledger.uncovered:
            raise CoverageError(f"{ledger.uncovered} pair(s) never jointly out-of-bag")
        covered = pair_hits > 0
        if not covered.any():
            raise EstimationError("no pair was ever jointly out-of-bag")
        value = float((pair_sums[covered] / pair_hits[covered]).mean())
        excluded = ledger.uncovered
    elif variant is Variant.PARTITIONED:
        if not rep_means:
            raise EstimationError("every replicate had an empty out-of-bag set")
        value = float(np.mean(rep_means))
        excluded = skipped
    else:
        raise DomainError(f"variant {variant} not defined for auc_lpobs")
    return EstimatorReport(
        value=value,
        version=Version.LOOB,
        variant=variant,
        metric=Metric.AUC,
        config=_echo(
            dataset, trainer, n_bootstrap=n_bootstrap, seed=seed, sampling=model
        ),
        excluded_count=excluded,
    )


# ---------------------------------------------------------------------------
# Dispatch
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EstimatorConfig:
    """Everything needed to run one estimator; the CLI parses into this."""

    version: Version
    metric: Metric
    variant: Variant = Variant.POOLED
    th: float = 0.0
    n_folds: int | None = None
    n_folds1: int | None = None
    n_folds2: int | None = None
    repetitions: int | None = None
    n_bootstrap: int | None = None
    sampling: SamplingModel = SamplingModel.ORDERED
    seed: int | None = None
    strict: bool = False

    def require(self, *names: str) -> None:
        for name in names:
            if getattr(self, name) is None:
                raise DomainError(f"{self.version.value} needs '{_CONFIG_KEYS[name]}'")


_CONFIG_KEYS = {
    "n_folds": "K",
    "n_folds1": "K1",
    "n_folds2": "K2",
    "repetitions": "M",
    "n_bootstrap": "B",
    "seed": "seed",
}


def run(dataset: StratifiedDataset, trainer: Trainer, cfg: EstimatorConfig) -> EstimatorReport:
    """Run the estimator selected by ``cfg`` on ``dataset``."""
    v, m = cfg.version, cfg.metric
    if m is Metric.ERROR:
        if v is Version.CVN:
            return err_cvn(dataset, trainer, cfg.th)
        if v is Version.CVK:
            cfg.require("n_folds")
            return err_cvk(dataset, trainer, cfg.th, cfg.n_folds, cfg.variant)
        if v is Version.CVKR:
            cfg.require("n_folds", "repetitions", "seed")
            return err_cvkr(
                dataset, trainer, cfg.th, cfg.n_folds, cfg.repetitions, cfg.seed, cfg.variant
            )
        if v is Version.CVKM:
            cfg.require("n_folds", "repetitions", "seed")
            return err_cvkm(
                dataset, trainer, cfg.th, cfg.n_folds, cfg.repetitions, cfg.seed,
                cfg.variant, cfg.strict,
            )
        if v is Version.LOOB:
            cfg.require("n_bootstrap", "seed")
            return err_loob(
                dataset, trainer, cfg.th, cfg.n_bootstrap, cfg.seed, cfg.sampling,
                cfg.variant, cfg.strict,
            )
    else:
        if v is Version.CVN:
            return auc_cvn(dataset, trainer)
        if v is Version.CVK:
            cfg.require("n_folds1", "n_folds2")
            return auc_cvk(dataset, trainer, cfg.n_folds1, cfg.n_folds2, cfg.variant)
        if v is Version.CVKR:
            cfg.require("n_folds1", "n_folds2", "repetitions", "seed")
            return auc_cvkr(
                dataset, trainer, cfg.n_folds1, cfg.n_folds2, cfg.repetitions,
                cfg.seed, cfg.variant,
            )
        if v is Version.CVKM:
            cfg.require("n_folds1", "n_folds2", "repetitions", "seed")
            return auc_cvkm(
                dataset, trainer, cfg.n_folds1, cfg.n_folds2, cfg.repetitions,
                cfg.seed, cfg.variant, cfg.strict,
            )
        if v is Version.LOOB:
            cfg.require("n_bootstrap", "seed")
            return auc_lpobs(
                dataset, trainer, cfg.n_bootstrap, cfg.seed, cfg.sampling,
                cfg.variant, cfg.strict,
            )
    raise DomainError(f"unsupported estimator {v.value}/{m.value}")
