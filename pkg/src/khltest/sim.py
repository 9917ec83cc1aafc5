"""Monte Carlo harness: level, power, quantile and compression-agreement runs.

Synthetic Gaussian group data stands in for real datasets; the point of
the harness is to check the chi-square calibration of the test, its
power against mean shifts, and how closely the landmark-compressed
statistic tracks the exact one.

Randomness is fully reproducible: replicate ``r`` of a run with seed
``s`` draws from a PCG64 generator seeded with ``SeedSequence((s, r))``,
so replicates are independent substreams that can be computed in any
order.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as _scipy_stats

from .design import one_way_design, pairwise_contrast
from .errors import InputError
from .kernel import KernelSpec, cross_gram, gram
from .model import fit, tkhl_test
from .nystrom import build_anchors, landmark_design, landmark_residual_gram, nystrom_test, sample_landmarks


@dataclass(frozen=True)
class NystromSimConfig:
    """Compression settings for side-by-side exact / compressed runs."""

    q_fraction: float
    anchors: int
    strategy: str = "uniform"

    def __post_init__(self):
        if not 0.0 < self.q_fraction <= 1.0:
            raise InputError("q_fraction must lie in (0, 1]")
        if int(self.anchors) != self.anchors or self.anchors < 1:
            raise InputError("anchor count must be a positive integer")

    def to_dict(self) -> dict:
        return {
            "q_fraction": self.q_fraction,
            "anchors": self.anchors,
            "strategy": self.strategy,
        }


@dataclass(frozen=True, eq=False)
class SimConfig:
    """One Monte Carlo experiment: groups, distribution, kernel, truncations."""

    n_per_group: tuple
    dims: int
    truncations: tuple
    kernel: KernelSpec
    mean_shift: tuple | None = None
    covariance: np.ndarray | None = None
    alpha: float = 0.05
    reps: int = 200
    seed: int = 0
    nystrom: NystromSimConfig | None = None

    def __post_init__(self):
        object.__setattr__(self, "n_per_group", tuple(int(k) for k in self.n_per_group))
        object.__setattr__(self, "truncations", tuple(int(t) for t in self.truncations))
        if len(self.n_per_group) < 2 or any(k < 1 for k in self.n_per_group):
            raise InputError("need at least 2 groups with at least 1 observation each")
        if int(self.dims) != self.dims or self.dims < 1:
            raise InputError("dims must be a positive integer")
        if not self.truncations or any(t < 1 for t in self.truncations):
            raise InputError("truncations must be positive integers")
        if len(set(self.truncations)) != len(self.truncations):
            raise InputError("truncations must be distinct")
        if not 0.0 < self.alpha < 1.0:
            raise InputError("alpha must lie in (0, 1)")
        if int(self.reps) != self.reps or self.reps < 1:
            raise InputError("reps must be a positive integer")
        if int(self.seed) != self.seed or self.seed < 0:
            raise InputError("seed must be a nonnegative integer")
        if self.mean_shift is not None:
            shift = tuple(tuple(float(v) for v in row) for row in self.mean_shift)
            if len(shift) != len(self.n_per_group):
                raise InputError("mean_shift needs one vector per group")
            if any(len(row) != self.dims for row in shift):
                raise InputError("each mean vector must have length dims")
            object.__setattr__(self, "mean_shift", shift)
        if self.covariance is not None:
            cov = np.asarray(self.covariance, dtype=float)
            if cov.shape != (self.dims, self.dims):
                raise InputError("covariance must be dims x dims")
            object.__setattr__(self, "covariance", cov)

    @property
    def n(self) -> int:
        return int(sum(self.n_per_group))

    @property
    def groups(self) -> tuple:
        return tuple(f"g{i}" for i in range(len(self.n_per_group)))

    def shifts(self) -> np.ndarray:
        if self.mean_shift is None:
            return np.zeros((len(self.n_per_group), self.dims))
        return np.asarray(self.mean_shift, dtype=float)

    def to_dict(self) -> dict:
        out = {
            "n_per_group": list(self.n_per_group),
            "dims": self.dims,
            "truncations": list(self.truncations),
            "kernel": self.kernel.to_dict(),
            "mean_shift": None
            if self.mean_shift is None
            else [list(row) for row in self.mean_shift],
            "covariance": None if self.covariance is None else self.covariance.tolist(),
            "alpha": self.alpha,
            "reps": self.reps,
            "seed": self.seed,
            "nystrom": None if self.nystrom is None else self.nystrom.to_dict(),
        }
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "SimConfig":
        required = ("n_per_group", "dims", "truncations", "kernel")
        for key in required:
            if key not in raw:
                raise InputError(f"simulation config is missing {key!r}")
        ny = raw.get("nystrom")
        return cls(
            n_per_group=tuple(raw["n_per_group"]),
            dims=int(raw["dims"]),
            truncations=tuple(raw["truncations"]),
            kernel=KernelSpec.from_dict(raw["kernel"]),
            mean_shift=raw.get("mean_shift"),
            covariance=raw.get("covariance"),
            alpha=float(raw.get("alpha", 0.05)),
            reps=int(raw.get("reps", 200)),
            seed=int(raw.get("seed", 0)),
            nystrom=None
            if ny is None
            else NystromSimConfig(
                q_fraction=float(ny["q_fraction"]),
                anchors=int(ny["anchors"]),
                strategy=ny.get("strategy", "uniform"),
            ),
        )


@dataclass(frozen=True)
class SimEntry:
    """Aggregated results for one truncation value."""

    truncation: int
    df: int
    rejection_rate: float
    ci_low: float
    ci_high: float
    stat_q95: float
    stat_q99: float
    chi2_q95: float
    chi2_q99: float
    mean_seconds_per_test: float
    nystrom_agreement: float | None = None
    nystrom_rejection_rate: float | None = None

    def to_dict(self) -> dict:
        return {
            "truncation": self.truncation,
            "df": self.df,
            "rejection_rate": self.rejection_rate,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "stat_q95": self.stat_q95,
            "stat_q99": self.stat_q99,
            "chi2_q95": self.chi2_q95,
            "chi2_q99": self.chi2_q99,
            "mean_seconds_per_test": self.mean_seconds_per_test,
            "nystrom_agreement": self.nystrom_agreement,
            "nystrom_rejection_rate": self.nystrom_rejection_rate,
        }


@dataclass(frozen=True, eq=False)
class SimReport:
    """Per-truncation summaries plus the flat per-replicate statistic table."""

    mode: str
    alpha: float
    reps: int
    seed: int
    n: int
    entries: tuple
    per_rep_columns: tuple = field(repr=False, default=())
    per_rep: np.ndarray | None = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "alpha": self.alpha,
            "reps": self.reps,
            "seed": self.seed,
            "n": self.n,
            "entries": [e.to_dict() for e in self.entries],
        }

    def p_values(self, truncation: int) -> np.ndarray:
        cols = list(self.per_rep_columns)
        t_col = self.per_rep[:, cols.index("truncation")]
        return self.per_rep[t_col == truncation, cols.index("p_value")]

    def statistics(self, truncation: int) -> np.ndarray:
        cols = list(self.per_rep_columns)
        t_col = self.per_rep[:, cols.index("truncation")]
        return self.per_rep[t_col == truncation, cols.index("statistic")]


def _rep_rng(seed: int, rep_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((int(seed), int(rep_index))))


def _cholesky(config: SimConfig) -> np.ndarray:
    if config.covariance is None:
        return np.eye(config.dims)
    try:
        return np.linalg.cholesky(config.covariance)
    except np.linalg.LinAlgError as exc:
        raise InputError("covariance must be symmetric positive definite") from exc


def generate_dataset(config: SimConfig, rep_index: int):
    """Draw one replicate: per-group Gaussian rows and the label list.

    Deterministic in ``(config.seed, rep_index)``; the covariance is
    shared across groups, only the configured means differ.
    """
    chol = _cholesky(config)
    rng = _rep_rng(config.seed, rep_index)
    shifts = config.shifts()
    blocks = []
    labels: list = []
    for g, (count, name) in enumerate(zip(config.n_per_group, config.groups)):
        z = rng.standard_normal((count, config.dims))
        blocks.append(shifts[g] + z @ chol.T)
        labels.extend([name] * count)
    return np.vstack(blocks), labels


def clopper_pearson(k: int, n: int, confidence: float = 0.95):
    """Exact binomial confidence interval for k successes out of n."""
    if not 0 <= k <= n or n < 1:
        raise InputError("need 0 <= k <= n with n >= 1")
    a = (1.0 - confidence) / 2.0
    low = 0.0 if k == 0 else float(_scipy_stats.beta.ppf(a, k, n - k + 1))
    high = 1.0 if k == n else float(_scipy_stats.beta.ppf(1.0 - a, k + 1, n - k))
    return low, high


def run_level_experiment(config: SimConfig) -> SimReport:
    """Null-calibration run: requires all mean shifts to be zero."""
    if np.any(config.shifts() != 0.0):
        raise InputError("a level experiment needs all mean shifts equal to zero")
    return _run(config, mode="level")


def run_power_experiment(config: SimConfig) -> SimReport:
    """Rejection-rate run under the configured mean shifts; when a
    compression config is present the exact and compressed tests run side
    by side and their decision agreement is reported."""
    return _run(config, mode="power")


def _run(config: SimConfig, mode: str) -> SimReport:
    _cholesky(config)  # validate covariance up front
    truncations = config.truncations
    with_ny = config.nystrom is not None
    columns = ["rep", "truncation", "statistic", "p_value"]
    if with_ny:
        columns += ["ny_statistic", "ny_p_value"]
    rows = np.full((config.reps * len(truncations), len(columns)), np.nan)
    contrast = pairwise_contrast(len(config.n_per_group))
    total_seconds = 0.0
    n_tests = 0
    for rep in range(config.reps):
        data, labels = generate_dataset(config, rep)
        start = time.perf_counter()
        gm = gram(data, config.kernel)
        design = one_way_design(labels, name="group")
        model = fit(gm, design)
        results = {t: tkhl_test(model, contrast, t) for t in truncations}
        total_seconds += time.perf_counter() - start
        n_tests += len(truncations)
        ny_results = {}
        if with_ny:
            ny = config.nystrom
            q = max(2, int(round(ny.q_fraction * config.n)))
            # Landmark selection uses its own substream, disjoint from the
            # data stream of the same replicate.
            plan_seed = int(
                np.random.SeedSequence((config.seed, rep, 1)).generate_state(
                    1, dtype=np.uint64
                )[0]
            )
            plan = sample_landmarks(
                config.n,
                q,
                groups=labels if ny.strategy == "stratified" else None,
                strategy=ny.strategy,
                seed=plan_seed,
            )
            lm = landmark_design(design, plan.indices)
            gram_z = gram(data[plan.indices], gm.spec)
            k_e_z = landmark_residual_gram(gram_z, lm)
            anchors = build_anchors(k_e_z, ny.anchors, lm)
            cross = cross_gram(data[plan.indices], data, gm.spec)
            for t in truncations:
                ny_results[t] = nystrom_test(anchors, cross, design, contrast, t)
        for j, t in enumerate(truncations):
            row = [rep, t, results[t].statistic, results[t].p_value]
            if with_ny:
                row += [ny_results[t].statistic, ny_results[t].p_value]
            rows[rep * len(truncations) + j] = row

    cols = {name: i for i, name in enumerate(columns)}
    entries = []
    mean_seconds = total_seconds / n_tests
    d = contrast.d
    for t in truncations:
        sub = rows[rows[:, cols["truncation"]] == t]
        stats_t = sub[:, cols["statistic"]]
        p_t = sub[:, cols["p_value"]]
        k = int(np.count_nonzero(p_t < config.alpha))
        low, high = clopper_pearson(k, config.reps)
        df = d * t
        agreement = None
        ny_rate = None
        if with_ny:
            ny_p = sub[:, cols["ny_p_value"]]
            agreement = float(np.mean((ny_p < config.alpha) == (p_t < config.alpha)))
            ny_rate = float(np.mean(ny_p < config.alpha))
        entries.append(
            SimEntry(
                truncation=t,
                df=df,
                rejection_rate=k / config.reps,
                ci_low=low,
                ci_high=high,
                stat_q95=float(np.quantile(stats_t, 0.95)),
                stat_q99=float(np.quantile(stats_t, 0.99)),
                chi2_q95=float(_scipy_stats.chi2.isf(0.05, df)),
                chi2_q99=float(_scipy_stats.chi2.isf(0.01, df)),
                mean_seconds_per_test=mean_seconds,
                nystrom_agreement=agreement,
                nystrom_rejection_rate=ny_rate,
            )
        )
    return SimReport(
        mode=mode,
        alpha=config.alpha,
        reps=config.reps,
        seed=config.seed,
        n=config.n,
        entries=tuple(entries),
        per_rep_columns=tuple(columns),
        per_rep=rows,
    )
