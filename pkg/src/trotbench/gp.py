"""Gaussian process regression over the normalized controller-parameter box.

The surrogate works on inputs normalized to the unit cube and on targets
standardized to zero mean / unit spread, with a squared-exponential (ARD)
kernel:

    k(a, b) = sigma_f^2 * exp(-0.5 * sum_d (a_d - b_d)^2 / ell_d^2)

Fitting factorizes K + sigma_n^2 I with a Cholesky decomposition (plus an
escalating jitter fallback) and caches the solved weights, so posterior
queries are O(n) / O(n^2) per point. Predictions are mapped back to raw
target units using the standardization constants stored on the dataset.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

N_DIMS = 5

# Escalating-jitter schedule used when the kernel matrix is not numerically
# positive definite: start tiny, multiply per retry, give up past the cap.
JITTER_INITIAL = 1e-10
JITTER_GROWTH = 10.0
JITTER_MAX = 1e-4


class FactorizationFailure(Exception):
    """Kernel matrix could not be Cholesky-factorized within the jitter budget."""


@dataclass(frozen=True)
class KernelParams:
    """Squared-exponential kernel hyperparameters.

    signal_variance and noise_variance are in squared (standardized) target
    units; length_scales are per-dimension, in normalized input units.
    """

    signal_variance: float = 1.0
    length_scales: tuple[float, ...] = (0.3,) * N_DIMS
    noise_variance: float = 1e-4

    def __post_init__(self) -> None:
        if self.signal_variance <= 0:
            raise ValueError("signal_variance must be positive")
        if any(l <= 0 for l in self.length_scales):
            raise ValueError("length_scales must all be positive")
        if self.noise_variance < 0:
            raise ValueError("noise_variance must be non-negative")


@dataclass(frozen=True)
class Dataset:
    """Observation history: inputs in the unit cube plus raw targets.

    target_mean / target_std are the standardization constants applied before
    any kernel algebra. They are stored explicitly (rather than recomputed on
    the fly) so a dataset can be extended while keeping a fixed target scale.
    """

    inputs: np.ndarray  # (n, d), every coordinate in [0, 1]
    targets: np.ndarray  # (n,), raw units
    target_mean: float = 0.0
    target_std: float = 1.0

    def __post_init__(self) -> None:
        inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        targets = np.asarray(self.targets, dtype=float).reshape(-1)
        if len(targets) == 0:
            dim = inputs.shape[1] if inputs.ndim == 2 and inputs.shape[1] else N_DIMS
            inputs = inputs.reshape(0, dim)
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "targets", targets)
        if inputs.shape[0] != targets.shape[0]:
            raise ValueError("inputs and targets must have equal length")
        if inputs.size and (inputs.min() < -1e-12 or inputs.max() > 1 + 1e-12):
            raise ValueError("inputs must lie in the unit cube")
        if self.target_std <= 0:
            raise ValueError("target_std must be positive")

    @classmethod
    def empty(cls, n_dims: int = N_DIMS) -> "Dataset":
        return cls(np.zeros((0, n_dims)), np.zeros(0))

    @classmethod
    def from_observations(cls, inputs: np.ndarray, targets: np.ndarray) -> "Dataset":
        """Build a dataset, computing standardization constants from targets.

        The spread is the population standard deviation, falling back to 1.0
        unless there are at least two distinct targets.
        """
        targets = np.asarray(targets, dtype=float).reshape(-1)
        if len(targets) == 0:
            return cls.empty(np.atleast_2d(inputs).shape[-1] if np.size(inputs) else N_DIMS)
        mean = float(np.mean(targets))
        std = float(np.std(targets))
        if len(targets) < 2 or std == 0.0:
            std = 1.0
        return cls(inputs, targets, target_mean=mean, target_std=std)

    @property
    def n(self) -> int:
        return int(self.targets.shape[0])

    def standardized_targets(self) -> np.ndarray:
        return (self.targets - self.target_mean) / self.target_std

    def extended(self, x: np.ndarray, y: float) -> "Dataset":
        """Append one observation, keeping the existing standardization."""
        return Dataset(
            np.vstack([self.inputs, np.asarray(x, dtype=float).reshape(1, -1)]),
            np.append(self.targets, y),
            target_mean=self.target_mean,
            target_std=self.target_std,
        )


@dataclass(frozen=True)
class GPModel:
    """Fitted surrogate: dataset, kernel, Cholesky factor and solved weights."""

    data: Dataset
    kernel: KernelParams
    chol: np.ndarray = field(repr=False)  # lower-triangular factor of K + sigma_n^2 I
    alpha: np.ndarray = field(repr=False)  # (K + sigma_n^2 I)^-1 y_std

    @property
    def n(self) -> int:
        return self.data.n


def kernel_eval(a: np.ndarray, b: np.ndarray, kp: KernelParams) -> float:
    """Squared-exponential covariance between two points."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ls = np.asarray(kp.length_scales, dtype=float)
    d = (a - b) / ls
    return float(kp.signal_variance * np.exp(-0.5 * np.dot(d, d)))


def kernel_matrix(xa: np.ndarray, xb: np.ndarray, kp: KernelParams) -> np.ndarray:
    """Cross-covariance matrix between two stacks of points."""
    xa = np.atleast_2d(np.asarray(xa, dtype=float))
    xb = np.atleast_2d(np.asarray(xb, dtype=float))
    ls = np.asarray(kp.length_scales, dtype=float)
    sa = xa / ls
    sb = xb / ls
    sq = (
        np.sum(sa**2, axis=1)[:, None]
        + np.sum(sb**2, axis=1)[None, :]
        - 2.0 * sa @ sb.T
    )
    np.maximum(sq, 0.0, out=sq)
    return kp.signal_variance * np.exp(-0.5 * sq)


def _factorize(k_noisy: np.ndarray, max_jitter: float = JITTER_MAX) -> np.ndarray:
    """Cholesky with escalating diagonal jitter; raises FactorizationFailure."""
    try:
        return np.linalg.cholesky(k_noisy)
    except np.linalg.LinAlgError:
        pass
    jitter = JITTER_INITIAL
    eye = np.eye(k_noisy.shape[0])
    while jitter <= max_jitter:
        try:
            return np.linalg.cholesky(k_noisy + jitter * eye)
        except np.linalg.LinAlgError:
            jitter *= JITTER_GROWTH
    raise FactorizationFailure(
        "kernel matrix not positive definite within jitter budget "
        f"(max jitter {max_jitter:g}); duplicated inputs with zero noise?"
    )


def fit(data: Dataset, kp: KernelParams, max_jitter: float = JITTER_MAX) -> GPModel:
    """Fit the GP to a dataset. An empty dataset yields the prior model."""
    if data.n == 0:
        return GPModel(data=data, kernel=kp, chol=np.zeros((0, 0)), alpha=np.zeros(0))
    k = kernel_matrix(data.inputs, data.inputs, kp)
    k[np.diag_indices_from(k)] += kp.noise_variance
    chol = _factorize(k, max_jitter=max_jitter)
    y = data.standardized_targets()
    alpha = solve_triangular(chol.T, solve_triangular(chol, y, lower=True), lower=False)
    return GPModel(data=data, kernel=kp, chol=chol, alpha=alpha)


def posterior_predict(model: GPModel, x: np.ndarray) -> tuple[float, float]:
    """Posterior mean and variance at one query point, in raw target units."""
    mean, var = posterior_predict_batch(model, np.asarray(x, dtype=float).reshape(1, -1))
    return float(mean[0]), float(var[0])


def posterior_predict_batch(model: GPModel, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized posterior mean/variance for a stack of query points."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    kp = model.kernel
    std = model.data.target_std
    mean_off = model.data.target_mean
    if model.n == 0:
        prior_var = kp.signal_variance * std**2
        return (
            np.full(x.shape[0], mean_off),
            np.full(x.shape[0], prior_var),
        )
    k_star = kernel_matrix(model.data.inputs, x, kp)  # (n, m)
    mean_std = k_star.T @ model.alpha
    v = solve_triangular(model.chol, k_star, lower=True)
    var_std = kp.signal_variance - np.sum(v**2, axis=0)
    np.maximum(var_std, 0.0, out=var_std)  # clamp float cancellation
    return mean_off + std * mean_std, std**2 * var_std


def log_marginal_likelihood(
    data: Dataset, kp: KernelParams, max_jitter: float = JITTER_MAX
) -> float:
    """log p(y | X, kp) for the standardized targets.

    Computed from the Cholesky factor as
    -0.5 y^T alpha - sum_i log L_ii - 0.5 n log 2 pi.
    """
    if data.n == 0:
        raise ValueError("log marginal likelihood needs at least one observation")
    model = fit(data, kp, max_jitter=max_jitter)
    y = data.standardized_targets()
    return float(
        -0.5 * y @ model.alpha
        - np.sum(np.log(np.diag(model.chol)))
        - 0.5 * data.n * np.log(2.0 * np.pi)
    )


def default_hyperparameter_grid() -> list[KernelParams]:
    """5 x 5 x 5 log-grid: shared length scale x signal variance x noise."""
    grid = []
    for ls in np.logspace(np.log10(0.1), np.log10(1.0), 5):
        for sf in np.logspace(np.log10(0.25), np.log10(4.0), 5):
            for sn in np.logspace(-6, -2, 5):
                grid.append(
                    KernelParams(
                        signal_variance=float(sf),
                        length_scales=(float(ls),) * N_DIMS,
                        noise_variance=float(sn),
                    )
                )
    return grid


def select_hyperparameters(
    data: Dataset, candidates: list[KernelParams] | None = None
) -> KernelParams:
    """Pick the grid candidate maximizing the log marginal likelihood.

    Ties resolve to the earliest candidate, so the selection is deterministic
    for a fixed grid. Candidates that fail to factorize are skipped.
    """
    if candidates is None:
        candidates = default_hyperparameter_grid()
    best: KernelParams | None = None
    best_lml = -np.inf
    for kp in candidates:
        try:
            lml = log_marginal_likelihood(data, kp)
        except FactorizationFailure:
            continue
        if lml > best_lml:
            best, best_lml = kp, lml
    if best is None:
        raise FactorizationFailure("no hyperparameter candidate factorized")
    return best
