"""Gradient estimators from noisy function values.

Seven methods, split in two families:

  deterministic  FFD, CFD       coordinate finite differences
                 LI             linear interpolation on a direction set
  smoothing      GSG, cGSG      Gaussian directions
                 BSG, cBSG      directions uniform on the unit sphere

All return a GradientEstimate with exact evaluation accounting: n+1 (FFD),
2n (CFD), n+1 (LI), N+1 (GSG/BSG, the base value f(x) is evaluated once and
reused), 2N (cGSG/cBSG). The one-point smoothing forms whose variance blows
up as sigma -> 0 exist only behind a pedagogical flag.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import NoisyOracle
from .sampling import (DirectionSet, RngStream, gaussian_directions,
                       interpolation_directions, sphere_directions)

Array = np.ndarray

# Above this condition estimate the interpolation system is useless in 64-bit
# arithmetic; the caller must resample rather than trust the solve.
COND_LIMIT = 1e12

METHODS = ("FFD", "CFD", "LI", "GSG", "cGSG", "BSG", "cBSG")

__all__ = [
    "METHODS",
    "GradientEstimate",
    "EstimatorConfig",
    "SingularDirections",
    "ZeroGradient",
    "ffd",
    "cfd",
    "linear_interp",
    "gsg",
    "cgsg",
    "bsg",
    "cbsg",
    "one_point_gsg",
    "one_point_bsg",
    "relative_error",
    "estimate",
    "estimate_with_retry",
]


class SingularDirections(RuntimeError):
    """Interpolation direction matrix is singular or numerically unusable."""


class ZeroGradient(ValueError):
    """Relative error is undefined at a stationary point of phi."""


@dataclass(frozen=True)
class GradientEstimate:
    g: Array
    method: str
    sigma: float
    N: int
    evals_used: int
    cond_Q: float | None = None     # LI only: 2-norm condition number of Q
    qinv_norm: float | None = None  # LI only: ||Q^-1||_2, the bound constant


@dataclass(frozen=True)
class EstimatorConfig:
    """Method selection for drivers (optimizer, sweeps).

    N applies to the smoothing methods; direction_source is an optional fixed
    DirectionSet for LI (when absent, drivers draw fresh max-norm scaled
    Gaussian directions per estimate). seed keys randomized estimators when a
    driver does not supply its own substream.
    """

    method: str
    sigma: float
    N: int | None = None
    direction_source: DirectionSet | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choices: {METHODS}")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.N is not None and self.N < 1:
            raise ValueError("N must be at least 1")


def _check_sigma(sigma: float) -> float:
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    return float(sigma)


def ffd(oracle: NoisyOracle, x: Array, sigma: float) -> GradientEstimate:
    """Forward differences along the coordinate axes.

    [g]_i = (f(x + sigma e_i) - f(x)) / sigma; n+1 evaluations.
    """
    sigma = _check_sigma(sigma)
    x = np.asarray(x, dtype=float)
    n = x.size
    f0 = oracle(x)
    fplus = oracle.eval_batch(x[None, :] + sigma * np.eye(n))
    return GradientEstimate((fplus - f0) / sigma, "FFD", sigma, n, n + 1)


def cfd(oracle: NoisyOracle, x: Array, sigma: float) -> GradientEstimate:
    """Central differences along the coordinate axes.

    [g]_i = (f(x + sigma e_i) - f(x - sigma e_i)) / (2 sigma); 2n evaluations,
    f(x) itself is never used.
    """
    sigma = _check_sigma(sigma)
    x = np.asarray(x, dtype=float)
    n = x.size
    eye = np.eye(n)
    fplus = oracle.eval_batch(x[None, :] + sigma * eye)
    fminus = oracle.eval_batch(x[None, :] - sigma * eye)
    return GradientEstimate((fplus - fminus) / (2 * sigma), "CFD", sigma, n, 2 * n)


def linear_interp(oracle: NoisyOracle, x: Array, directions: DirectionSet,
                  sigma: float) -> GradientEstimate:
    """Interpolation gradient: solve sigma Q g = F for the sample set
    {x + sigma u_i} with F_i = f(x + sigma u_i) - f(x).

    Orthonormal (and coordinate) schemes use the O(n^2) transpose path
    g = Q'F / sigma; general sets go through a pivoted LU solve. The exact
    2-norm condition number of Q is recorded; above COND_LIMIT the system is
    rejected with SingularDirections and the caller decides whether to
    resample (no resampling happens here, so the result is a deterministic
    function of the inputs).
    """
    sigma = _check_sigma(sigma)
    x = np.asarray(x, dtype=float)
    n = x.size
    if directions.Q.shape != (n, n):
        raise ValueError(f"direction matrix must be {n}x{n} for interpolation")
    Q = directions.Q
    orthogonal = directions.scheme in ("coordinate", "orthonormal")
    if orthogonal:
        cond = qinv = 1.0
    else:
        # reject before spending evaluations
        svals = np.linalg.svd(Q, compute_uv=False)
        cond = float(svals[0] / svals[-1]) if svals[-1] > 0 else np.inf
        if not np.isfinite(cond) or cond > COND_LIMIT:
            raise SingularDirections(
                f"direction set condition number {cond:.3e} exceeds {COND_LIMIT:.0e}")
        qinv = float(1.0 / svals[-1])
    f0 = oracle(x)
    F = oracle.eval_batch(x[None, :] + sigma * Q) - f0
    g = (Q.T @ F) / sigma if orthogonal else np.linalg.solve(Q, F) / sigma
    return GradientEstimate(g, "LI", sigma, n, n + 1, cond_Q=cond, qinv_norm=qinv)


def _resolve_directions(n: int, N: int, rng, directions: DirectionSet | None,
                        sampler) -> Array:
    if directions is not None:
        if directions.Q.shape != (N, n):
            raise ValueError(f"direction matrix must be {N}x{n}")
        return directions.Q
    if rng is None:
        raise ValueError("either rng or directions must be supplied")
    return sampler(n, N, rng).Q


def gsg(oracle: NoisyOracle, x: Array, sigma: float, N: int,
        rng: np.random.Generator | None = None, *,
        directions: DirectionSet | None = None) -> GradientEstimate:
    """Gaussian smoothed gradient.

    g = (1/N) sum_i [(f(x + sigma u_i) - f(x)) / sigma] u_i, u_i ~ N(0, I).
    N+1 evaluations: f(x) is evaluated once and its (single) noise
    realization is shared by all N difference quotients. Unbiased for the
    gradient of the Gaussian-smoothed phi.
    """
    sigma = _check_sigma(sigma)
    x = np.asarray(x, dtype=float)
    U = _resolve_directions(x.size, N, rng, directions, gaussian_directions)
    f0 = oracle(x)
    fplus = oracle.eval_batch(x[None, :] + sigma * U)
    g = ((fplus - f0) / sigma) @ U / N
    return GradientEstimate(g, "GSG", sigma, N, N + 1)


def cgsg(oracle: NoisyOracle, x: Array, sigma: float, N: int,
         rng: np.random.Generator | None = None, *,
         directions: DirectionSet | None = None) -> GradientEstimate:
    """Central Gaussian smoothed gradient; 2N evaluations.

    The antithetic pair f(x + sigma u), f(x - sigma u) draws independent
    noise on each side.
    """
    sigma = _check_sigma(sigma)
    x = np.asarray(x, dtype=float)
    U = _resolve_directions(x.size, N, rng, directions, gaussian_directions)
    fplus = oracle.eval_batch(x[None, :] + sigma * U)
    fminus = oracle.eval_batch(x[None, :] - sigma * U)
    g = ((fplus - fminus) / (2 * sigma)) @ U / N
    return GradientEstimate(g, "cGSG", sigma, N, 2 * N)


def bsg(oracle: NoisyOracle, x: Array, sigma: float, N: int,
        rng: np.random.Generator | None = None, *,
        directions: DirectionSet | None = None) -> GradientEstimate:
    """Sphere smoothed gradient: Gaussian form with u_i uniform on the unit
    sphere and the estimator scaled by n. N+1 evaluations."""
    sigma = _check_sigma(sigma)
    x = np.asarray(x, dtype=float)
    n = x.size
    U = _resolve_directions(n, N, rng, directions, sphere_directions)
    f0 = oracle(x)
    fplus = oracle.eval_batch(x[None, :] + sigma * U)
    g = ((fplus - f0) / sigma) @ U * (n / N)
    return GradientEstimate(g, "BSG", sigma, N, N + 1)


def cbsg(oracle: NoisyOracle, x: Array, sigma: float, N: int,
         rng: np.random.Generator | None = None, *,
         directions: DirectionSet | None = None) -> GradientEstimate:
    """Central sphere smoothed gradient; 2N evaluations."""
    sigma = _check_sigma(sigma)
    x = np.asarray(x, dtype=float)
    n = x.size
    U = _resolve_directions(n, N, rng, directions, sphere_directions)
    fplus = oracle.eval_batch(x[None, :] + sigma * U)
    fminus = oracle.eval_batch(x[None, :] - sigma * U)
    g = ((fplus - fminus) / (2 * sigma)) @ U * (n / N)
    return GradientEstimate(g, "cBSG", sigma, N, 2 * N)


def one_point_gsg(oracle: NoisyOracle, x: Array, sigma: float, N: int,
                  rng: np.random.Generator, *, pedagogical: bool = False) -> GradientEstimate:
    """One-point Gaussian form g = (1/(N sigma)) sum f(x + sigma u_i) u_i.

    Not part of the supported API: its variance contains an f(x)^2/sigma^2
    term and explodes as sigma -> 0. Kept only to demonstrate that blow-up;
    call with pedagogical=True to acknowledge.
    """
    if not pedagogical:
        raise ValueError("one-point forms are pedagogical only; "
                         "pass pedagogical=True to acknowledge the sigma->0 variance blow-up")
    sigma = _check_sigma(sigma)
    x = np.asarray(x, dtype=float)
    U = gaussian_directions(x.size, N, rng).Q
    fplus = oracle.eval_batch(x[None, :] + sigma * U)
    g = (fplus / sigma) @ U / N
    return GradientEstimate(g, "GSG", sigma, N, N)


def one_point_bsg(oracle: NoisyOracle, x: Array, sigma: float, N: int,
                  rng: np.random.Generator, *, pedagogical: bool = False) -> GradientEstimate:
    """One-point sphere form g = (n/(N sigma)) sum f(x + sigma u_i) u_i.

    Same caveat as one_point_gsg.
    """
    if not pedagogical:
        raise ValueError("one-point forms are pedagogical only; "
                         "pass pedagogical=True to acknowledge the sigma->0 variance blow-up")
    sigma = _check_sigma(sigma)
    x = np.asarray(x, dtype=float)
    n = x.size
    U = sphere_directions(n, N, rng).Q
    fplus = oracle.eval_batch(x[None, :] + sigma * U)
    g = (fplus / sigma) @ U * (n / N)
    return GradientEstimate(g, "BSG", sigma, N, N)


def relative_error(g, grad_true: Array) -> float:
    """theta = ||g - grad phi(x)|| / ||grad phi(x)|| in the Euclidean norm."""
    gvec = np.asarray(getattr(g, "g", g), dtype=float)
    grad_true = np.asarray(grad_true, dtype=float)
    denom = np.linalg.norm(grad_true)
    if denom == 0.0:
        raise ZeroGradient("relative error undefined: true gradient is zero")
    return float(np.linalg.norm(gvec - grad_true) / denom)


def estimate(oracle: NoisyOracle, x: Array, config: EstimatorConfig,
             rng: np.random.Generator | None = None) -> GradientEstimate:
    """Run the configured estimator at x.

    Randomized methods draw from rng when given, else from the config seed.
    LI without a direction_source raises; drivers that want fresh random
    interpolation frames draw them explicitly (see optimizer.run_dfo).
    """
    method = config.method
    if method == "FFD":
        return ffd(oracle, x, config.sigma)
    if method == "CFD":
        return cfd(oracle, x, config.sigma)
    if method == "LI":
        if config.direction_source is None:
            raise ValueError("LI estimate requires a direction_source")
        return linear_interp(oracle, x, config.direction_source, config.sigma)
    if config.N is None:
        raise ValueError(f"{method} requires N")
    if rng is None:
        rng = RngStream(config.seed).generator()
    fn = {"GSG": gsg, "cGSG": cgsg, "BSG": bsg, "cBSG": cbsg}[method]
    return fn(oracle, x, config.sigma, config.N, rng)


def estimate_with_retry(oracle: NoisyOracle, x: Array, config: EstimatorConfig,
                        rng: np.random.Generator | None = None) -> GradientEstimate:
    """estimate() with the LI direction policy the drivers use.

    LI without a fixed direction_source draws a fresh scaled-Gaussian frame
    per call and retries once when the draw is numerically singular; the
    second singular draw propagates. Fixed frames are never resampled.
    """
    if config.method != "LI" or config.direction_source is not None:
        return estimate(oracle, x, config, rng)
    if rng is None:
        rng = RngStream(config.seed).generator()
    x = np.asarray(x, dtype=float)
    for attempt in range(2):
        frame = interpolation_directions(x.size, rng)
        try:
            return linear_interp(oracle, x, frame, config.sigma)
        except SingularDirections:
            if attempt == 1:
                raise
    raise AssertionError("unreachable")
