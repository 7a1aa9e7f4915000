"""Direction sampling and Monte Carlo moment utilities.

Direction sets feed the estimators: coordinate axes, random orthonormal
frames, raw Gaussian rows, rows uniform on the unit sphere, and max-norm
scaled Gaussian rows for interpolation. monte_carlo_moment estimates matrices
of the form E[w(u) u u^T], which is what the variance analysis of the
smoothing estimators reduces to.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

Array = np.ndarray

# Orthogonality / unit-norm tolerances promised by the generators.
ORTHO_TOL = 1e-12
# Residual norm below RANK_TOL * original norm means the Gaussian draw was
# numerically dependent on the rows already accepted; redraw it.
RANK_TOL = 1e-8

__all__ = [
    "Array",
    "DirectionSet",
    "RngStream",
    "coordinate_directions",
    "gaussian_directions",
    "sphere_directions",
    "orthonormal_directions",
    "interpolation_directions",
    "monte_carlo_moment",
]


@dataclass(frozen=True)
class RngStream:
    """Counter-based random stream with addressable substreams.

    Wraps numpy's Philox bit generator, a counter-based generator whose
    output for a given key is identical across platforms. Substreams are
    derived through SeedSequence([seed, *indices]), so trial k of cell j in
    a sweep is reproducible in isolation from (seed, j, k) with no state.
    """

    seed: int

    def __post_init__(self) -> None:
        if self.seed < 0:
            raise ValueError("seed must be a nonnegative integer")

    def generator(self, *indices: int) -> np.random.Generator:
        """Independent generator for the substream keyed by indices."""
        ss = np.random.SeedSequence([self.seed, *indices])
        return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class DirectionSet:
    """N direction vectors stored as the rows of Q (N x n)."""

    n: int
    N: int
    Q: Array
    scheme: str  # coordinate | orthonormal | general_interp | gaussian | sphere
    max_row_norm: float

    def __post_init__(self) -> None:
        if self.Q.shape != (self.N, self.n):
            raise ValueError(f"Q has shape {self.Q.shape}, expected ({self.N}, {self.n})")


def _direction_set(Q: Array, scheme: str) -> DirectionSet:
    N, n = Q.shape
    return DirectionSet(n=n, N=N, Q=Q, scheme=scheme,
                        max_row_norm=float(np.max(np.linalg.norm(Q, axis=1))))


def coordinate_directions(n: int) -> DirectionSet:
    """The n coordinate axes; the identity as a direction matrix."""
    return _direction_set(np.eye(n), "coordinate")


def gaussian_directions(n: int, N: int, rng: np.random.Generator) -> DirectionSet:
    """N iid standard normal rows in R^n."""
    if n < 1 or N < 1:
        raise ValueError("n and N must be positive")
    return _direction_set(rng.standard_normal((N, n)), "gaussian")


def sphere_directions(n: int, N: int, rng: np.random.Generator) -> DirectionSet:
    """N rows uniform on the unit sphere (normalized Gaussian draws)."""
    if n < 1 or N < 1:
        raise ValueError("n and N must be positive")
    Q = rng.standard_normal((N, n))
    norms = np.linalg.norm(Q, axis=1)
    # A zero draw has probability zero; redraw to keep the normalization sound.
    while np.any(norms == 0.0):
        bad = norms == 0.0
        Q[bad] = rng.standard_normal((int(bad.sum()), n))
        norms = np.linalg.norm(Q, axis=1)
    return _direction_set(Q / norms[:, None], "sphere")


def orthonormal_directions(n: int, rng: np.random.Generator) -> DirectionSet:
    """Random n x n orthonormal matrix, Haar distributed.

    Modified Gram-Schmidt on iid Gaussian rows with one reorthogonalization
    pass. Row signs are left exactly as produced; forcing a sign convention
    would break the Haar property. A row whose residual collapses below
    RANK_TOL of its original norm is redrawn.
    """
    if n < 1:
        raise ValueError("n must be positive")
    Q = np.empty((n, n))
    for i in range(n):
        while True:
            v = rng.standard_normal(n)
            scale = np.linalg.norm(v)
            for _ in range(2):
                for j in range(i):
                    v = v - (Q[j] @ v) * Q[j]
            residual = np.linalg.norm(v)
            if residual > RANK_TOL * scale and residual > 0.0:
                break
        Q[i] = v / residual
    return _direction_set(Q, "orthonormal")


def interpolation_directions(n: int, rng: np.random.Generator) -> DirectionSet:
    """Square Gaussian direction set scaled so the largest row has norm 1.

    This is the max-norm normalization u_i <- u_i / max_j ||u_j|| used for
    randomized interpolation directions; it keeps max_row_norm <= 1 while
    preserving the shape (and hence conditioning) of the raw Gaussian frame.
    """
    Q = rng.standard_normal((n, n))
    scale = np.max(np.linalg.norm(Q, axis=1))
    while scale == 0.0:  # pragma: no cover - probability zero
        Q = rng.standard_normal((n, n))
        scale = np.max(np.linalg.norm(Q, axis=1))
    return _direction_set(Q / scale, "general_interp")


# Chunk size for Monte Carlo accumulation; bounds the working set to a few
# tens of MB even at n = 20.
_MC_CHUNK = 1 << 16


def monte_carlo_moment(
    dist: str,
    functional: str,
    n: int,
    K: int,
    rng: np.random.Generator,
    *,
    a: Array | None = None,
    k: int | None = None,
    with_stderr: bool = False,
):
    """Sample mean of w(u) u u^T over K draws of u.

    Args:
        dist: "gaussian" (u ~ N(0, I)) or "sphere" (u uniform on the unit
            sphere).
        functional: which weight w(u) to apply:
            "quad_outer": w = (a.u)^2
            "odd_outer":  w = (a.u) * ||u||^k
            "norm_outer": w = ||u||^k
        n: dimension.
        K: number of draws.
        rng: generator for the draws.
        a: direction vector, required by quad_outer and odd_outer.
        k: norm power, required by odd_outer and norm_outer.
        with_stderr: when True also return the entrywise standard error of
            the mean, estimated from the same sample.

    Returns:
        The n x n sample mean matrix, or (mean, stderr) when with_stderr.
    """
    if K < 1:
        raise ValueError("K must be positive")
    if dist not in ("gaussian", "sphere"):
        raise ValueError(f"unknown distribution {dist!r}")
    if functional in ("quad_outer", "odd_outer") and a is None:
        raise ValueError(f"{functional} requires the vector a")
    if functional in ("odd_outer", "norm_outer") and k is None:
        raise ValueError(f"{functional} requires the power k")
    if functional not in ("quad_outer", "odd_outer", "norm_outer"):
        raise ValueError(f"unknown functional {functional!r}")

    s1 = np.zeros((n, n))
    s2 = np.zeros((n, n))
    done = 0
    while done < K:
        m = min(_MC_CHUNK, K - done)
        U = rng.standard_normal((m, n))
        if dist == "sphere":
            norms = np.linalg.norm(U, axis=1)
            while np.any(norms == 0.0):
                bad = norms == 0.0
                U[bad] = rng.standard_normal((int(bad.sum()), n))
                norms = np.linalg.norm(U, axis=1)
            U /= norms[:, None]
        if functional == "quad_outer":
            w = (U @ a) ** 2
        elif functional == "odd_outer":
            w = (U @ a) * np.linalg.norm(U, axis=1) ** k
        else:
            w = np.linalg.norm(U, axis=1) ** k
        s1 += np.einsum("i,ij,ik->jk", w, U, U)
        if with_stderr:
            U2 = U * U
            s2 += np.einsum("i,ij,ik->jk", w * w, U2, U2)
        done += m

    mean = s1 / K
    if not with_stderr:
        return mean
    if K > 1:
        var = (s2 / K - mean**2) * (K / (K - 1))
        stderr = np.sqrt(np.maximum(var, 0.0) / K)
    else:
        stderr = np.full((n, n), np.inf)
    return mean, stderr
