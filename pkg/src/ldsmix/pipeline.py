"""Lag stacking from trajectories to regression samples, the end-to-end fit, and realization."""

from __future__ import annotations

import warnings as _warnings
from dataclasses import dataclass, replace

import numpy as np

from .errors import InsufficientLengthError
from .lds import MarkovVector, StateSpace, TrajectoryDataset
from .mlr import MixtureEstimate, RegressionDataset, mlr_fit, refine_first_moment
from .util import atomic_write_text, fmt, parse_header


def stack_times(T: int, L: int) -> np.ndarray:
    """Subsampled times t = L, 2L, ..., floor(T/L)*L; leftover steps are discarded."""
    if L < 1:
        raise ValueError("L must be >= 1")
    if T < L:
        raise InsufficientLengthError(f"trajectory length T={T} is shorter than the horizon L={L}")
    return np.arange(L, T + 1, L)


def _window_rows(inputs, L, times):
    # row for time t is (u_{t-1}, u_{t-2}, ..., u_{t-L}) flattened
    m = inputs.shape[1]
    rows = np.empty((times.shape[0], L * m))
    for j in range(L):
        rows[:, j * m : (j + 1) * m] = inputs[times - 1 - j]
    return rows


def stack_inputs(inputs, L: int):
    """Non-overlapping lag windows of one trajectory's inputs.

    Returns (times, covariates): covariates[s] = (u_{t-1}, ..., u_{t-L}) for
    t = times[s], so consecutive rows touch disjoint stretches of the input.
    """
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim == 1:
        inputs = inputs[:, None]
    times = stack_times(inputs.shape[0], L)
    return times, _window_rows(inputs, L, times)


@dataclass
class StackedRegression:
    """Pooled regression samples plus their (trajectory, time) provenance."""

    data: RegressionDataset
    traj_index: np.ndarray
    times: np.ndarray


def build_stacked(dataset: TrajectoryDataset, L: int, sigma_u: float = 1.0, partition=None) -> StackedRegression:
    """Stack every trajectory at the subsampled times; covariates are scaled by 1/sigma_u.

    partition is an optional pair of trajectory index arrays (M2 half, M3
    half); the default pits the first ceil(N/2) trajectories against the rest.
    """
    if sigma_u <= 0.0:
        raise ValueError("sigma_u must be positive")
    N, T, m = dataset.inputs.shape
    times = stack_times(T, L)
    S = times.shape[0]
    X = np.empty((N * S, L * m))
    yv = np.empty(N * S)
    for i in range(N):
        X[i * S : (i + 1) * S] = _window_rows(dataset.inputs[i], L, times)
        yv[i * S : (i + 1) * S] = dataset.outputs[i, times - 1]
    X /= sigma_u
    traj_index = np.repeat(np.arange(N), S)
    if partition is None:
        cut = (N + 1) // 2
        p2, p3 = np.arange(cut), np.arange(cut, N)
    else:
        p2 = np.asarray(partition[0], dtype=np.intp).reshape(-1)
        p3 = np.asarray(partition[1], dtype=np.intp).reshape(-1)
        both = np.concatenate([p2, p3])
        if (both.size != N or np.unique(both).size != N
                or (both.size and (both.min() < 0 or both.max() >= N))):
            raise ValueError("partition must split range(N) into two disjoint halves")
    idx2 = np.nonzero(np.isin(traj_index, p2))[0]
    idx3 = np.nonzero(np.isin(traj_index, p3))[0]
    data = RegressionDataset(X, yv, idx2, idx3)
    return StackedRegression(data, traj_index, np.tile(times, N))


def _fit(dataset, L, K, sigma_u, partition, n_restarts, n_iters, seed, threshold, refine):
    if K < 1:
        raise ValueError("K must be >= 1")
    sr = build_stacked(dataset, L, sigma_u, partition)
    if K > sr.data.dim:
        raise ValueError(f"K={K} exceeds the covariate dimension L*m={sr.data.dim}")
    est = mlr_fit(sr.data, K, n_restarts=n_restarts, n_iters=n_iters, seed=seed, threshold=threshold)
    if refine:
        est = refine_first_moment(est, sr.data)
    return replace(est, coeffs=est.coeffs / sigma_u)


def mlds_fit(dataset: TrajectoryDataset, L: int, K: int, sigma_u: float = 1.0, partition=None,
             n_restarts=None, n_iters: int = 100, seed: int = 0, threshold: float = 1e-10) -> MixtureEstimate:
    """Estimate K horizon-L Markov vectors and mixture weights from unlabeled trajectories."""
    return _fit(dataset, L, K, sigma_u, partition, n_restarts, n_iters, seed, threshold, refine=False)


def mlds_fit_refined(dataset: TrajectoryDataset, L: int, K: int, sigma_u: float = 1.0, partition=None,
                     n_restarts=None, n_iters: int = 100, seed: int = 0, threshold: float = 1e-10) -> MixtureEstimate:
    """mlds_fit followed by the first-moment weight refinement (coefficients unchanged)."""
    return _fit(dataset, L, K, sigma_u, partition, n_restarts, n_iters, seed, threshold, refine=True)


def ols_markov(inputs, outputs, L: int) -> MarkovVector:
    """Per-trajectory least squares over every time t in [L, T] (overlapping windows).

    With fewer rows than L*m unknowns the problem is rank deficient; a warning
    is emitted and the minimum-norm solution returned.
    """
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim == 1:
        inputs = inputs[:, None]
    outputs = np.asarray(outputs, dtype=float).reshape(-1)
    T, m = inputs.shape
    if outputs.shape[0] != T:
        raise ValueError("inputs and outputs must cover the same T steps")
    if T < L:
        raise InsufficientLengthError(f"trajectory length T={T} is shorter than the horizon L={L}")
    times = np.arange(L, T + 1)
    A = _window_rows(inputs, L, times)
    b = outputs[times - 1]
    if times.shape[0] < L * m:
        _warnings.warn("ols_markov: fewer rows than unknowns; returning the minimum-norm solution",
                       RuntimeWarning, stacklevel=2)
    g, *_ = np.linalg.lstsq(A, b, rcond=None)
    return MarkovVector(L, m, g)


def ho_kalman(g: MarkovVector, n: int) -> StateSpace:
    """Balanced realization of order n from the first L Markov parameters.

    Layout: the Hankel has blocks H[i, j] = g(i + j + 1) for 0-based (i, j)
    with n1 = n2 = floor(L/2), so it starts at g(1) and the shifted Hankel at
    g(2); C B then reproduces g(1) by construction. When the numerical rank r
    of the Hankel falls below n (over-parameterized request), the realization
    is computed at rank r and zero-padded to order n, which keeps it stable
    and exact instead of amplifying null directions through pseudo-inverses.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    L, m = g.L, g.m
    if L < 2 * n + 1:
        raise InsufficientLengthError(f"need L >= 2n+1 = {2 * n + 1} Markov parameters for order n={n}, got L={L}")
    n1 = L // 2
    H = np.empty((n1, n1 * m))
    Hs = np.empty((n1, n1 * m))
    for i in range(n1):
        for j in range(n1):
            H[i, j * m : (j + 1) * m] = g.block(i + j + 1)
            Hs[i, j * m : (j + 1) * m] = g.block(i + j + 2)
    U, s, Vt = np.linalg.svd(H, full_matrices=False)
    if s.shape[0] > n and s[n] > 0.1 * s[n - 1]:
        _warnings.warn(f"ho_kalman: sigma_{n + 1} = {s[n]:.3e} exceeds 0.1 * sigma_{n} = {0.1 * s[n - 1]:.3e}; "
                       "the data suggests a higher order", RuntimeWarning, stacklevel=2)
    tol = 1e-10 * s[0] if s[0] > 0.0 else 0.0
    r = int(np.sum(s[:n] > tol))
    if r < n:
        _warnings.warn(f"ho_kalman: Hankel numerical rank {r} is below the requested order {n}",
                       RuntimeWarning, stacklevel=2)
    A = np.zeros((n, n))
    B = np.zeros((n, m))
    C = np.zeros(n)
    if r > 0:
        root = np.sqrt(s[:r])
        Ur = U[:, :r]
        Vr = Vt[:r]
        C[:r] = Ur[0] * root
        B[:r] = (root[:, None] * Vr)[:, :m]
        A[:r, :r] = (Ur.T @ Hs @ Vr.T) / np.outer(root, root)
    return StateSpace(A, B, C)


def estimate_text(est: MixtureEstimate, L: int, m: int) -> str:
    """Render the mlds-estimate v1 text format."""
    if est.dim != L * m:
        raise ValueError(f"coefficient length {est.dim} does not match L*m = {L * m}")
    lines = [f"mlds-estimate v1, K={est.K}, L={L}, m={m}"]
    for k in range(est.K):
        lines.append(f"weight {fmt(est.weights[k])}")
        vec = est.coeffs[k]
        for t in range(L):
            lines.append(" ".join(fmt(v) for v in vec[t * m : (t + 1) * m]))
    return "\n".join(lines) + "\n"


def save_estimate(path, est: MixtureEstimate, L: int, m: int) -> None:
    """Write the mlds-estimate v1 text format (17 significant digits, atomic)."""
    atomic_write_text(path, estimate_text(est, L, m))


def load_estimate(path):
    """Read the mlds-estimate v1 format; returns (MixtureEstimate, L, m).

    Lines after the K components (e.g. appended realizations) are ignored.
    """
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ValueError("line 1: empty file")
    head = parse_header(lines[0], "mlds-estimate", ("K", "L", "m"))
    K, L, m = head["K"], head["L"], head["m"]
    if K < 1 or L < 1 or m < 1:
        raise ValueError("line 1: header values out of range")
    needed = 1 + K * (1 + L)
    if len(lines) < needed:
        raise ValueError(f"expected at least {needed} lines for K={K}, L={L}, got {len(lines)}")
    weights = np.empty(K)
    coeffs = np.empty((K, L * m))
    pos = 1
    for k in range(K):
        toks = lines[pos].split()
        if len(toks) != 2 or toks[0] != "weight":
            raise ValueError(f"line {pos + 1}: expected 'weight <p>', got {lines[pos]!r}")
        try:
            weights[k] = float(toks[1])
        except ValueError:
            raise ValueError(f"line {pos + 1}: malformed weight {toks[1]!r}") from None
        pos += 1
        for t in range(L):
            toks = lines[pos].split()
            if len(toks) != m:
                raise ValueError(f"line {pos + 1}: expected {m} numbers, got {len(toks)}")
            try:
                coeffs[k, t * m : (t + 1) * m] = [float(v) for v in toks]
            except ValueError:
                raise ValueError(f"line {pos + 1}: malformed float in {lines[pos]!r}") from None
            pos += 1
    return MixtureEstimate(weights, coeffs), L, m
