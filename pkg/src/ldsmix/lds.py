"""Stable LTI systems, mixtures of them, trajectory simulation, and text file formats."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateMixtureError
from .util import atomic_write_text, fmt, parse_header


def _spectral_radius(A) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(A))))


@dataclass
class StateSpace:
    """x_{t+1} = A x_t + B u_t, y_t = C x_t, scalar output, strictly stable."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.B = np.asarray(self.B, dtype=float)
        if self.B.ndim == 1:
            self.B = self.B[:, None]
        self.C = np.asarray(self.C, dtype=float).reshape(-1)
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise ValueError(f"A must be square, got shape {self.A.shape}")
        if self.B.ndim != 2 or self.B.shape[0] != n:
            raise ValueError(f"B must have {n} rows, got shape {self.B.shape}")
        if self.C.shape[0] != n:
            raise ValueError(f"C must have length {n}, got {self.C.shape[0]}")
        rho = _spectral_radius(self.A)
        if not rho < 1.0:
            raise ValueError(f"unstable system: spectral radius {rho:.6g} >= 1")

    @property
    def order(self) -> int:
        return self.A.shape[0]

    @property
    def input_dim(self) -> int:
        return self.B.shape[1]

    @property
    def radius(self) -> float:
        return _spectral_radius(self.A)


@dataclass
class MarkovVector:
    """The first L impulse-response blocks g(1), ..., g(L) stacked into length L*m."""

    L: int
    m: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(-1)
        if self.L < 1 or self.m < 1:
            raise ValueError("L and m must be >= 1")
        if self.values.shape[0] != self.L * self.m:
            raise ValueError(f"expected {self.L * self.m} entries, got {self.values.shape[0]}")

    def block(self, t: int) -> np.ndarray:
        """g(t) for 1 <= t <= L."""
        if not 1 <= t <= self.L:
            raise ValueError(f"t must be in [1, {self.L}]")
        return self.values[(t - 1) * self.m : t * self.m]


@dataclass(frozen=True)
class NoiseConfig:
    """Input scale and the two noise scales; zeros are allowed (noiseless runs)."""

    sigma_u: float = 1.0
    sigma_w1: float = 0.01
    sigma_w2: float = 0.01

    def __post_init__(self):
        for name in ("sigma_u", "sigma_w1", "sigma_w2"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be nonnegative")


@dataclass
class MixtureModel:
    """K strictly stable components with strictly positive weights summing to one."""

    weights: np.ndarray
    systems: list

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        K = self.weights.shape[0]
        if K < 1 or len(self.systems) != K:
            raise ValueError("need one system per weight")
        if np.any(self.weights <= 0.0):
            raise ValueError("mixture weights must be strictly positive")
        if abs(float(self.weights.sum()) - 1.0) > 1e-12:
            raise ValueError(f"mixture weights must sum to 1, got {self.weights.sum()!r}")
        if len({s.order for s in self.systems}) != 1 or len({s.input_dim for s in self.systems}) != 1:
            raise ValueError("all components must share state and input dimensions")

    @property
    def K(self) -> int:
        return self.weights.shape[0]

    @property
    def order(self) -> int:
        return self.systems[0].order

    @property
    def input_dim(self) -> int:
        return self.systems[0].input_dim

    def markov_matrix(self, L: int) -> np.ndarray:
        """Row k is the horizon-L Markov vector of component k, shape (K, L*m)."""
        return np.stack([impulse_response(s, L).values for s in self.systems])


@dataclass
class TrajectoryDataset:
    """N trajectories of length T: inputs (N, T, m), outputs (N, T), optional labels."""

    inputs: np.ndarray
    outputs: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=float)
        self.outputs = np.asarray(self.outputs, dtype=float)
        if self.inputs.ndim != 3:
            raise ValueError(f"inputs must be (N, T, m), got shape {self.inputs.shape}")
        if self.outputs.shape != self.inputs.shape[:2]:
            raise ValueError("outputs must be (N, T) matching inputs")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=int).reshape(-1)
            if self.labels.shape[0] != self.inputs.shape[0]:
                raise ValueError("labels must have one entry per trajectory")

    @property
    def N(self) -> int:
        return self.inputs.shape[0]

    @property
    def T(self) -> int:
        return self.inputs.shape[1]

    @property
    def m(self) -> int:
        return self.inputs.shape[2]


def random_stable_system(n: int, m: int, target_radius: float, seed=0) -> StateSpace:
    """Gaussian (A, B, C) with A rescaled so its spectral radius equals target_radius.

    Same seed, same system. A Generator may be passed instead of a seed, in
    which case its stream is advanced in place.
    """
    if n < 1 or m < 1:
        raise ValueError("n and m must be >= 1")
    if not 0.0 < target_radius < 1.0:
        raise ValueError("target_radius must lie strictly inside (0, 1)")
    rng = np.random.default_rng(seed)
    for _ in range(10):
        A = rng.normal(size=(n, n))
        rho = _spectral_radius(A)
        if rho > 0.0:
            break
    else:
        raise RuntimeError("drew a nilpotent A ten times in a row")
    A *= target_radius / rho
    B = rng.normal(size=(n, m))
    C = rng.normal(size=n)
    return StateSpace(A, B, C)


def impulse_response(ss: StateSpace, L: int) -> MarkovVector:
    """Markov parameters g(t) = C A^(t-1) B for t = 1..L, stacked."""
    if L < 1:
        raise ValueError("L must be >= 1")
    m = ss.input_dim
    vals = np.empty(L * m)
    for t in range(1, L + 1):
        vals[(t - 1) * m : t * m] = ss.C @ np.linalg.matrix_power(ss.A, t - 1) @ ss.B
    return MarkovVector(L, m, vals)


def system_energy(ss: StateSpace, tail_tol: float = 1e-12) -> float:
    """1 + sum_{t>=1} ||g(t)||^2, truncated once a geometric tail estimate drops below tail_tol.

    The per-step decay is estimated from maxima over windows of order+1 terms
    (floored at radius^2), so transient zeros, e.g. oscillators with g(t) = 0
    at every other t, cannot end the sum early.
    """
    q_floor = ss.radius ** 2
    w = ss.order + 1
    hist = []
    P = ss.B.copy()
    total = 0.0
    for t in range(1, 1_000_001):
        g = ss.C @ P
        a = float(g @ g)
        total += a
        hist.append(a)
        if len(hist) > 2 * w:
            del hist[0]
        if t >= 2 * w:
            cur = max(hist[-w:])
            prev = max(hist[-2 * w : -w])
            if cur > 0.0 and prev > 0.0:
                q = max(q_floor, (cur / prev) ** (1.0 / w))
            else:
                q = q_floor
            if q < 1.0 and cur * (w + q / (1.0 - q)) <= tail_tol:
                return 1.0 + total
        P = ss.A @ P
    raise RuntimeError("energy tail estimate did not converge within 1e6 terms")


def simulate(ss: StateSpace, inputs, process_noise=None, measurement_noise=None) -> np.ndarray:
    """Run x_{t+1} = A x_t + B (u_t + w1_t), y_{t+1} = C x_{t+1} + w2_{t+1} from x_0 = 0.

    Returns outputs with outputs[i] = y_{i+1} for i = 0..T-1.
    """
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim == 1:
        inputs = inputs[:, None]
    if inputs.shape[1] != ss.input_dim:
        raise ValueError(f"inputs must have {ss.input_dim} columns, got {inputs.shape[1]}")
    drive = inputs if process_noise is None else inputs + np.asarray(process_noise, dtype=float)
    T = inputs.shape[0]
    x = np.zeros(ss.order)
    out = np.empty(T)
    for t in range(T):
        x = ss.A @ x + ss.B @ drive[t]
        out[t] = ss.C @ x
    if measurement_noise is not None:
        out = out + np.asarray(measurement_noise, dtype=float).reshape(-1)
    return out


def rollout(ss: StateSpace, T: int, noise: NoiseConfig = NoiseConfig(), seed=0):
    """One trajectory with Gaussian inputs and noise; returns (inputs, outputs).

    Draw order is fixed (inputs, then process noise, then measurement noise),
    so a seed fully determines the trajectory.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    rng = np.random.default_rng(seed)
    m = ss.input_dim
    u = rng.normal(0.0, noise.sigma_u, size=(T, m))
    w1 = rng.normal(0.0, noise.sigma_w1, size=(T, m))
    w2 = rng.normal(0.0, noise.sigma_w2, size=T)
    return u, simulate(ss, u, w1, w2)


def sample_mixture(model: MixtureModel, N: int, seed=0) -> np.ndarray:
    """Draw N component labels according to the mixture weights."""
    if N < 1:
        raise ValueError("N must be >= 1")
    rng = np.random.default_rng(seed)
    return rng.choice(model.K, size=N, p=model.weights)


def generate_dataset(model: MixtureModel, N: int, T: int, noise: NoiseConfig = NoiseConfig(), seed: int = 0) -> TrajectoryDataset:
    """Labels from the mixture, then one independent rollout per trajectory.

    Per-trajectory streams are derived from (seed, trajectory index), so the
    result is independent of generation order.
    """
    labels = sample_mixture(model, N, np.random.SeedSequence((seed, 1)))
    m = model.input_dim
    U = np.empty((N, T, m))
    Y = np.empty((N, T))
    for i in range(N):
        u, y = rollout(model.systems[labels[i]], T, noise, np.random.SeedSequence((seed, 2, i + 1)))
        U[i] = u
        Y[i] = y
    return TrajectoryDataset(U, Y, labels)


def mixture_m2(model: MixtureModel, L: int) -> np.ndarray:
    """Population second moment sum_k p_k g_k g_k' of the horizon-L Markov vectors."""
    G = model.markov_matrix(L)
    M = G.T @ (model.weights[:, None] * G)
    return (M + M.T) / 2


def mixture_sigma_k(model: MixtureModel, L: int) -> float:
    """K-th largest eigenvalue of mixture_m2; whitening needs this positive."""
    evals = np.linalg.eigvalsh(mixture_m2(model, L))
    return float(evals[-model.K])


def random_mixture(K: int, n: int, m: int, L: int, radius_range=(0.6, 0.9), weights=None,
                   seed=0, sigma_min: float = 1e-8, max_attempts: int = 20) -> MixtureModel:
    """Random K-component mixture with per-component radii drawn from radius_range.

    Component systems are redrawn (up to max_attempts) until the K-th eigenvalue
    of the horizon-L second moment clears sigma_min, so whitening is well posed.
    Weights default to uniform.
    """
    lo, hi = float(radius_range[0]), float(radius_range[1])
    if not (0.0 < lo <= hi < 1.0):
        raise ValueError("radius_range must satisfy 0 < lo <= hi < 1")
    if K < 1:
        raise ValueError("K must be >= 1")
    w = np.full(K, 1.0 / K) if weights is None else np.asarray(weights, dtype=float)
    rng = np.random.default_rng(seed)
    last = 0.0
    for _ in range(max_attempts):
        systems = [random_stable_system(n, m, rng.uniform(lo, hi), rng) for _ in range(K)]
        model = MixtureModel(w.copy(), systems)
        last = mixture_sigma_k(model, L)
        if last > sigma_min:
            return model
    raise DegenerateMixtureError(
        f"sigma_K stayed at or below {sigma_min:g} for {max_attempts} draws (last {last:.3e})",
        sigma=last,
    )


def save_dataset(path, ds: TrajectoryDataset) -> None:
    """Write the mlds-dataset v1 text format (17 significant digits, atomic)."""
    labeled = 1 if ds.labels is not None else 0
    lines = [f"mlds-dataset v1, N={ds.N}, T={ds.T}, m={ds.m}, labeled={labeled}"]
    for i in range(ds.N):
        lab = str(int(ds.labels[i])) if labeled else "-"
        lines.append(f"traj {i} label {lab}")
        for t in range(ds.T):
            row = [fmt(v) for v in ds.inputs[i, t]]
            row.append(fmt(ds.outputs[i, t]))
            lines.append(" ".join(row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def _parse_floats(line: str, count: int, lineno: int) -> np.ndarray:
    toks = line.split()
    if len(toks) != count:
        raise ValueError(f"line {lineno}: expected {count} numbers, got {len(toks)}")
    try:
        return np.array([float(t) for t in toks])
    except ValueError:
        raise ValueError(f"line {lineno}: malformed float in {line!r}") from None


def load_dataset(path) -> TrajectoryDataset:
    """Read the mlds-dataset v1 text format; parse errors report line numbers."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ValueError("line 1: empty file")
    head = parse_header(lines[0], "mlds-dataset", ("N", "T", "m", "labeled"))
    N, T, m, labeled = head["N"], head["T"], head["m"], head["labeled"]
    if N < 1 or T < 1 or m < 1 or labeled not in (0, 1):
        raise ValueError("line 1: header values out of range")
    expected = 1 + N * (T + 1)
    if len(lines) != expected:
        raise ValueError(f"expected {expected} lines for N={N}, T={T}, got {len(lines)}")
    U = np.empty((N, T, m))
    Y = np.empty((N, T))
    labels = np.empty(N, dtype=int) if labeled else None
    pos = 1
    for i in range(N):
        toks = lines[pos].split()
        if len(toks) != 4 or toks[0] != "traj" or toks[2] != "label" or toks[1] != str(i):
            raise ValueError(f"line {pos + 1}: expected 'traj {i} label <k|->', got {lines[pos]!r}")
        if labeled:
            try:
                labels[i] = int(toks[3])
            except ValueError:
                raise ValueError(f"line {pos + 1}: labeled dataset needs an integer label") from None
        elif toks[3] != "-":
            raise ValueError(f"line {pos + 1}: unlabeled dataset must use '-' labels")
        pos += 1
        for t in range(T):
            row = _parse_floats(lines[pos], m + 1, pos + 1)
            U[i, t] = row[:m]
            Y[i, t] = row[m]
            pos += 1
    return TrajectoryDataset(U, Y, labels)


def save_mixture(path, model: MixtureModel) -> None:
    """Write the mlds-mixture v1 text format (17 significant digits, atomic)."""
    n, m = model.order, model.input_dim
    lines = [f"mlds-mixture v1, K={model.K}, n={n}, m={m}"]
    for p, s in zip(model.weights, model.systems):
        lines.append(f"weight {fmt(p)}")
        for row in s.A:
            lines.append(" ".join(fmt(v) for v in row))
        for row in s.B:
            lines.append(" ".join(fmt(v) for v in row))
        lines.append(" ".join(fmt(v) for v in s.C))
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_mixture(path) -> MixtureModel:
    """Read the mlds-mixture v1 text format; components are validated on load."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ValueError("line 1: empty file")
    head = parse_header(lines[0], "mlds-mixture", ("K", "n", "m"))
    K, n, m = head["K"], head["n"], head["m"]
    if K < 1 or n < 1 or m < 1:
        raise ValueError("line 1: header values out of range")
    per_comp = 1 + 2 * n + 1
    expected = 1 + K * per_comp
    if len(lines) != expected:
        raise ValueError(f"expected {expected} lines for K={K}, n={n}, got {len(lines)}")
    weights = np.empty(K)
    systems = []
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
        A = np.stack([_parse_floats(lines[pos + r], n, pos + r + 1) for r in range(n)])
        pos += n
        B = np.stack([_parse_floats(lines[pos + r], m, pos + r + 1) for r in range(n)])
        pos += n
        C = _parse_floats(lines[pos], n, pos + 1)
        pos += 1
        systems.append(StateSpace(A, B, C))
    return MixtureModel(weights, systems)
