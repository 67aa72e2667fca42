"""Max-min SINR balancing for a fixed port selection.

Downlink model (per user k, selected channel h_k, beams w_j, noise s2):
    sinr_k = |h_k^T w_k|^2 / (sum_{j!=k} |h_k^T w_j|^2 + s2)
The solver maximizes min_k sinr_k under sum_k ||w_k||^2 <= P via
uplink-downlink duality: alternate MMSE uplink receive directions with the
Perron eigenpair of the (K+1)x(K+1) extended coupling matrix, whose
dominant eigenvalue is the reciprocal of the balanced SINR. Downlink
powers come from the transposed-coupling eigenproblem, which equalizes all
user SINRs and spends exactly P at machine precision.

Internally the conjugated channel is used so every inner product is a
plain Hermitian form; returned beams satisfy the transposed-channel SINR
definition above.
"""

import threading
from dataclasses import dataclass

import numpy as np

from .channel import ChannelBatch
from .errors import ConfigError, ConvergenceError, NumericError

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 200
POWER_ITER_TOL = 1e-12
POWER_ITER_CAP = 10_000


@dataclass(frozen=True)
class EffectiveChannel:
    """Channel rows restricted to the selected ports, plus the power budget."""

    h_sel: np.ndarray  # (n, K) complex
    power_mw: float
    noise_mw: float

    def __post_init__(self):
        h = np.asarray(self.h_sel, dtype=complex)
        if h.ndim != 2:
            raise ConfigError("h_sel must be a 2D (ports x users) array")
        n, k = h.shape
        if n < k:
            raise ConfigError(f"need at least as many ports as users, got n={n} < K={k}")
        if not np.all(np.isfinite(h.view(float))):
            raise ConfigError("h_sel contains non-finite entries")
        if not (self.power_mw > 0 and self.noise_mw > 0):
            raise ConfigError("power_mw and noise_mw must be > 0")
        object.__setattr__(self, "h_sel", h)

    @property
    def num_ports(self) -> int:
        return self.h_sel.shape[0]

    @property
    def num_users(self) -> int:
        return self.h_sel.shape[1]


@dataclass(frozen=True)
class BeamformingSolution:
    beams_w: np.ndarray       # (n, K), column k serves user k
    user_sinrs: np.ndarray    # (K,) recomputed from beams_w
    gamma: float              # balanced SINR
    iterations: int
    degenerate: bool = False


def _perron(x: np.ndarray, v0=None, tol=POWER_ITER_TOL, cap=POWER_ITER_CAP,
            restarts=3):
    """Dominant eigenpair of a nonnegative matrix by power iteration.

    Restarts from a fresh positive vector if the iteration stalls; the
    extended coupling matrix is primitive for generic channels, so the
    Perron root is simple and this converges.
    """
    m = x.shape[0]
    if v0 is None or v0.min() <= 0 or not np.all(np.isfinite(v0)):
        v = np.full(m, 1.0 / m)
    else:
        v = v0 / v0.sum()
    for attempt in range(restarts):
        for _ in range(cap):
            w = x @ v
            s = float(w.sum())
            if not np.isfinite(s) or s <= 0.0:
                raise NumericError("power iteration left the positive cone")
            w /= s
            if np.max(np.abs(w - v)) < tol:
                return s, w
            v = w
        v = np.full(m, 1.0 / m) + 1e-3 * np.arange(m)  # deterministic restart
        v /= v.sum()
    raise NumericError(f"power iteration failed to converge within {cap} steps")


def _coupling_matrix(a: np.ndarray, inv_direct: np.ndarray, noise_mw: float,
                     power_mw: float, transpose: bool) -> np.ndarray:
    """Extended (K+1)x(K+1) coupling matrix from the cross-gain table a."""
    k = a.shape[0]
    psi = a.T.copy() if transpose else a.copy()
    np.fill_diagonal(psi, 0.0)
    x = np.empty((k + 1, k + 1))
    x[:k, :k] = inv_direct[:, None] * psi
    x[:k, k] = inv_direct * noise_mw
    x[k, :] = x[:k, :].sum(axis=0) / power_mw
    return x


def _degenerate(ch: EffectiveChannel, iterations: int) -> BeamformingSolution:
    n, k = ch.h_sel.shape
    return BeamformingSolution(
        beams_w=np.zeros((n, k), dtype=complex),
        user_sinrs=np.zeros(k),
        gamma=0.0,
        iterations=iterations,
        degenerate=True)


def _finalize(ch: EffectiveChannel, u: np.ndarray, a: np.ndarray,
              inv_direct: np.ndarray, v_warm, iterations: int) -> BeamformingSolution:
    x_dl = _coupling_matrix(a, inv_direct, ch.noise_mw, ch.power_mw, transpose=True)
    lam, vec = _perron(x_dl, v_warm)
    if vec[-1] <= 0:
        raise NumericError("downlink eigenvector has nonpositive slack entry")
    p = vec[:-1] / vec[-1]
    if np.any(p < 0):
        raise NumericError("negative downlink power")
    w = u * np.sqrt(p)[None, :]
    gamma = 1.0 / lam
    z = np.abs(ch.h_sel.T @ w) ** 2
    diag = np.diag(z)
    sinrs = diag / (z.sum(axis=1) - diag + ch.noise_mw)
    return BeamformingSolution(beams_w=w, user_sinrs=sinrs, gamma=float(gamma),
                               iterations=iterations)


def balance(ch: EffectiveChannel, tol: float = DEFAULT_TOL,
            max_iter: int = DEFAULT_MAX_ITER) -> BeamformingSolution:
    """Balanced max-min SINR beamforming under the total power constraint."""
    if tol <= 0 or max_iter < 1:
        raise ConfigError("tol must be > 0 and max_iter >= 1")
    c = np.conj(ch.h_sel)  # (n, K); Hermitian-form convention
    n, k = c.shape
    if np.min(np.sum(np.abs(c) ** 2, axis=0)) == 0.0:
        return _degenerate(ch, 0)
    q = np.full(k, ch.power_mw / k)
    eye = np.eye(n)
    gamma_prev = None
    v_warm = None
    for it in range(1, max_iter + 1):
        t = ch.noise_mw * eye + (c * q) @ c.conj().T
        try:
            u = np.linalg.solve(t, c)
        except np.linalg.LinAlgError as exc:
            raise NumericError("uplink covariance solve failed") from exc
        u /= np.linalg.norm(u, axis=0)[None, :]
        a = np.abs(u.conj().T @ c) ** 2  # a[k, j] = |u_k^H c_j|^2
        direct = np.diag(a).copy()
        if np.min(direct) <= 0.0:
            return _degenerate(ch, it)
        inv_direct = 1.0 / direct
        x_ul = _coupling_matrix(a, inv_direct, ch.noise_mw, ch.power_mw, transpose=False)
        lam, vec = _perron(x_ul, v_warm)
        v_warm = vec
        if vec[-1] <= 0:
            raise NumericError("uplink eigenvector has nonpositive slack entry")
        q = vec[:-1] / vec[-1]
        gamma = 1.0 / lam
        if gamma_prev is not None and abs(gamma - gamma_prev) / gamma < tol:
            return _finalize(ch, u, a, inv_direct, v_warm, it)
        gamma_prev = gamma
    best = _finalize(ch, u, a, inv_direct, v_warm, max_iter)
    raise ConvergenceError(
        f"balancing did not reach tol={tol} within {max_iter} iterations", solution=best)


class Evaluator:
    """Memoized gamma(selection) evaluation over one channel batch.

    eval_count counts actual solves (cache hits excluded), mirroring the
    per-evaluation cost model used for budget comparisons. One instance
    per algorithm run keeps the accounting honest.
    """

    def __init__(self, batch: ChannelBatch, tol: float = DEFAULT_TOL,
                 max_iter: int = DEFAULT_MAX_ITER, record_trace: bool = False):
        self.batch = batch
        self.power_mw = batch.scenario.power_mw
        self.noise_mw = batch.scenario.noise_mw
        self.tol = tol
        self.max_iter = max_iter
        self.eval_count = 0
        self.trace: list | None = [] if record_trace else None
        self._cache: dict = {}
        self._lock = threading.Lock()

    @property
    def num_ports(self) -> int:
        return self.batch.num_ports

    @property
    def selected_n(self) -> int:
        return self.batch.scenario.selected_n

    def _validated_key(self, realization: int, ports) -> tuple:
        ports = [int(p) for p in ports]
        n = self.selected_n
        if len(ports) != n:
            raise ConfigError(f"selection must have exactly {n} ports, got {len(ports)}")
        if len(set(ports)) != n:
            raise ConfigError(f"selection has repeated ports: {ports}")
        if min(ports) < 0 or max(ports) >= self.num_ports:
            raise ConfigError(f"port index outside [0, {self.num_ports - 1}]: {ports}")
        if not (0 <= realization < self.batch.batch_size):
            raise ConfigError(f"realization {realization} outside batch of "
                              f"{self.batch.batch_size}")
        return (realization, tuple(sorted(ports)))

    def evaluate_selection(self, realization: int, ports) -> float:
        """Balanced SINR for the given selection; memoized on the sorted tuple."""
        key = self._validated_key(realization, ports)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        h_sel = self.batch.realizations[key[0]][list(key[1]), :]
        sol = balance(EffectiveChannel(h_sel, self.power_mw, self.noise_mw),
                      self.tol, self.max_iter)
        gamma = sol.gamma
        with self._lock:
            self._cache[key] = gamma
            self.eval_count += 1
            if self.trace is not None:
                self.trace.append(gamma)
        return gamma
