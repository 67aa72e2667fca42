"""Spatial correlation of a 2D fluid-antenna array and correlated channel synthesis.

Port grid: N = n_x * n_y ports uniformly spaced over an aperture of
w_x x w_y wavelengths. Correlation between two ports is kernel(2*pi*d)
with d the port distance in wavelengths; the default kernel is the
zero-order spherical Bessel function j0(x) = sin(x)/x, with the
first-kind Bessel J0 selectable per configuration.

A channel realization for user k is h_k = sqrt(rho_k) * U * sqrt(L) * g_k
with (U, L) the eigendecomposition of the correlation matrix, rho_k the
linear path-loss gain and g_k ~ CN(0, I). Every (realization, user) pair
draws from its own counter-based Philox stream, so generation is
reproducible independent of evaluation order or thread count.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import j0 as bessel_j0_first_kind

from .errors import ConfigError, NumericError

SPEED_OF_LIGHT = 299_792_458.0

KERNELS = ("spherical_j0", "bessel_J0")
FADING_KINDS = ("rayleigh", "rician")

# Eigenvalues of the correlation matrix more negative than this fraction of
# the largest one indicate a genuinely indefinite kernel, not roundoff.
EIG_CLAMP_REL = 1e-10


def _require(cond, msg):
    if not cond:
        raise ConfigError(msg)


@dataclass(frozen=True)
class ArrayConfig:
    """2D FAS geometry: port counts, normalized aperture, carrier."""

    n_x: int
    n_y: int
    w_x: float
    w_y: float
    carrier_hz: float = 2e9
    correlation_kernel: str = "spherical_j0"

    def __post_init__(self):
        _require(int(self.n_x) == self.n_x and self.n_x >= 2, "n_x must be an integer >= 2")
        _require(int(self.n_y) == self.n_y and self.n_y >= 2, "n_y must be an integer >= 2")
        _require(self.w_x > 0 and self.w_y > 0, "apertures w_x, w_y must be > 0")
        _require(self.carrier_hz > 0, "carrier_hz must be > 0")
        _require(self.correlation_kernel in KERNELS,
                 f"correlation_kernel must be one of {KERNELS}")

    @property
    def total_ports(self) -> int:
        return self.n_x * self.n_y

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_hz

    def to_dict(self) -> dict:
        return {"n_x": self.n_x, "n_y": self.n_y, "w_x": self.w_x, "w_y": self.w_y,
                "carrier_hz": self.carrier_hz, "correlation_kernel": self.correlation_kernel}

    @classmethod
    def from_dict(cls, d: dict) -> "ArrayConfig":
        _check_keys(d, {"n_x", "n_y", "w_x", "w_y", "carrier_hz", "correlation_kernel"},
                    required={"n_x", "n_y", "w_x", "w_y"}, what="array config")
        return cls(**d)


@dataclass(frozen=True)
class ScenarioConfig:
    """Link-level scenario: users, selection size, powers, fading, seed."""

    users_k: int
    selected_n: int
    tx_power_dbm: float = 20.0
    noise_psd_dbm_hz: float = -174.0
    bandwidth_hz: float = 10e6
    distance_m: tuple = (200.0,)
    fading: str = "rayleigh"
    rician_kappa_db: float | None = None
    master_seed: int = 0

    def __post_init__(self):
        _require(int(self.users_k) == self.users_k and self.users_k >= 1,
                 "users_k must be an integer >= 1")
        _require(int(self.selected_n) == self.selected_n and self.selected_n >= self.users_k,
                 "selected_n must be an integer >= users_k")
        _require(self.bandwidth_hz > 0, "bandwidth_hz must be > 0")
        _require(self.fading in FADING_KINDS, f"fading must be one of {FADING_KINDS}")
        if self.fading == "rician":
            _require(self.rician_kappa_db is not None, "rician fading needs rician_kappa_db")
        dist = self.distance_m
        if np.isscalar(dist):
            dist = (float(dist),) * self.users_k
        else:
            dist = tuple(float(x) for x in dist)
            if len(dist) == 1:
                dist = dist * self.users_k
        _require(len(dist) == self.users_k, "distance_m must be scalar or one entry per user")
        _require(all(x > 0 for x in dist), "distances must be > 0")
        object.__setattr__(self, "distance_m", dist)
        _require(0 <= int(self.master_seed) < 2**64, "master_seed must fit in 64 bits")

    @property
    def power_mw(self) -> float:
        return 10.0 ** (self.tx_power_dbm / 10.0)

    @property
    def noise_mw(self) -> float:
        return 10.0 ** ((self.noise_psd_dbm_hz + 10.0 * np.log10(self.bandwidth_hz)) / 10.0)

    def to_dict(self) -> dict:
        d = {"users_k": self.users_k, "selected_n": self.selected_n,
             "tx_power_dbm": self.tx_power_dbm, "noise_psd_dbm_hz": self.noise_psd_dbm_hz,
             "bandwidth_hz": self.bandwidth_hz, "distance_m": list(self.distance_m),
             "fading": self.fading, "master_seed": self.master_seed}
        if self.fading == "rician":
            d["rician_kappa_db"] = self.rician_kappa_db
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        _check_keys(d, {"users_k", "selected_n", "tx_power_dbm", "noise_psd_dbm_hz",
                        "bandwidth_hz", "distance_m", "fading", "rician_kappa_db",
                        "master_seed"},
                    required={"users_k", "selected_n"}, what="scenario config")
        d = dict(d)
        if isinstance(d.get("distance_m"), list):
            d["distance_m"] = tuple(d["distance_m"])
        return cls(**d)


def _check_keys(d, allowed, required, what):
    if not isinstance(d, dict):
        raise ConfigError(f"{what} must be a JSON object")
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {what}: {sorted(unknown)}")
    missing = required - set(d)
    if missing:
        raise ConfigError(f"missing keys in {what}: {sorted(missing)}")


@dataclass(frozen=True)
class CorrelationModel:
    """Correlation matrix J with its clamped eigendecomposition J = U L U^T."""

    matrix_j: np.ndarray
    eigvecs_u: np.ndarray
    eigvals_lambda: np.ndarray

    @property
    def coloring(self) -> np.ndarray:
        """U * sqrt(L): maps white CN(0, I) vectors onto correlated ones."""
        return self.eigvecs_u * np.sqrt(self.eigvals_lambda)[None, :]


@dataclass(frozen=True)
class ChannelBatch:
    """B correlated N x K channel realizations plus their generating configs."""

    realizations: np.ndarray  # (B, N, K) complex128
    scenario: ScenarioConfig
    array: ArrayConfig

    @property
    def batch_size(self) -> int:
        return self.realizations.shape[0]

    @property
    def num_ports(self) -> int:
        return self.realizations.shape[1]


def map_port(n_x_coord: int, n_y_coord: int, n_x_total: int) -> int:
    """1-based 2D grid coordinate -> 1-based linear port index."""
    if not (1 <= n_x_coord <= n_x_total):
        raise ConfigError(f"x coordinate {n_x_coord} outside [1, {n_x_total}]")
    if n_y_coord < 1:
        raise ConfigError(f"y coordinate {n_y_coord} must be >= 1")
    return (n_y_coord - 1) * n_x_total + n_x_coord


def port_distance(a, b, cfg: ArrayConfig) -> float:
    """Distance between two ports in wavelengths; coordinates are 0-based (nx, ny)."""
    ax, ay = a
    bx, by = b
    for x, y in ((ax, ay), (bx, by)):
        if not (0 <= x < cfg.n_x and 0 <= y < cfg.n_y):
            raise ConfigError(f"coordinate ({x}, {y}) outside the {cfg.n_x}x{cfg.n_y} grid")
    dx = abs(ax - bx) / (cfg.n_x - 1) * cfg.w_x
    dy = abs(ay - by) / (cfg.n_y - 1) * cfg.w_y
    return float(np.hypot(dx, dy))


def _kernel(x: np.ndarray, kind: str) -> np.ndarray:
    if kind == "spherical_j0":
        # sin(x)/x with the removable singularity at 0; np.sinc is sin(pi t)/(pi t)
        return np.sinc(np.asarray(x) / np.pi)
    if kind == "bessel_J0":
        return bessel_j0_first_kind(x)
    raise ConfigError(f"unknown kernel {kind!r}")


def correlation(a, b, cfg: ArrayConfig) -> float:
    """Spatial correlation between two ports, kernel(2*pi*d) with d in wavelengths."""
    return float(_kernel(2.0 * np.pi * port_distance(a, b, cfg), cfg.correlation_kernel))


def build_correlation(cfg: ArrayConfig) -> CorrelationModel:
    """Correlation matrix over all N ports (Eq.-style row-major port order)."""
    n = cfg.total_ports
    idx = np.arange(n)
    gx = idx % cfg.n_x
    gy = idx // cfg.n_x
    dx = np.abs(gx[:, None] - gx[None, :]) / (cfg.n_x - 1) * cfg.w_x
    dy = np.abs(gy[:, None] - gy[None, :]) / (cfg.n_y - 1) * cfg.w_y
    dist = np.hypot(dx, dy)
    matrix = _kernel(2.0 * np.pi * dist, cfg.correlation_kernel)
    matrix = 0.5 * (matrix + matrix.T)  # exact symmetry against fp noise
    np.fill_diagonal(matrix, 1.0)
    try:
        vals, vecs = np.linalg.eigh(matrix)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigendecomposition failed for {cfg}") from exc
    order = np.argsort(vals)[::-1]
    vals = vals[order]
    vecs = vecs[:, order]
    lam_max = float(vals[0]) if vals.size else 0.0
    if lam_max > 0 and vals.min() < -EIG_CLAMP_REL * lam_max * 100:
        raise NumericError(
            f"correlation matrix far from PSD (min eig {vals.min():.3e}) for {cfg}")
    vals = np.clip(vals, 0.0, None)
    return CorrelationModel(matrix_j=matrix, eigvecs_u=vecs, eigvals_lambda=vals)


def path_loss_db(distance_m: float) -> float:
    """Urban macro large-scale loss in dB at the given distance in meters."""
    if distance_m <= 0:
        raise ConfigError(f"distance must be > 0, got {distance_m}")
    return 128.1 + 37.6 * np.log10(distance_m / 1000.0)


def path_loss_gain(distance_m: float) -> float:
    """Linear power gain 10^(-loss/10)."""
    return 10.0 ** (-path_loss_db(distance_m) / 10.0)


def _user_stream(master_seed: int, realization: int, user: int) -> np.random.Generator:
    # Counter-based key: order-independent streams per (seed, realization, user).
    key = np.array([master_seed, (np.uint64(realization) << np.uint64(20)) | np.uint64(user)],
                   dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _small_scale(rng: np.random.Generator, n: int, scen: ScenarioConfig) -> np.ndarray:
    x = rng.standard_normal(2 * n)
    g = (x[:n] + 1j * x[n:]) * np.sqrt(0.5)
    if scen.fading == "rician":
        kappa = 10.0 ** (scen.rician_kappa_db / 10.0)
        los = np.ones(n, dtype=complex)
        g = np.sqrt(kappa / (1.0 + kappa)) * los + np.sqrt(1.0 / (1.0 + kappa)) * g
    return g


def generate_batch(cfg: ArrayConfig, scen: ScenarioConfig, batch_size: int,
                   threads: int = 1) -> ChannelBatch:
    """B reproducible correlated channel realizations, shape (B, N, K)."""
    if batch_size < 1:
        raise ConfigError("batch_size must be >= 1")
    if scen.selected_n > cfg.total_ports:
        raise ConfigError(
            f"selected_n={scen.selected_n} exceeds total ports N={cfg.total_ports}")
    corr = build_correlation(cfg)
    color = corr.coloring
    n = cfg.total_ports
    k_users = scen.users_k
    amp = np.sqrt([path_loss_gain(d) for d in scen.distance_m])

    def one(b: int) -> np.ndarray:
        h = np.empty((n, k_users), dtype=complex)
        for k in range(k_users):
            g = _small_scale(_user_stream(scen.master_seed, b, k), n, scen)
            h[:, k] = amp[k] * (color @ g)
        return h

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, range(batch_size)))
    else:
        rows = [one(b) for b in range(batch_size)]
    data = np.stack(rows, axis=0)
    if not np.all(np.isfinite(data.view(float))):
        raise NumericError("non-finite channel entries generated")
    return ChannelBatch(realizations=data, scenario=scen, array=cfg)
