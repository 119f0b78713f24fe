"""Uniform linear array simulation.

Measurements follow ``Y = (I + diag(gamma)) A S + N`` where ``A`` holds the ULA
steering vectors, ``S`` the source signals and ``gamma`` a sparse vector of
per-sensor gain/phase errors.  Steering convention (shared with :mod:`doa`)::

    a_m(theta) = exp(-j 2 pi d m sin(theta)),   m = 0..M-1,

with ``d`` the spacing in wavelengths.
"""

import dataclasses
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._validation import DomainError


class ConfigError(ValueError):
    """Raised for an inconsistent :class:`ArrayConfig`."""


def steering_vector(theta_deg, M, spacing_wavelengths=0.5):
    """ULA response to a unit plane wave from ``theta_deg`` (broadside = 0)."""
    return steering_matrix([theta_deg], M, spacing_wavelengths)[:, 0]


def steering_matrix(thetas_deg, M, spacing_wavelengths=0.5):
    """Stack steering vectors for several angles as columns, shape (M, len(thetas))."""
    thetas = np.atleast_1d(np.asarray(thetas_deg, dtype=float))
    if np.any(~np.isfinite(thetas)) or np.any(np.abs(thetas) >= 90.0):
        raise DomainError("steering angles must lie strictly inside (-90, 90) degrees")
    m = np.arange(int(M))[:, None]
    phase = -2.0 * np.pi * spacing_wavelengths * m * np.sin(np.deg2rad(thetas))[None, :]
    return np.exp(1j * phase)


@dataclass(frozen=True)
class ArrayConfig:
    """Scenario description.  ``snr_db = inf`` disables noise."""

    num_sensors: int = 8
    num_sources: int = 2
    doas_deg: tuple = (-10.0, 10.0)
    spacing_wavelengths: float = 0.5
    snapshots: int = 100
    snr_db: float = 10.0
    num_distorted: int = 3
    gain_range: tuple = (0.0, 10.0)
    phase_range_deg: tuple = (-10.0, 10.0)
    gamma_max: float = 10.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "doas_deg", tuple(float(v) for v in self.doas_deg))
        object.__setattr__(self, "gain_range", tuple(float(v) for v in self.gain_range))
        object.__setattr__(
            self, "phase_range_deg", tuple(float(v) for v in self.phase_range_deg)
        )
        self.validate()

    def validate(self):
        M, K = self.num_sensors, self.num_sources
        if M < 1 or K < 1:
            raise ConfigError("num_sensors and num_sources must be positive")
        if K >= M:
            raise ConfigError(f"need num_sources < num_sensors, got K={K}, M={M}")
        if not 0 <= self.num_distorted < M:
            raise ConfigError(f"need 0 <= num_distorted < num_sensors, got {self.num_distorted}")
        if len(self.doas_deg) != K:
            raise ConfigError(f"doas_deg has {len(self.doas_deg)} entries, expected {K}")
        doas = np.asarray(self.doas_deg)
        if np.any(np.abs(doas) >= 90.0):
            raise ConfigError("doas_deg must lie strictly inside (-90, 90)")
        if np.any(np.diff(doas) <= 0):
            raise ConfigError("doas_deg must be strictly increasing")
        if self.spacing_wavelengths <= 0:
            raise ConfigError("spacing_wavelengths must be positive")
        if self.snapshots < 1:
            raise ConfigError("snapshots must be positive")
        if math.isnan(self.snr_db) or self.snr_db == -math.inf:
            raise ConfigError("snr_db must be a number or +inf")
        for name in ("gain_range", "phase_range_deg"):
            lo_hi = getattr(self, name)
            if len(lo_hi) != 2 or lo_hi[0] > lo_hi[1]:
                raise ConfigError(f"{name} must be [low, high] with low <= high")
        if not self.gamma_max > 0:
            raise ConfigError("gamma_max must be positive")
        if self.snapshots <= M:
            warnings.warn(
                f"snapshots ({self.snapshots}) <= num_sensors ({M}); the model assumes T > M",
                stacklevel=3,
            )

    @property
    def noise_variance(self):
        return 0.0 if self.snr_db == math.inf else 10.0 ** (-self.snr_db / 10.0)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        d = dataclasses.asdict(self)
        for key in ("doas_deg", "gain_range", "phase_range_deg"):
            d[key] = list(d[key])
        if d["snr_db"] == math.inf:
            d["snr_db"] = "inf"
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if isinstance(d.get("snr_db"), str):
            d["snr_db"] = float(d["snr_db"])
        return cls(**d)


@dataclass
class ArrayScenario:
    config: ArrayConfig
    steering: np.ndarray
    signals: np.ndarray
    gamma_true: np.ndarray
    distorted_indices: np.ndarray
    noise: np.ndarray
    measurements: np.ndarray = field(repr=False)

    @property
    def clean(self):
        """Noise- and distortion-free component ``A S``."""
        return self.steering @ self.signals


def trial_rng(seed, trial_index=None):
    """Generator for a scenario; trials get streams keyed on (seed, index)."""
    entropy = [int(seed)] if trial_index is None else [int(seed), int(trial_index)]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def _complex_gaussian(rng, shape, variance):
    scale = math.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def generate_scenario(config, trial_index=None):
    """Draw one Monte-Carlo realisation of ``config``.

    The draw is a pure function of ``(config.seed, trial_index)``.  Distorted
    sensors get ``gamma_m = g exp(j phi)`` with ``g`` and ``phi`` uniform on the
    configured ranges; real and imaginary parts are then clipped to
    ``+-gamma_max``.
    """
    if not isinstance(config, ArrayConfig):
        raise ConfigError("generate_scenario expects an ArrayConfig")
    rng = trial_rng(config.seed, trial_index)
    M, K, T = config.num_sensors, config.num_sources, config.snapshots

    A = steering_matrix(config.doas_deg, M, config.spacing_wavelengths)
    S = _complex_gaussian(rng, (K, T), 1.0)

    idx = np.sort(rng.choice(M, size=config.num_distorted, replace=False))
    gains = rng.uniform(*config.gain_range, size=idx.size)
    phases = np.deg2rad(rng.uniform(*config.phase_range_deg, size=idx.size))
    raw = gains * np.exp(1j * phases)
    gmax = config.gamma_max
    gamma = np.zeros(M, dtype=complex)
    gamma[idx] = np.clip(raw.real, -gmax, gmax) + 1j * np.clip(raw.imag, -gmax, gmax)

    if config.noise_variance > 0:
        N = _complex_gaussian(rng, (M, T), config.noise_variance)
    else:
        N = np.zeros((M, T), dtype=complex)

    Y = (1.0 + gamma)[:, None] * (A @ S) + N
    return ArrayScenario(config, A, S, gamma, idx, N, Y)


def rank_of_clean(scenario, rtol=1e-10):
    """Numerical rank of ``A S``: singular values above ``rtol`` times the largest."""
    s = np.linalg.svd(scenario.clean, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def _encode_matrix(X):
    X = np.atleast_2d(X)
    return [[[float(v.real), float(v.imag)] for v in row] for row in X]


def _decode_matrix(rows):
    arr = np.asarray(rows, dtype=float)
    if arr.size == 0:
        return np.zeros((len(rows), 0), dtype=complex)
    return arr[..., 0] + 1j * arr[..., 1]


def scenario_to_dict(scenario):
    return {
        "config": scenario.config.to_dict(),
        "distorted_indices": [int(i) for i in scenario.distorted_indices],
        "gamma_true": _encode_matrix(scenario.gamma_true)[0],
        "steering": _encode_matrix(scenario.steering),
        "signals": _encode_matrix(scenario.signals),
        "noise": _encode_matrix(scenario.noise),
        "measurements": _encode_matrix(scenario.measurements),
    }


def scenario_from_dict(d):
    config = ArrayConfig.from_dict(d["config"])
    gamma = _decode_matrix([d["gamma_true"]])[0]
    return ArrayScenario(
        config=config,
        steering=_decode_matrix(d["steering"]),
        signals=_decode_matrix(d["signals"]),
        gamma_true=gamma,
        distorted_indices=np.asarray(d["distorted_indices"], dtype=int),
        noise=_decode_matrix(d["noise"]),
        measurements=_decode_matrix(d["measurements"]),
    )


def save_scenario(scenario, path):
    """Write a scenario as JSON: config echo plus matrices as rows of [re, im] pairs."""
    with open(path, "w") as fh:
        json.dump(scenario_to_dict(scenario), fh, indent=1)
        fh.write("\n")


def load_scenario(path):
    with open(path) as fh:
        return scenario_from_dict(json.load(fh))
