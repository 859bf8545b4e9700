"""Array geometry, steering vectors, and multipath channel synthesis.

Conventions used throughout the package:

* The ``N`` antennas of the uplink array sit on the y-axis at
  ``(0, delta_n * wavelength)`` with ``delta_n = (2n - N - 1) / 4`` for
  ``n = 1..N`` (half-wavelength spacing, centered on the origin).
* ``omega`` is the sine of the source angle measured from the array
  normal (the positive x-axis), so a source at range ``r`` sits at
  ``(r * sqrt(1 - omega**2), r * omega)``.
* Every steering vector is unit l2-norm.
* ``math.inf`` as a range marks a far-field source; far-field paths
  never carry a fake "huge float" range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

FAR_FIELD = math.inf

SQRT3_2 = math.sqrt(3.0) / 2.0


@dataclass(frozen=True)
class ArrayConfig:
    """Static description of the partially-connected uniform linear array.

    Args:
        n_antennas: total antenna count N.
        n_rf: number of RF chains (= number of subarrays).
        wavelength: carrier wavelength in meters.
    """

    n_antennas: int
    n_rf: int
    wavelength: float

    def __post_init__(self):
        if self.n_antennas <= 0 or self.n_rf <= 0:
            raise ValueError("antenna and RF-chain counts must be positive")
        if self.n_antennas % self.n_rf != 0:
            raise ValueError(
                f"n_antennas={self.n_antennas} not divisible by n_rf={self.n_rf}"
            )
        if not self.wavelength > 0:
            raise ValueError("wavelength must be positive")

    @property
    def m_per_sub(self) -> int:
        """Antennas per subarray, M = N / N_RF."""
        return self.n_antennas // self.n_rf

    @property
    def aperture(self) -> float:
        """Physical array aperture D = N * wavelength / 2 in meters."""
        return self.n_antennas * self.wavelength / 2.0

    @property
    def range_floor(self) -> float:
        """Smallest range where the quadratic wavefront model is trusted.

        Equals ``0.5 * sqrt(D^3 / wavelength)``.
        """
        return 0.5 * math.sqrt(self.aperture**3 / self.wavelength)

    def antenna_offsets(self) -> np.ndarray:
        """Per-antenna y-offsets ``delta_n`` in units of the wavelength."""
        n = np.arange(1, self.n_antennas + 1)
        return (2 * n - self.n_antennas - 1) / 4.0


def rayleigh_distance(cfg: ArrayConfig) -> float:
    """Near/far boundary 2 D^2 / wavelength = N^2 * wavelength / 2."""
    return 2.0 * cfg.aperture**2 / cfg.wavelength


def element_distance(cfg: ArrayConfig, omega: float, r: float, n=None):
    """Exact distance from a source at (omega, r) to antenna n (1-based).

    With ``n=None`` returns the full length-N vector of distances.
    """
    if not r > 0:
        raise ValueError("range must be positive")
    deltas = cfg.antenna_offsets()
    if n is not None:
        if not 1 <= n <= cfg.n_antennas:
            raise ValueError(f"antenna index {n} outside 1..{cfg.n_antennas}")
        deltas = deltas[n - 1]
    dl = deltas * cfg.wavelength
    return np.sqrt(r * r + dl * dl - 2.0 * r * omega * dl)


def steering_far(cfg: ArrayConfig, omega: float) -> np.ndarray:
    """Plane-wave steering vector; entry n is exp(j*pi*(n-1)*omega)/sqrt(N)."""
    if abs(omega) > 1:
        raise ValueError("omega must lie in [-1, 1]")
    n = np.arange(cfg.n_antennas)
    return np.exp(1j * np.pi * n * omega) / math.sqrt(cfg.n_antennas)


def steering_near(cfg: ArrayConfig, omega: float, r: float, validate: bool = True) -> np.ndarray:
    """Spherical-wave steering vector from the exact element distances.

    Entry n is ``exp(-j*2*pi/lambda*(r_n - r)) / sqrt(N)``.  Ranges below
    the model validity floor are rejected unless ``validate=False``
    (codebook construction deliberately keeps such columns).
    """
    if abs(omega) > 1:
        raise ValueError("omega must lie in [-1, 1]")
    if validate and r < cfg.range_floor:
        raise ValueError(
            f"range {r:.4g} m below validity floor {cfg.range_floor:.4g} m"
        )
    rn = element_distance(cfg, omega, r)
    return np.exp(-2j * np.pi / cfg.wavelength * (rn - r)) / math.sqrt(cfg.n_antennas)


def steering(cfg: ArrayConfig, omega: float, r: float, validate: bool = True) -> np.ndarray:
    """Dispatch on the far-field marker: ``r = inf`` gives the plane wave."""
    if math.isinf(r):
        return steering_far(cfg, omega)
    return steering_near(cfg, omega, r, validate=validate)


@dataclass(frozen=True)
class QuadraticPhase:
    """Chirp parameterization (k, b) of a steering vector.

    The quadratic model assigns antenna n the phase ``pi*(k*n^2 + b*n)``.
    ``k <= 0`` for physical sources; ``k = 0`` is the far field.
    """

    k: float
    b: float

    @classmethod
    def from_geometry(cls, cfg: ArrayConfig, omega: float, r: float) -> "QuadraticPhase":
        if math.isinf(r):
            return cls(0.0, omega)
        rho = cfg.wavelength * (1.0 - omega * omega) / (2.0 * r)
        return cls(-rho / 2.0, omega + rho * (cfg.n_antennas + 1) / 2.0)

    def to_geometry(self, cfg: ArrayConfig) -> tuple[float, float]:
        """Invert back to (omega, range); k >= 0 maps to the far field."""
        omega = self.b + self.k * (cfg.n_antennas + 1)
        if self.k >= 0.0:
            return omega, FAR_FIELD
        r = -cfg.wavelength * (1.0 - omega * omega) / (4.0 * self.k)
        return omega, r


def steering_quadratic(cfg: ArrayConfig, omega: float, r: float) -> np.ndarray:
    """Chirp approximation of the steering vector; exact in the far field."""
    qp = QuadraticPhase.from_geometry(cfg, omega, r)
    n = np.arange(1, cfg.n_antennas + 1)
    return np.exp(1j * np.pi * (qp.k * n * n + qp.b * n)) / math.sqrt(cfg.n_antennas)


@dataclass(frozen=True)
class PathParams:
    """One propagation path: complex gain, angle sine, and range."""

    gain: complex
    omega: float
    range_m: float

    def __post_init__(self):
        if abs(self.omega) > 1:
            raise ValueError("omega must lie in [-1, 1]")
        if not self.range_m > 0:
            raise ValueError("range must be positive")

    @property
    def is_far(self) -> bool:
        return math.isinf(self.range_m)

    def validate_region(self, cfg: ArrayConfig) -> None:
        """Reject near-field ranges below the model validity floor."""
        if not self.is_far and self.range_m < cfg.range_floor:
            raise ValueError(
                f"path range {self.range_m:.4g} m below validity floor "
                f"{cfg.range_floor:.4g} m"
            )


@dataclass(frozen=True)
class ChannelScenario:
    """Random multipath scenario: path 1 is the line of sight."""

    n_paths: int = 3
    gain_vars: tuple[float, ...] = (1.0, 0.01, 0.01)
    angle_range: tuple[float, float] = (-SQRT3_2, SQRT3_2)
    range_range: tuple[float, float] = (6.0, 150.0)

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValueError("need at least one path")
        if len(self.gain_vars) < self.n_paths:
            raise ValueError("gain_vars shorter than n_paths")
        lo, hi = self.angle_range
        if not (-1 <= lo <= hi <= 1):
            raise ValueError("angle_range must be ordered and inside [-1, 1]")
        rlo, rhi = self.range_range
        if not (0 < rlo <= rhi):
            raise ValueError("range_range must be ordered and positive")


@dataclass
class ChannelRealization:
    """Sampled paths plus the synthesized length-N channel vector."""

    paths: list[PathParams]
    h: np.ndarray = field(repr=False)

    @property
    def los(self) -> PathParams:
        return self.paths[0]


def crandn(rng: np.random.Generator, shape=()) -> np.ndarray:
    """Standard circular complex normal: two real normals scaled by sqrt(1/2)."""
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) * math.sqrt(0.5)


def synthesize(cfg: ArrayConfig, paths: list[PathParams]) -> np.ndarray:
    """Sum of gain-weighted steering vectors, h = sum_l g_l * alpha_l."""
    h = np.zeros(cfg.n_antennas, dtype=complex)
    for p in paths:
        h += p.gain * steering(cfg, p.omega, p.range_m)
    return h


def sample_channel(cfg: ArrayConfig, rng: np.random.Generator,
                   scenario: ChannelScenario = ChannelScenario()) -> ChannelRealization:
    """Draw a multipath channel; ranges are clamped up to the validity floor."""
    lo, hi = scenario.angle_range
    rlo = max(scenario.range_range[0], cfg.range_floor)
    rhi = max(scenario.range_range[1], rlo)
    paths = []
    for l in range(scenario.n_paths):
        g = crandn(rng) * math.sqrt(scenario.gain_vars[l])
        omega = rng.uniform(lo, hi)
        r = rng.uniform(rlo, rhi)
        paths.append(PathParams(gain=complex(g), omega=float(omega), range_m=float(r)))
    return ChannelRealization(paths=paths, h=synthesize(cfg, paths))


def receive(h: np.ndarray, w: np.ndarray, v: np.ndarray | None = None,
            x: complex = 1.0, noise_power: float = 0.0,
            rng: np.random.Generator | None = None):
    """Hybrid-combined observation of one pilot.

    ``w`` is the N_RF x N analog combiner and ``v`` the optional 1 x N_RF
    digital row.  Returns ``v W h x + v W eta`` (scalar) or, with ``v``
    omitted, the N_RF RF-chain outputs ``W h x + W eta``.  Zero noise
    power draws nothing from the generator.
    """
    w = np.asarray(w)
    h = np.asarray(h)
    if w.ndim != 2 or w.shape[1] != h.shape[0]:
        raise ValueError(f"analog combiner shape {w.shape} incompatible with h ({h.shape[0]},)")
    out = w @ (h * x)
    if noise_power > 0.0:
        if rng is None:
            raise ValueError("noisy receive needs an rng")
        eta = crandn(rng, h.shape[0]) * math.sqrt(noise_power)
        out = out + w @ eta
    if v is None:
        return out
    v = np.asarray(v)
    if v.shape[-1] != w.shape[0]:
        raise ValueError(f"digital combiner shape {v.shape} incompatible with {w.shape[0]} RF chains")
    return v @ out


def snr_db_to_noise_power(snr_db: float, cfg: ArrayConfig) -> float:
    """Map a nominal SNR to the per-antenna noise variance sigma^2.

    The nominal SNR is referred to one RF-chain output: a unit-modulus
    analog combining row has squared norm M, so the noise power entering
    a single RF chain is ``M * sigma^2`` and equals ``10**(-snr_db/10)``
    for a unit-variance line-of-sight gain and unit pilot.  Reported SNR
    axes therefore differ from per-antenna SNR by a constant offset.
    """
    return 10.0 ** (-snr_db / 10.0) / cfg.m_per_sub
