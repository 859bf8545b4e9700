"""Closed-form beam refinement from the quadratic phase progression of
subarray outputs.

One extra pilot is received through chirp-phased subarray combiners
matched to the coarse estimate.  The residual chirp offsets (dk, db)
then appear as a quadratic phase across the RF-chain outputs:
second-order phase differences give dk, corrected first-order
differences give db.  Everything is O(N_RF) arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .arrays import ArrayConfig, ChannelRealization, FAR_FIELD, crandn
from .combining import chirp_sum


def initial_kb(cfg: ArrayConfig, omega: float, r: float) -> tuple[float, float]:
    """Chirp parameters of the coarse estimate: k = -lambda(1-omega^2)/(4r).

    A far-field coarse estimate (r = inf) gives k = 0.
    """
    if math.isinf(r):
        return 0.0, omega
    k = -cfg.wavelength * (1.0 - omega * omega) / (4.0 * r)
    return k, omega - k * (cfg.n_antennas + 1)


def refinement_combiner(cfg: ArrayConfig, k: float, b: float) -> np.ndarray:
    """Per-subarray analog rows; block t, entry m has phase
    ``pi*(k*((t-1)M+m)^2 + b*((t-1)M+m))`` before conjugation."""
    n = np.arange(1, cfg.n_antennas + 1)
    w = np.exp(1j * np.pi * (k * n * n + b * n))
    return w.reshape(cfg.n_rf, cfg.m_per_sub)


def measure_subarrays(cfg: ArrayConfig, channel, k: float, b: float,
                      noise_power: float = 0.0,
                      rng: np.random.Generator | None = None,
                      x: complex = 1.0) -> np.ndarray:
    """One pilot through the chirp combiner; returns the N_RF outputs."""
    h = channel.h if isinstance(channel, ChannelRealization) else np.asarray(channel)
    w = refinement_combiner(cfg, k, b)
    h_blocks = h.reshape(cfg.n_rf, cfg.m_per_sub)
    z = np.einsum("tm,tm->t", w.conj(), h_blocks) * x
    if noise_power > 0.0:
        if rng is None:
            raise ValueError("noisy measurement needs an rng")
        eta = crandn(rng, cfg.n_antennas) * math.sqrt(noise_power)
        z = z + np.einsum("tm,tm->t", w.conj(), eta.reshape(cfg.n_rf, cfg.m_per_sub))
    return z


def wrap_pi(x: np.ndarray) -> np.ndarray:
    """Shift into the principal interval [-pi, pi)."""
    return np.mod(np.asarray(x) + np.pi, 2.0 * np.pi) - np.pi


def phase_differences(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """First differences and wrapped second differences of the output phases."""
    z = np.asarray(z)
    if z.shape[0] < 3:
        raise ValueError("phase refinement needs at least three subarrays")
    if np.any(np.abs(z) == 0.0):
        raise ValueError("zero-magnitude subarray output: phase undefined")
    ups = np.angle(z)
    d1 = np.diff(ups)
    d2 = wrap_pi(np.diff(d1))
    return d1, d2


def estimate_offsets(cfg: ArrayConfig, d1: np.ndarray, d2: np.ndarray) -> tuple[float, float]:
    """Chirp offsets from the phase differences.

    ``dk`` averages the wrapped second differences over ``2*pi*M^2``; the
    first differences are then de-trended by the dk estimate, wrapped,
    and averaged over ``M*pi`` to give ``db``.
    """
    m = cfg.m_per_sub
    dk = float(np.mean(d2)) / (2.0 * np.pi * m * m)
    t = np.arange(1, d1.shape[0] + 1)
    detrended = d1 - (2 * t - 1) * m * m * dk * np.pi - m * (m + 1) * dk * np.pi
    db = float(np.mean(wrap_pi(detrended))) / (m * np.pi)
    return dk, db


@dataclass(frozen=True)
class RefinementResult:
    """Refined chirp parameters and their geometric reading."""

    k: float
    b: float
    omega: float
    range_m: float          # inf when k >= 0 (far-field consistent)
    refined: bool           # False when the coarse estimate was returned as-is
    pilots: int = 1

    @property
    def is_far(self) -> bool:
        return math.isinf(self.range_m)


def refine(cfg: ArrayConfig, k0: float, b0: float, dk: float, db: float) -> RefinementResult:
    """Apply the offsets and invert the chirp back to (omega, range).

    ``k >= 0`` has no finite-range reading and reports the far field
    rather than a negative range.
    """
    k, b = k0 + dk, b0 + db
    omega = b + k * (cfg.n_antennas + 1)
    if k >= 0.0:
        return RefinementResult(k=k, b=b, omega=omega, range_m=FAR_FIELD, refined=True)
    r = -cfg.wavelength * (1.0 - omega * omega) / (4.0 * k)
    return RefinementResult(k=k, b=b, omega=omega, range_m=r, refined=True)


def run_brpss(cfg: ArrayConfig, channel, coarse_omega: float, coarse_range: float,
              noise_power: float = 0.0,
              rng: np.random.Generator | None = None) -> RefinementResult:
    """One-pilot refinement around a coarse (omega, range) estimate.

    On failure (vanishing subarray output) the coarse estimate comes back
    tagged ``refined=False`` so downstream consumers degrade gracefully.
    """
    k0, b0 = initial_kb(cfg, coarse_omega, coarse_range)
    z = measure_subarrays(cfg, channel, k0, b0, noise_power, rng)
    try:
        d1, d2 = phase_differences(z)
    except ValueError:
        return RefinementResult(k=k0, b=b0, omega=coarse_omega,
                                range_m=coarse_range, refined=False)
    dk, db = estimate_offsets(cfg, d1, d2)
    result = refine(cfg, k0, b0, dk, db)
    if not result.is_far and abs(result.omega) > 1.0:
        # implausible geometry (negative range): keep the coarse estimate
        return RefinementResult(k=k0, b=b0, omega=coarse_omega,
                                range_m=coarse_range, refined=False)
    return result


# ---------------------------------------------------------------------------
# analytic signal-model oracle


def psp_band_ok(cfg: ArrayConfig, dk: float, db: float,
                include_phase_bound: bool = False) -> bool:
    """Check the offsets against the flat-top validity conditions.

    The peak-shift condition requires ``|phi_t + w| <= 1/M`` over the
    chirp bandwidth for every subarray; ``include_phase_bound`` adds the
    quadratic-phase condition ``|(M+1)w/2 - w^2/(4 dk)| <= 1/2``.
    """
    m, n_rf = cfg.m_per_sub, cfg.n_rf
    if dk == 0.0:
        return abs(db) <= 1.0 / m
    ends = np.array([2.0 * dk * m, 2.0 * dk])
    for t in range(1, n_rf + 1):
        phi = db + 2.0 * dk * m * (t - 1)
        if np.max(np.abs(phi + ends)) > 1.0 / m:
            return False
    if include_phase_bound:
        w = np.linspace(min(ends), max(ends), 64)
        if np.max(np.abs((m + 1) * w / 2.0 - w * w / (4.0 * dk))) > 0.5:
            return False
    return True


def psp_model_oracle(cfg: ArrayConfig, dk: float, db: float, t: int) -> complex:
    """Analytic factorization of subarray t's chirp sum, by quadrature.

    Evaluates ``g_bar * C(t) * B(phi_t)`` for the normalized sum
    ``sum_m exp(j*pi*(dk*(m+(t-1)M)^2 + db*(m+(t-1)M)))``.  Exists to
    validate the phase model against :func:`chirp_sum`; a vanishing dk
    falls back to the exact geometric series.
    """
    m = cfg.m_per_sub
    if dk == 0.0:
        return chirp_sum(m, 0.0, db, offset=(t - 1) * m)
    if dk > 0.0:
        return complex(np.conj(psp_model_oracle(cfg, -dk, -db, t)))

    phi_t = db + 2.0 * dk * m * (t - 1)
    g_bar = (1.0 / (2.0 * math.sqrt(-dk))) * np.exp(1j * np.pi * ((m + 1) * db / 2.0 - 0.25))
    dkt = dk * m * m
    dbt = (db + dk * (m + 1)) * m
    c_t = np.exp(1j * np.pi * (dkt * (t - 1) ** 2 + dbt * (t - 1)))

    def integrand(w, part):
        p = np.exp(1j * np.pi * ((m + 1) * w / 2.0 - w * w / (4.0 * dk)))
        arg = (np.pi * phi_t + np.pi * w) / 2.0
        s = math.sin(arg)
        a = m if abs(s) < 1e-14 else math.sin(m * arg) / s
        val = p * a
        return val.real if part == 0 else val.imag

    lo, hi = 2.0 * dk * m, 2.0 * dk
    re, _ = quad(integrand, lo, hi, args=(0,), limit=400)
    im, _ = quad(integrand, lo, hi, args=(1,), limit=400)
    return complex(g_bar * c_t * (re + 1j * im))
