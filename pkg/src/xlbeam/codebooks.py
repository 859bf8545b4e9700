"""Beam codebooks: far-field DFT grid, polar-domain near-field grid, their
hybrid concatenation, and the per-subarray DFT codebook.

Hybrid codebook layout (1-based column index p):

* columns ``1 .. Q*S`` are near-field, angle-major / distance-minor:
  column ``p`` covers angle index ``q = ceil(p / S)`` and distance index
  ``s = p - (q - 1) * S``;
* columns ``Q*S + 1 .. Q*S + Q`` are the far-field grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .arrays import ArrayConfig, FAR_FIELD, steering_far, steering_near


def angle_grid(q: int) -> np.ndarray:
    """The Q angle samples (2q - 1 - Q) / Q, q = 1..Q."""
    return (2 * np.arange(1, q + 1) - 1 - q) / q


def distance_grid(cfg: ArrayConfig, q: int, s: int) -> np.ndarray:
    """Polar-domain distance samples, shape (Q, S).

    ``d[q, s] = N^{3/2} * lambda * S * (1 - theta_q^2) / (4 * sqrt(2) * s)``.
    The deepest ring (s = S) touches the validity floor at theta = 0.
    """
    theta = angle_grid(q)
    srange = np.arange(1, s + 1)
    n = cfg.n_antennas
    return (n**1.5 * cfg.wavelength * s * (1.0 - theta[:, None] ** 2)
            / (4.0 * math.sqrt(2.0) * srange[None, :]))


@dataclass(frozen=True)
class CodewordParams:
    """Geometry behind one hybrid-codebook column."""

    kind: str            # "near" or "far"
    theta: float
    distance: float      # inf for far columns
    q: int               # 1-based angle index
    s: int | None        # 1-based distance index, None for far columns

    @property
    def is_far(self) -> bool:
        return self.kind == "far"


def build_far_codebook(cfg: ArrayConfig, q: int) -> np.ndarray:
    """N x Q matrix whose column q is the plane-wave beam at theta_q."""
    if q < 1:
        raise ValueError("need at least one angle sample")
    return np.stack([steering_far(cfg, th) for th in angle_grid(q)], axis=1)


def build_near_codebook(cfg: ArrayConfig, q: int, s: int) -> np.ndarray:
    """N x (Q*S) polar-grid matrix, angle-major / distance-minor columns.

    Columns whose ring distance falls below the validity floor (extreme
    angles shrink ``1 - theta^2``) are kept so index arithmetic stays
    dense; ``build_hybrid_codebook`` flags them.
    """
    if q < 1 or s < 1:
        raise ValueError("need at least one angle and one distance sample")
    theta = angle_grid(q)
    dist = distance_grid(cfg, q, s)
    cols = np.empty((cfg.n_antennas, q * s), dtype=complex)
    for qi in range(q):
        for si in range(s):
            cols[:, qi * s + si] = steering_near(cfg, theta[qi], dist[qi, si],
                                                 validate=False)
    return cols


@dataclass
class HybridCodebook:
    """Concatenated near + far codebook with index/geometry bookkeeping."""

    cfg: ArrayConfig
    n_angles: int
    n_rings: int
    theta: np.ndarray = field(repr=False)
    distances: np.ndarray = field(repr=False)        # (Q, S)
    below_floor: np.ndarray = field(repr=False)      # (Q, S) bool
    matrix: np.ndarray | None = field(repr=False)    # (N, QS+Q) or None if lazy

    @property
    def n_columns(self) -> int:
        return self.n_angles * self.n_rings + self.n_angles

    def params(self, p: int) -> CodewordParams:
        """Geometry of column p (1-based)."""
        qs = self.n_angles * self.n_rings
        if not 1 <= p <= self.n_columns:
            raise ValueError(f"column index {p} outside 1..{self.n_columns}")
        if p <= qs:
            q = math.ceil(p / self.n_rings)
            s = p - (q - 1) * self.n_rings
            return CodewordParams("near", float(self.theta[q - 1]),
                                  float(self.distances[q - 1, s - 1]), q, s)
        q = p - qs
        return CodewordParams("far", float(self.theta[q - 1]), FAR_FIELD, q, None)

    def valid_placement(self, p: int) -> bool:
        """Whether column p's geometry is a physically valid path placement."""
        cw = self.params(p)
        return cw.is_far or cw.distance >= self.cfg.range_floor * (1.0 - 1e-12)

    def index_of(self, q: int, s: int | None = None) -> int:
        """Column index of near cell (q, s), or of far angle q with s=None."""
        if s is None:
            return self.n_angles * self.n_rings + q
        return (q - 1) * self.n_rings + s

    def column(self, p: int) -> np.ndarray:
        """Column p, computed on demand when the codebook is lazy."""
        if self.matrix is not None:
            return self.matrix[:, p - 1]
        cw = self.params(p)
        if cw.is_far:
            return steering_far(self.cfg, cw.theta)
        return steering_near(self.cfg, cw.theta, cw.distance, validate=False)

    def iter_columns(self):
        """Lazy column generator for sweeps too large to keep in memory."""
        for p in range(1, self.n_columns + 1):
            yield self.column(p)


def build_hybrid_codebook(cfg: ArrayConfig, q: int, s: int,
                          eager: bool = True) -> HybridCodebook:
    """Build the hybrid codebook {near block, far block} with Q*S+Q columns.

    ``s = 0`` degenerates to the far-only codebook of Q columns.
    """
    if s < 0:
        raise ValueError("distance sample count cannot be negative")
    theta = angle_grid(q)
    dist = distance_grid(cfg, q, s)
    # strict comparison up to rounding: the deepest ring at the angle grid
    # point nearest broadside sits essentially on the floor
    below = dist < cfg.range_floor * (1.0 - 1e-12)
    matrix = None
    if eager:
        far = build_far_codebook(cfg, q)
        matrix = far if s == 0 else np.concatenate(
            [build_near_codebook(cfg, q, s), far], axis=1)
    return HybridCodebook(cfg=cfg, n_angles=q, n_rings=s, theta=theta,
                          distances=dist, below_floor=below, matrix=matrix)


def codeword_params(book: HybridCodebook, p: int) -> CodewordParams:
    """Module-level alias for :meth:`HybridCodebook.params`."""
    return book.params(p)


@dataclass(frozen=True)
class SubarrayCodebook:
    """Per-subarray DFT codebook: M beams over the full angle space."""

    cfg: ArrayConfig
    angles: np.ndarray = field(repr=False)   # (M,)
    matrix: np.ndarray = field(repr=False)   # (M, M), column m = sqrt(M)*beta(M, Phi_m)


def build_subarray_codebook(cfg: ArrayConfig) -> SubarrayCodebook:
    m = cfg.m_per_sub
    phi = angle_grid(m)
    n = np.arange(m)[:, None]
    matrix = np.exp(1j * np.pi * n * phi[None, :])   # sqrt(M) * beta has unit-modulus entries
    return SubarrayCodebook(cfg=cfg, angles=phi, matrix=matrix)


@dataclass(frozen=True)
class QuantizationReport:
    """Outcome of the (Q, S) sampling-density check."""

    ok: bool
    q_ok: bool
    s_bound: float | None
    s_min: int | None


def validate_quantization(cfg: ArrayConfig, q: int, s: int) -> QuantizationReport:
    """Check the codebook density needed for reliable subarray phase reuse.

    Requires ``Q >= M`` and
    ``S >= sqrt(2) * (N - 1) / (2 * N^{3/2} * (1/M - 1/Q))``; with
    ``Q = M`` the bound diverges and the check reports a violation.
    """
    m = cfg.m_per_sub
    n = cfg.n_antennas
    if q < m or (1.0 / m - 1.0 / q) <= 0.0:
        return QuantizationReport(ok=False, q_ok=False, s_bound=None, s_min=None)
    bound = math.sqrt(2.0) * (n - 1) / (2.0 * n**1.5 * (1.0 / m - 1.0 / q))
    s_min = math.ceil(bound)
    return QuantizationReport(ok=s >= bound, q_ok=True, s_bound=bound, s_min=s_min)
