"""Two-stage beam training over the hybrid codebook, plus the exhaustive
and far-field-only sweep baselines.

Stage 1 sweeps the M per-subarray DFT beams once (all subarrays in
parallel, one pilot per beam).  Stage 2 spends no pilots: for every
hybrid codeword it reassembles the already-measured RF outputs and
applies the codeword's digital row.  Noise drawn in stage 1 is therefore
reused verbatim by every codeword that shares a sweep index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .arrays import ArrayConfig, ChannelRealization, crandn
from .codebooks import HybridCodebook, SubarrayCodebook
from .combining import CombinerPair, quantize_pointing, subarray_centers


@dataclass
class Stage1Sweep:
    """All stage-1 measurements: z[m, t] is beam m's output on RF chain t."""

    z: np.ndarray = field(repr=False)        # (M, N_RF) complex
    signal: np.ndarray = field(repr=False)   # noiseless part
    noise: np.ndarray = field(repr=False)    # RF-chain noise actually added
    pilots: int = 0


@dataclass
class TrainedDesign:
    """Channel-independent stage-2 design cache for one codebook.

    Holds, for every codeword p: the subarray pointing sines, the DFT
    beam picks m_t(p), and the matched digital row v_p.  Building this is
    the only O(N * P) work; afterwards each trial's stage 2 is a gather.
    """

    book: HybridCodebook
    sub_book: SubarrayCodebook
    psi: np.ndarray = field(repr=False)       # (P, N_RF)
    m_idx: np.ndarray = field(repr=False)     # (P, N_RF) 0-based
    v: np.ndarray = field(repr=False)         # (P, N_RF) complex
    proj_norm: np.ndarray = field(repr=False) # (P,) ||F_p c_p||

    def combiner(self, p: int) -> CombinerPair:
        """Materialize codeword p's combiner pair (p is 1-based)."""
        w_blocks = self.sub_book.matrix[:, self.m_idx[p - 1]].T.conj()
        return CombinerPair(cfg=self.book.cfg, w_blocks=w_blocks, v=self.v[p - 1],
                            m_indices=self.m_idx[p - 1] + 1, pointing=self.psi[p - 1])

    def combined_vector(self, p: int) -> np.ndarray:
        """Receive-matched unit vector (v_p F_p)^H for codeword p."""
        cols = self.sub_book.matrix[:, self.m_idx[p - 1]]          # (M, N_RF)
        return (cols * self.v[p - 1].conj()[None, :]).T.reshape(-1)


def design_all(book: HybridCodebook, sub_book: SubarrayCodebook) -> TrainedDesign:
    """Vectorized hybrid-combiner design for every codeword in the book."""
    cfg = book.cfg
    n_rf, m = cfg.n_rf, cfg.m_per_sub
    p_total = book.n_columns
    qs = book.n_angles * book.n_rings

    theta = np.repeat(book.theta, book.n_rings)
    dist = book.distances.reshape(-1)
    dl = subarray_centers(cfg) * cfg.wavelength

    psi = np.empty((p_total, n_rf))
    num = dist[:, None] * theta[:, None] - dl[None, :]
    den = np.sqrt(dist[:, None] ** 2 + dl[None, :] ** 2
                  - 2.0 * dist[:, None] * theta[:, None] * dl[None, :])
    psi[:qs] = num / den
    psi[qs:] = book.theta[:, None]

    m_idx = quantize_pointing(psi.reshape(-1), sub_book).reshape(p_total, n_rf) - 1

    if book.matrix is None:
        raise ValueError("design_all needs an eagerly built codebook")
    fc = np.empty((p_total, n_rf), dtype=complex)
    bh = sub_book.matrix.conj().T                                   # (M, M)
    for t in range(n_rf):
        gt = bh @ book.matrix[t * m:(t + 1) * m, :]                 # (M, P)
        fc[:, t] = gt[m_idx[:, t], np.arange(p_total)]
    norms = np.linalg.norm(fc, axis=1)
    v = fc.conj() / (math.sqrt(m) * norms[:, None])
    return TrainedDesign(book=book, sub_book=sub_book, psi=psi, m_idx=m_idx,
                         v=v, proj_norm=norms)


@dataclass
class TrainingResult:
    """Outcome of one beam-training run."""

    scheme: str
    best_index: int                       # 1-based codeword index
    rough_omega: float
    rough_range: float                    # inf when a far codeword won
    powers: np.ndarray = field(repr=False)
    pilots: int = 0

    @property
    def is_far(self) -> bool:
        return math.isinf(self.rough_range)


def stage1_sweep(cfg: ArrayConfig, sub_book: SubarrayCodebook, h: np.ndarray,
                 noise_power: float = 0.0,
                 rng: np.random.Generator | None = None,
                 x: complex = 1.0) -> Stage1Sweep:
    """Sweep all M DFT beams; every subarray applies beam m on pilot m."""
    m, n_rf = cfg.m_per_sub, cfg.n_rf
    h_blocks = np.asarray(h).reshape(n_rf, m).T                     # (M, N_RF)
    signal = (sub_book.matrix.conj().T @ h_blocks) * x              # (M, N_RF)
    if noise_power > 0.0:
        if rng is None:
            raise ValueError("noisy sweep needs an rng")
        eta = crandn(rng, (m, cfg.n_antennas)) * math.sqrt(noise_power)
        eta_blocks = eta.reshape(m, n_rf, m)
        noise = np.einsum("im,mti->mt", sub_book.matrix.conj(), eta_blocks)
    else:
        noise = np.zeros_like(signal)
    return Stage1Sweep(z=signal + noise, signal=signal, noise=noise, pilots=m)


def assemble_reused(sweep: Stage1Sweep, design: TrainedDesign, p: int) -> np.ndarray:
    """Reassemble codeword p's RF outputs from the stage-1 measurements.

    Entry t is copied from sweep measurement ``z[m_t(p), t]``; no pilot is
    consumed.
    """
    rows = design.m_idx[p - 1]
    return sweep.z[rows, np.arange(rows.shape[0])]


def stage2_select(book: HybridCodebook, design: TrainedDesign,
                  sweep: Stage1Sweep) -> TrainingResult:
    """Test every codeword digitally and pick the largest combined power.

    Exact power ties break toward the smaller codeword index.
    """
    n_rf = book.cfg.n_rf
    zz = sweep.z[design.m_idx, np.arange(n_rf)[None, :]]            # (P, N_RF)
    y = (design.v * zz).sum(axis=1)
    powers = np.abs(y) ** 2
    p_best = int(np.argmax(powers)) + 1                             # argmax = first max
    omega, rng_m = rough_position(book, p_best)
    return TrainingResult(scheme="thbt", best_index=p_best, rough_omega=omega,
                          rough_range=rng_m, powers=powers, pilots=sweep.pilots)


def rough_position(book: HybridCodebook, p: int) -> tuple[float, float]:
    """Coarse (omega, range) read off the winning codeword's grid cell."""
    cw = book.params(p)
    return cw.theta, cw.distance


def run_thbt(cfg: ArrayConfig, book: HybridCodebook, design: TrainedDesign,
             channel: ChannelRealization | np.ndarray, noise_power: float = 0.0,
             rng: np.random.Generator | None = None) -> TrainingResult:
    """Full two-stage training: M pilots swept, zero pilots in stage 2."""
    h = channel.h if isinstance(channel, ChannelRealization) else channel
    sweep = stage1_sweep(cfg, design.sub_book, h, noise_power, rng)
    return stage2_select(book, design, sweep)


def baseline_hfbs(cfg: ArrayConfig, book: HybridCodebook,
                  channel: ChannelRealization | np.ndarray,
                  noise_power: float = 0.0,
                  rng: np.random.Generator | None = None,
                  x: complex = 1.0) -> TrainingResult:
    """Exhaustive sweep: one ideal codeword-matched pilot per column.

    This is the upper-overhead baseline; it observes each codeword
    directly and is not constrained by the partially-connected hardware.
    """
    if book.matrix is None:
        raise ValueError("baseline_hfbs needs an eagerly built codebook")
    # C^H h computed as (h^H C)^H to avoid conjugating the big matrix
    y = (h_of(channel).conj() @ book.matrix).conj() * x
    if noise_power > 0.0:
        if rng is None:
            raise ValueError("noisy sweep needs an rng")
        y = y + crandn(rng, book.n_columns) * math.sqrt(noise_power)
    powers = np.abs(y) ** 2
    p_best = int(np.argmax(powers)) + 1
    omega, rng_m = rough_position(book, p_best)
    return TrainingResult(scheme="hfbs", best_index=p_best, rough_omega=omega,
                          rough_range=rng_m, powers=powers, pilots=book.n_columns)


def baseline_ffbs(cfg: ArrayConfig, book: HybridCodebook,
                  channel: ChannelRealization | np.ndarray,
                  noise_power: float = 0.0,
                  rng: np.random.Generator | None = None,
                  x: complex = 1.0) -> TrainingResult:
    """Far-field-only sweep: Q ideal pilots over the plane-wave block."""
    if book.matrix is None:
        raise ValueError("baseline_ffbs needs an eagerly built codebook")
    qs = book.n_angles * book.n_rings
    y = (h_of(channel).conj() @ book.matrix[:, qs:]).conj() * x
    if noise_power > 0.0:
        if rng is None:
            raise ValueError("noisy sweep needs an rng")
        y = y + crandn(rng, book.n_angles) * math.sqrt(noise_power)
    powers = np.abs(y) ** 2
    p_best = qs + int(np.argmax(powers)) + 1
    omega, rng_m = rough_position(book, p_best)
    return TrainingResult(scheme="ffbs", best_index=p_best, rough_omega=omega,
                          rough_range=rng_m, powers=powers, pilots=book.n_angles)


def h_of(channel) -> np.ndarray:
    return channel.h if isinstance(channel, ChannelRealization) else np.asarray(channel)
