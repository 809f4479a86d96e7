"""Sparse multipath channel estimation for OFDM links.

The channel is a handful of integer-delay taps; its per-carrier response
is the (plain, non-unitary) DFT of the tap vector, so a unit tap has unit
magnitude on every carrier. Estimators work from comb pilots: least
squares plus linear interpolation as the baseline, and the iterative
threshold-and-MMSE tap estimator on top of it.
"""

import dataclasses
import math
import time

import numpy as np

from .core import SolverReport, SupportSet

QAM16 = np.array(
    [(re + 1j * im) for re in (-3, -1, 1, 3) for im in (-3, -1, 1, 3)],
    dtype=np.complex128,
) / math.sqrt(10.0)
QPSK = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j], dtype=np.complex128) / math.sqrt(2.0)

CONSTELLATIONS = {"16qam": QAM16, "qpsk": QPSK}


@dataclasses.dataclass(frozen=True)
class ChannelProfile:
    """Sparse multipath taps: integer delays with complex gains."""

    delays: np.ndarray
    gains: np.ndarray

    def __post_init__(self):
        delays = np.atleast_1d(np.asarray(self.delays, dtype=np.intp))
        gains = np.atleast_1d(np.asarray(self.gains, dtype=np.complex128))
        if delays.size == 0 or delays.size != gains.size:
            raise ValueError("need matching non-empty delays and gains")
        if np.any(delays < 0) or np.any(np.diff(delays) <= 0):
            raise ValueError("delays must be unique, sorted, non-negative")
        object.__setattr__(self, "delays", delays)
        object.__setattr__(self, "gains", gains)

    @property
    def k(self):
        return self.delays.size

    def tap_vector(self, n):
        h = np.zeros(n, dtype=np.complex128)
        h[self.delays] = self.gains
        return h

    def to_config(self):
        """Serializable form: list of (delay, re, im) rows."""
        return [(int(d), float(g.real), float(g.imag))
                for d, g in zip(self.delays, self.gains)]

    @classmethod
    def from_config(cls, rows):
        delays = [int(r[0]) for r in rows]
        gains = [complex(float(r[1]), float(r[2])) for r in rows]
        return cls(delays=np.array(delays), gains=np.array(gains))


def brazil_d_like_profile():
    """Fixed 6-tap stand-in profile for a severe UHF multipath channel."""
    delays = np.array([0, 2, 9, 23, 41, 58])
    powers_db = np.array([0.0, -0.5, -2.0, -5.0, -9.0, -13.0])
    phases = np.array([0.0, 2.2, -1.3, 0.7, 2.9, -0.4])
    gains = 10 ** (powers_db / 20.0) * np.exp(1j * phases)
    gains = gains / np.linalg.norm(gains)
    return ChannelProfile(delays=delays, gains=gains)


@dataclasses.dataclass(frozen=True)
class OfdmConfig:
    """Subcarrier geometry: guards, comb pilots, constellation, CP length."""

    n: int = 256
    pilot_spacing: int = 4
    guard_left: int = 10
    guard_right: int = 9
    cp_length: int = 64
    constellation: str = "16qam"
    subcarrier_spacing: float = 1.0  # Hz; sample interval is its reciprocal
    symbol_time: float = None

    def __post_init__(self):
        if self.constellation not in CONSTELLATIONS:
            raise ValueError(f"unknown constellation {self.constellation!r}")
        if self.guard_left + self.guard_right >= self.n:
            raise ValueError("guards leave no active carriers")
        if self.symbol_time is None:
            object.__setattr__(self, "symbol_time", self.n / self.subcarrier_spacing)

    @property
    def sample_interval(self):
        return 1.0 / self.subcarrier_spacing

    @property
    def active(self):
        return np.arange(self.guard_left, self.n - self.guard_right)

    @property
    def pilots(self):
        return SupportSet(self.active[:: self.pilot_spacing], self.n)

    @property
    def data_carriers(self):
        return np.setdiff1d(self.active, self.pilots.indices)

    def pilot_values(self):
        # fixed unit-magnitude pilot pattern, known at the receiver
        idx = self.pilots.indices
        return np.exp(1j * np.pi * (idx * (idx + 1) % (2 * self.n)) / self.n)

    def symbols(self):
        return CONSTELLATIONS[self.constellation]


def channel_frequency_response(profile, cfg):
    """Per-carrier response H[i] = sum_l h_l exp(-2pi j i l / n)."""
    n = cfg.n if isinstance(cfg, OfdmConfig) else int(cfg)
    if np.any(profile.delays >= n):
        raise ValueError("tap delays must be below the carrier count")
    carriers = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(carriers, profile.delays) / n) @ profile.gains


def map_symbols(data_indices, cfg):
    """Frequency-domain block: pilots at their comb, data on the rest."""
    block = np.zeros(cfg.n, dtype=np.complex128)
    block[cfg.pilots.indices] = cfg.pilot_values()
    block[cfg.data_carriers] = cfg.symbols()[data_indices]
    return block


def ofdm_link(tx_block, profile, cfg, cnr_db, rng):
    """Per-carrier channel multiply plus noise at the requested CNR.

    Noise lands on active carriers only; guard carriers stay exactly zero.
    """
    response = channel_frequency_response(profile, cfg)
    rx = response * tx_block
    active = cfg.active
    if cnr_db is not None:
        signal_power = float(np.mean(np.abs(rx[active]) ** 2))
        sigma = math.sqrt(signal_power / 10 ** (cnr_db / 10.0))
        noise = np.zeros(cfg.n, dtype=np.complex128)
        noise[active] = rng.complex_normal(active.size, scale=sigma)
        rx = rx + noise
    return rx


def pilot_least_squares(rx_block, cfg):
    """LS channel values at the pilot carriers: rx / known pilot."""
    idx = cfg.pilots.indices
    return rx_block[idx] / cfg.pilot_values()


def estimate_linear(rx_block, cfg):
    """Linear interpolation of the pilot LS values across the active band.

    Edges extend the nearest pilot value; guard carriers return zero.
    """
    idx = cfg.pilots.indices
    if idx.size < 2:
        raise ValueError("need at least two pilots to interpolate")
    ls = pilot_least_squares(rx_block, cfg)
    active = cfg.active
    estimate = np.zeros(cfg.n, dtype=np.complex128)
    estimate[active] = np.interp(active, idx, ls.real) + 1j * np.interp(
        active, idx, ls.imag
    )
    return estimate


@dataclasses.dataclass(frozen=True)
class MimatConfig:
    """Growing threshold beta*exp(alpha*i) plus the MMSE-step SNR.

    beta defaults to 5e-3 of the peak initial time-domain estimate: the
    first pass must admit even heavily interpolation-attenuated taps
    (candidates are capped at the pilot count to keep the solve
    determined), and the growing threshold then prunes the false ones.
    """

    beta: float = None  # default: half the median CP-bin magnitude
    alpha: float = 0.6
    max_iters: int = 10
    snr_linear: float = 1e12

    def __post_init__(self):
        if self.beta is not None and self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive (threshold grows)")


def estimate_mimat(rx_block, cfg, mcfg=None):
    """Sparse tap estimation: threshold the time-domain channel, re-solve
    the detected taps by MMSE on the pilot equations, repeat; finish with a
    significance-gated support cleanup and an unbiased value re-solve.

    The growing threshold discards false taps across iterations. Inside the
    loop the tap gains come from the per-tap-dimensioned MMSE system
    (prior power split over the current candidates), which keeps the first
    wide-support solves tame even on guard-banded geometries. The final
    cleanup prunes taps below 2.4 standard errors, pulls in any tap the
    pilot residual still supports at 3 standard errors, and re-solves the
    survivors by plain least squares (shrinkage helps detection but biases
    values). Returns (ChannelProfile, frequency response, report).
    """
    mcfg = mcfg or MimatConfig()
    started = time.perf_counter()
    report = SolverReport(solver="mimat", thresholds=[], params={
        "cfg": dataclasses.asdict(mcfg)})

    n = cfg.n
    cp = cfg.cp_length
    pilots = cfg.pilots.indices
    ls_values = pilot_least_squares(rx_block, cfg)
    h_time = np.fft.ifft(estimate_linear(rx_block, cfg))
    beta = mcfg.beta
    if beta is None:
        floor = float(np.median(np.abs(h_time[:cp])))
        beta = max(0.25 * floor, 1e-12 * float(np.max(np.abs(h_time))), 1e-30)

    snr = mcfg.snr_linear
    support = None
    gains = None
    for i in range(1, mcfg.max_iters + 1):
        threshold = beta * math.exp(mcfg.alpha * i)
        magnitudes = np.abs(h_time[:cp])
        candidates = np.flatnonzero(magnitudes > threshold)
        if candidates.size > pilots.size:
            order = np.argsort(magnitudes[candidates])[::-1]
            candidates = np.sort(candidates[order[: pilots.size]])
        if candidates.size == 0:
            if support is not None:
                report.flags.append(f"threshold emptied the support at iteration {i}")
                break
            candidates = np.array([int(np.argmax(magnitudes))])
            report.flags.append("empty initial support: kept largest tap")
        fourier = np.exp(-2j * np.pi * np.outer(pilots, candidates) / n)
        snr_tap = snr / candidates.size
        gram = snr_tap * (fourier @ fourier.conj().T) + np.eye(pilots.size)
        tap_gains = snr_tap * (fourier.conj().T @ np.linalg.solve(gram, ls_values))
        h_time = np.zeros(n, dtype=np.complex128)
        h_time[candidates] = tap_gains
        report.iterations += 1
        report.thresholds.append(threshold)
        report.residuals.append(float(np.linalg.norm(fourier @ tap_gains - ls_values)))
        same = support is not None and np.array_equal(candidates, support) and (
            np.max(np.abs(tap_gains - gains)) < 1e-12 * max(np.max(np.abs(tap_gains)), 1e-30)
        )
        support, gains = candidates, tap_gains
        if same:
            report.converged = True
            break

    support, gains = _refine_support(ls_values, pilots, support, n, cp, report)
    profile = ChannelProfile(delays=support, gains=gains)
    response = channel_frequency_response(profile, cfg)
    report.wall_time = time.perf_counter() - started
    report.support = support
    return profile, response, report


def _refine_support(ls_values, pilots, support, n, cp, report,
                    prune_sigma=2.4, add_sigma=3.0):
    """Backward-prune / residual-augment the tap support, then LS re-solve.

    Drops the weakest tap while any falls below prune_sigma standard
    errors; adds the best out-of-support tap while the pilot residual
    supports one at add_sigma standard errors. Noiseless inputs leave an
    exact support untouched (the residual variance estimate collapses).
    """
    support = np.asarray(sorted(support), dtype=np.intp)
    for _ in range(4 * cp):
        fourier = np.exp(-2j * np.pi * np.outer(pilots, support) / n)
        gains, *_ = np.linalg.lstsq(fourier, ls_values, rcond=None)
        residual = ls_values - fourier @ gains
        dof = max(pilots.size - support.size, 1)
        sigma2 = max(float(np.linalg.norm(residual) ** 2 / dof), 1e-300)
        covariance = np.real(np.diag(np.linalg.pinv(fourier.conj().T @ fourier)))
        stderr = np.sqrt(np.maximum(covariance * sigma2, 0.0))
        margin = np.abs(gains) - prune_sigma * stderr
        if support.size > 1 and (margin < 0).any():
            support = np.delete(support, int(np.argmin(margin)))
            continue
        outside = np.setdiff1d(np.arange(cp), support)
        if outside.size == 0 or support.size >= pilots.size // 2:
            break
        probes = np.exp(-2j * np.pi * np.outer(pilots, outside) / n)
        scores = np.abs(probes.conj().T @ residual) ** 2 / pilots.size
        best = int(np.argmax(scores))
        if scores[best] > add_sigma**2 * sigma2:
            support = np.sort(np.append(support, outside[best]))
        else:
            break
    else:
        report.flags.append("support refinement budget exhausted")
    fourier = np.exp(-2j * np.pi * np.outer(pilots, support) / n)
    gains, *_ = np.linalg.lstsq(fourier, ls_values, rcond=None)
    return support, gains


def equalize(rx_block, channel_estimate, method="zf", snr_linear=None):
    """Per-carrier one-tap equalization, zero-forcing or MMSE.

    ZF flags carriers whose estimate is numerically zero (returned as the
    second value); MMSE needs the operating SNR.
    """
    h = np.asarray(channel_estimate, dtype=np.complex128)
    if method == "zf":
        dead = np.abs(h) < 1e-12
        safe = np.where(dead, 1.0, h)
        return np.where(dead, 0.0, rx_block / safe), np.flatnonzero(dead)
    if method == "mmse":
        if snr_linear is None:
            raise ValueError("MMSE equalization needs the SNR")
        weight = np.conj(h) / (np.abs(h) ** 2 + 1.0 / snr_linear)
        return weight * rx_block, np.array([], dtype=int)
    raise ValueError(f"unknown equalization method {method!r}")


def nearest_symbols(values, cfg):
    """Hard decisions: indices of the nearest constellation points."""
    table = cfg.symbols()
    distances = np.abs(values[:, None] - table[None, :])
    return np.argmin(distances, axis=1)


def ser_measure(tx_indices, rx_indices):
    """Symbol error rate with a binomial confidence half-width (95%)."""
    tx = np.asarray(tx_indices)
    rx = np.asarray(rx_indices)
    if tx.shape != rx.shape:
        raise ValueError("symbol streams must have equal length")
    count = tx.size
    errors = int(np.sum(tx != rx))
    rate = errors / count
    halfwidth = 1.96 * math.sqrt(max(rate * (1.0 - rate), 1e-300) / count)
    return rate, halfwidth


def qam16_awgn_ser_theory(es_n0_db):
    """Closed-form 16-QAM symbol error rate over AWGN."""
    gamma = 10 ** (es_n0_db / 10.0)
    q_arg = math.sqrt(0.2 * gamma)
    q_val = 0.5 * math.erfc(q_arg / math.sqrt(2.0))
    p_side = 1.5 * q_val
    return 1.0 - (1.0 - p_side) ** 2


class TimeVaryingChannel:
    """First-order Gauss-Markov drift of the tap gains, one step per symbol.

    rho close to 1 is slow fading; each tap keeps its initial power as the
    stationary variance.
    """

    def __init__(self, profile, rho):
        if not 0.0 <= rho <= 1.0:
            raise ValueError("rho must lie in [0, 1]")
        self.base = profile
        self.rho = rho
        self._gains = profile.gains.copy()

    def step(self, rng):
        scale = np.abs(self.base.gains)
        drift = rng.complex_normal(self._gains.size) * scale
        self._gains = self.rho * self._gains + math.sqrt(1.0 - self.rho**2) * drift
        return ChannelProfile(delays=self.base.delays, gains=self._gains)
