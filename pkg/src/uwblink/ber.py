"""Bit-error-rate evaluation: Chernoff bound, exact ISI series, Monte Carlo.

The series method evaluates the exact error probability of a decision
variable q_0 + sum_{i!=0} q_i d_i + w, with iid +-1 interferers and
Gaussian noise, as a Fourier-series expansion; the Chernoff method maps
the residual MMSE to an exponential upper bound; Monte Carlo simulates
whole packets end to end at symbol rate (exact under the independent
finger-noise premise).  ``ensemble_ber`` averages any method over
independent channel realizations with schedule-independent RNG
substreams keyed by (master_seed, realization, snr).
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import channel as channel_mod
from . import equalizer as eq_mod
from . import rng
from . import txrx
from .pulse import PulseSpec, matched_autocorrelation, render_pulse

METHODS = ("monte-carlo", "chernoff", "series")
RECEIVER_KINDS = ("rake", "mmse", "rake-le", "rake-dfe")


@dataclass(frozen=True)
class SeriesParams:
    """Accuracy knobs of the series method.

    ``omega`` of None selects the step adaptively from the decision
    variable's range; ``max_odd_terms`` caps the number of odd harmonics.
    The cap is sized for low-noise operating points, where the Gaussian
    damping factor needs z ~ 1/(omega * sigma_w) harmonics to bite.
    """

    max_odd_terms: int = 500_001
    omega: float | None = None
    tolerance: float = 1e-12

    def __post_init__(self):
        if self.max_odd_terms < 1:
            raise ValueError("max_odd_terms must be >= 1")
        if self.omega is not None and self.omega <= 0:
            raise ValueError("omega must be positive")


@dataclass(frozen=True)
class BerPoint:
    snr_db: float
    ber: float
    method: str
    trials: int = 0
    errors: int = 0
    censored: bool = False

    def __post_init__(self):
        if not 0.0 <= self.ber <= 1.0:
            raise ValueError("ber must lie in [0, 1]")
        if self.errors > self.trials:
            raise ValueError("errors cannot exceed trials")


@dataclass(frozen=True)
class BerCurve:
    """Ensemble-averaged points plus the per-realization BER matrix."""

    points: tuple[BerPoint, ...]
    per_realization: np.ndarray  # shape (n_realizations, n_snr)

    def snr_grid(self) -> np.ndarray:
        return np.array([p.snr_db for p in self.points])

    def bers(self) -> np.ndarray:
        return np.array([p.ber for p in self.points])


def snr_to_n0(snr_db: float) -> float:
    """Eb/N0 in dB to N0, with Eb = 1 (unit-energy pulse and channel)."""
    return 10.0 ** (-snr_db / 10.0)


def chernoff_ber(j_min: float, sigma_d2: float = 1.0) -> float:
    """exp(-(1 - J/sigma_d^2) / (2 J/sigma_d^2)), clamped to (0, 1]."""
    if j_min <= 0.0:
        return 0.0
    ratio = j_min / sigma_d2
    if ratio >= 1.0:
        return 1.0
    return float(np.exp(-(1.0 - ratio) / (2.0 * ratio)))


def series_ber(resp: eq_mod.OverallResponse, params: SeriesParams = SeriesParams()) -> float:
    """Exact BER of the overall response by odd-harmonic series expansion."""
    q0 = resp.q0
    if q0 <= 0.0:
        raise ValueError("q_0 must be positive")
    sigma_w = float(np.sqrt(resp.sigma_w2))
    if sigma_w <= 0.0:
        # Degenerate noiseless case: error iff ISI can flip the sign.
        isi = resp.isi_taps()
        return 0.0 if np.sum(np.abs(isi)) < q0 else _enumerate_ber(q0, isi, 0.0)
    isi = resp.isi_taps()
    isi = isi[isi != 0.0]
    w = params.omega
    if w is None:
        span = q0 + float(np.sum(np.abs(isi))) + 5.0 * sigma_w
        w = np.pi / (4.0 * span)

    total = 0.0
    term = np.inf
    chunk = 1024
    for start in range(0, params.max_odd_terms, chunk):
        count = min(chunk, params.max_odd_terms - start)
        z = 1.0 + 2.0 * (start + np.arange(count))
        zw = z * w
        terms = np.exp(-0.5 * zw**2 * resp.sigma_w2) * np.sin(zw * q0) / z
        if len(isi):
            terms *= np.prod(np.cos(np.outer(zw, isi)), axis=1)
        total += float(np.sum(terms))
        term = float(terms[-1])
        if abs(term) < params.tolerance:
            p = 0.5 - (2.0 / np.pi) * total
            return float(min(max(p, 0.0), 0.5))
    raise RuntimeError(
        f"series did not converge in {params.max_odd_terms} odd terms "
        f"(last term {term:.3e})"
    )


def _enumerate_ber(q0: float, isi: np.ndarray, sigma_w: float) -> float:
    """Brute-force 2^m enumeration of ISI patterns (small m only)."""
    from scipy.stats import norm

    isi = np.asarray(isi, dtype=float)
    m = len(isi)
    if m > 24:
        raise ValueError("enumeration oracle limited to 24 interferers")
    total = 0.0
    for mask in range(1 << m):
        signs = np.array([1.0 if mask >> i & 1 else -1.0 for i in range(m)])
        margin = q0 + float(np.dot(signs, isi))
        if sigma_w > 0.0:
            total += norm.sf(margin / sigma_w)
        else:
            total += 1.0 if margin < 0.0 else (0.5 if margin == 0.0 else 0.0)
    return total / (1 << m)


@dataclass(frozen=True)
class ReceiverChain:
    """Everything needed to simulate detection for one channel realization."""

    comp: txrx.CompositeChannel
    noise_scale: float
    design: eq_mod.EqualizerDesign
    frame: txrx.FrameSpec


def monte_carlo_ber(
    chain: ReceiverChain,
    snr_db: float,
    min_errors: int = 100,
    max_symbols: int = 10_000_000,
    seed: int = 0,
) -> BerPoint:
    """Packet-by-packet simulated detection until min_errors or max_symbols.

    Only payload symbols are decided and counted; the training prefix and
    the K1+K2 zero-padded edge symbols are excluded.
    """
    if min_errors < 1:
        raise ValueError("min_errors must be >= 1")
    frame = chain.frame
    if max_symbols < frame.length:
        raise ValueError("max_symbols smaller than one packet")
    n0 = snr_to_n0(snr_db)
    sigma = np.sqrt(n0 / 2.0 * chain.noise_scale)
    comp = chain.comp
    cf = comp.alpha

    errors = 0
    decided = 0
    packet = 0
    while errors < min_errors and decided + frame.length <= max_symbols:
        generator = rng.stream(seed, packet)
        d = generator.choice([-1.0, 1.0], size=frame.length)
        # y(n) = sum_k alpha_k d(n-k): conv index n + n1 (zero-padded edges)
        y = np.convolve(d, cf)[comp.n1 : comp.n1 + frame.length]
        if sigma > 0.0:
            y = y + generator.normal(0.0, sigma, size=frame.length)
        dec = eq_mod.detect(y, chain.design)
        pay = slice(frame.training_symbols, frame.length)
        errors += int(np.sum(dec[pay] != d[pay]))
        decided += frame.payload_symbols
        packet += 1

    ber = errors / decided if decided else 0.0
    return BerPoint(
        snr_db=snr_db,
        ber=ber,
        method="monte-carlo",
        trials=decided,
        errors=errors,
        censored=errors < min_errors,
    )


@dataclass(frozen=True)
class ReceiverConfig:
    """Receiver topology: finger count, tap spans and equalizer kind."""

    kind: str = "rake-le"
    fingers: int = 10
    k1: int = 10
    k2: int = 10

    def __post_init__(self):
        if self.kind not in RECEIVER_KINDS:
            raise ValueError(f"unknown receiver kind {self.kind!r}")
        if self.fingers < 1:
            raise ValueError("fingers must be >= 1")
        if self.k1 < 0 or self.k2 < 0:
            raise ValueError("tap counts must be nonnegative")


def build_chain(
    realization: channel_mod.ChannelRealization,
    receiver: ReceiverConfig,
    m,
    frame: txrx.FrameSpec,
):
    """Compose channel, Rake plan and composite coefficients for a receiver.

    Returns (comp, noise_scale).  A pure-MMSE receiver uses a single
    center-tap (strongest path) front end; pure Rake uses no equalizer.
    """
    oversampling = int(round(frame.symbol_duration / m.sample_interval))
    dense = channel_mod.composite_response(realization, m, oversampling)
    fingers = 1 if receiver.kind == "mmse" else receiver.fingers
    plan = txrx.select_fingers(dense, fingers)
    comp = txrx.composite_coefficients(dense, plan)
    return comp, txrx.rake_noise_scale(plan)


def design_for(
    receiver: ReceiverConfig,
    comp: txrx.CompositeChannel,
    noise_scale: float,
    n0: float,
) -> eq_mod.EqualizerDesign:
    if receiver.kind == "rake":
        return eq_mod.identity_design(comp, noise_scale, n0)
    if receiver.kind == "rake-dfe":
        return eq_mod.mmse_dfe_design(comp, noise_scale, n0, receiver.k1, receiver.k2)
    return eq_mod.mmse_le_design(comp, noise_scale, n0, receiver.k1, receiver.k2)


def _realization_bers(args) -> np.ndarray:
    """Per-SNR BER for one channel realization (worker function)."""
    (params, receiver, snr_grid, method, master_seed, ridx, pulse_spec,
     frame, mc_min_errors, mc_max_symbols) = args
    m = matched_autocorrelation(render_pulse(pulse_spec))
    realization = channel_mod.generate_realization(params, rng.child_seed(master_seed, 1, ridx))
    comp, noise_scale = build_chain(realization, receiver, m, frame)
    out = np.empty(len(snr_grid))
    for sidx, snr_db in enumerate(snr_grid):
        n0 = snr_to_n0(snr_db)
        design = design_for(receiver, comp, noise_scale, n0)
        if method == "chernoff":
            out[sidx] = chernoff_ber(design.j_min, design.sigma_d2)
        elif method == "series":
            resp = eq_mod.overall_response(design, comp, noise_scale, n0)
            out[sidx] = series_ber(resp)
        else:
            chain = ReceiverChain(comp, noise_scale, design, frame)
            point = monte_carlo_ber(
                chain,
                snr_db,
                min_errors=mc_min_errors,
                max_symbols=mc_max_symbols,
                seed=rng.child_seed(master_seed, 2, ridx, sidx),
            )
            out[sidx] = point.ber
    return out


def ensemble_ber(
    params: channel_mod.SvParams,
    receiver: ReceiverConfig,
    snr_grid,
    n_realizations: int,
    method: str = "series",
    master_seed: int = 0,
    pulse_spec: PulseSpec = PulseSpec(),
    frame: txrx.FrameSpec = txrx.FrameSpec(),
    mc_min_errors: int = 100,
    mc_max_symbols: int = 10_000_000,
    workers: int = 1,
) -> BerCurve:
    """Average per-channel BER over independent realizations.

    Results are bit-identical for any ``workers`` value: substreams are
    keyed by (master_seed, realization, snr) and the average is taken in
    realization order.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    if n_realizations < 1:
        raise ValueError("n_realizations must be >= 1")
    snr_grid = np.asarray(snr_grid, dtype=float)
    jobs = [
        (params, receiver, snr_grid, method, master_seed, ridx, pulse_spec,
         frame, mc_min_errors, mc_max_symbols)
        for ridx in range(n_realizations)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_realization_bers, jobs))
    else:
        rows = [_realization_bers(job) for job in jobs]
    per = np.vstack(rows)
    mean = per.mean(axis=0)
    points = tuple(
        BerPoint(snr_db=float(s), ber=float(b), method=method)
        for s, b in zip(snr_grid, mean)
    )
    return BerCurve(points=points, per_realization=per)


def snr_at_ber(curve: BerCurve, target: float = 1e-3) -> float:
    """SNR (dB) where the curve crosses ``target``, log-linear interpolated.

    Returns nan if the curve never crosses the target.
    """
    snr = curve.snr_grid()
    ber = curve.bers()
    for i in range(len(ber) - 1):
        hi, lo = ber[i], ber[i + 1]
        if hi >= target > lo and lo > 0.0:
            frac = (np.log(target) - np.log(hi)) / (np.log(lo) - np.log(hi))
            return float(snr[i] + frac * (snr[i + 1] - snr[i]))
        if hi == target:
            return float(snr[i])
    return float("nan")


CSV_HEADER = ["snr_db", "ber", "method", "trials", "errors", "censored"]


def write_curve_csv(points, path) -> None:
    """Write BER points in the canonical snr_db,ber,... CSV layout."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for p in points:
            writer.writerow(
                [repr(p.snr_db), repr(p.ber), p.method, p.trials, p.errors,
                 int(p.censored)]
            )


def read_curve_csv(path) -> list[BerPoint]:
    """Parse a BER CSV written by write_curve_csv (lossless round-trip)."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_HEADER:
            raise ValueError(f"{path}: unexpected CSV header {reader.fieldnames}")
        for row in reader:
            out.append(
                BerPoint(
                    snr_db=float(row["snr_db"]),
                    ber=float(row["ber"]),
                    method=row["method"],
                    trials=int(row["trials"]),
                    errors=int(row["errors"]),
                    censored=bool(int(row["censored"])),
                )
            )
    return out
