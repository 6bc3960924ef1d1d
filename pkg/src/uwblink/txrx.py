"""BPSK framing, matched-filter reception and Rake combining.

The central identity this module maintains: the noiseless Rake output is
exactly a symbol-rate FIR filter whose taps are the composite
coefficients alpha_k = sum_l beta_l * h_dense(k*T_s + tau_l).  Noise is
injected as white N(0, N0/2) directly at the T_m-spaced matched-filter
output samples, so noise at distinct fingers is independent and the
combined noise variance is (N0/2) * sum(beta^2).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import rng
from .channel import CompositeChannelDense
from .pulse import SampledWaveform

# alpha_k below this fraction of alpha_0 are dropped from the ISI span.
DEFAULT_ALPHA_THRESHOLD = 1e-6


@dataclass(frozen=True)
class FrameSpec:
    """Packet structure: training prefix followed by payload symbols."""

    payload_symbols: int = 2048
    training_symbols: int = 512
    symbol_duration: float = 5.0

    def __post_init__(self):
        if self.payload_symbols < 1 or self.training_symbols < 0:
            raise ValueError("frame lengths must be positive")

    @property
    def length(self) -> int:
        return self.payload_symbols + self.training_symbols


@dataclass(frozen=True)
class RakePlan:
    """Selected finger positions (grid ticks) and MRC weights."""

    finger_ticks: np.ndarray
    weights: np.ndarray
    truncated: bool = False
    t0: int = 0  # best-sampling-time offset, fixed at zero

    def __post_init__(self):
        object.__setattr__(self, "finger_ticks", np.asarray(self.finger_ticks, dtype=int))
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))
        if len(self.finger_ticks) != len(self.weights):
            raise ValueError("finger/weight length mismatch")
        if len(np.unique(self.finger_ticks)) != len(self.finger_ticks):
            raise ValueError("finger positions must be distinct")
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite")

    @property
    def num_fingers(self) -> int:
        return len(self.weights)


@dataclass(frozen=True)
class CompositeChannel:
    """Symbol-spaced coefficients alpha_{-n1..n2} of channel+pulse+Rake."""

    alpha: np.ndarray
    n1: int  # pre-cursor symbols (k < 0)
    n2: int  # post-cursor symbols (k > 0)

    def __post_init__(self):
        object.__setattr__(self, "alpha", np.asarray(self.alpha, dtype=float))
        if len(self.alpha) != self.n1 + self.n2 + 1:
            raise ValueError("alpha length must be n1 + n2 + 1")

    @property
    def alpha0(self) -> float:
        return float(self.alpha[self.n1])

    def coefficient(self, k: int) -> float:
        """alpha_k for k in -n1..n2 (0 outside the span)."""
        if -self.n1 <= k <= self.n2:
            return float(self.alpha[k + self.n1])
        return 0.0

    def autocorrelation(self, lag: int) -> float:
        """sum_k alpha_k * alpha_{k+lag}."""
        a = self.alpha
        lag = abs(lag)
        if lag >= len(a):
            return 0.0
        return float(np.dot(a[lag:], a[: len(a) - lag]))


def generate_frame(spec: FrameSpec, seed) -> np.ndarray:
    """I.i.d. equiprobable +-1 symbols; training prefix first."""
    generator = seed if isinstance(seed, np.random.Generator) else rng.stream(seed)
    return generator.choice([-1.0, 1.0], size=spec.length)


def matched_filter_output(
    symbols: np.ndarray,
    dense: CompositeChannelDense,
    n0: float,
    seed=None,
) -> SampledWaveform:
    """r(t) = sum_k d(k) h_dense(t - k T_s) plus white N(0, N0/2) samples."""
    if n0 < 0:
        raise ValueError("N0 must be nonnegative")
    symbols = np.asarray(symbols, dtype=float)
    os_ = dense.oversampling
    up = np.zeros((len(symbols) - 1) * os_ + 1)
    up[::os_] = symbols
    out = np.convolve(up, dense.samples)
    if n0 > 0:
        generator = seed if isinstance(seed, np.random.Generator) else rng.stream(seed)
        out = out + generator.normal(0.0, np.sqrt(n0 / 2.0), size=len(out))
    return SampledWaveform(out, dense.sample_interval, start_tick=dense.start_tick)


def select_fingers(dense: CompositeChannelDense, num_fingers: int) -> RakePlan:
    """MRC plan over the ``num_fingers`` largest-|h| grid positions.

    Ties break toward smaller delay.  Asking for more fingers than there
    are nonzero samples returns all of them with ``truncated=True``.
    """
    if num_fingers < 1:
        raise ValueError("need at least one finger")
    h = dense.samples
    nonzero = np.flatnonzero(h != 0.0)
    truncated = False
    if num_fingers > len(nonzero):
        idx = nonzero
        truncated = True
    else:
        order = np.argsort(-np.abs(h), kind="stable")
        idx = np.sort(order[:num_fingers])
    return RakePlan(
        finger_ticks=idx + dense.start_tick,
        weights=h[idx],
        truncated=truncated,
    )


def rake_combine(
    waveform: SampledWaveform,
    plan: RakePlan,
    frame_len: int,
    oversampling: int,
) -> np.ndarray:
    """y[n] = sum_l beta_l * r(n T_s + tau_l), one output per symbol."""
    idx0 = plan.finger_ticks - waveform.start_tick
    n_samples = len(waveform.samples)
    last = (frame_len - 1) * oversampling
    if np.any(idx0 < 0) or np.any(idx0 + last >= n_samples):
        raise ValueError("finger delay out of waveform range for this frame length")
    y = np.zeros(frame_len)
    for beta, i0 in zip(plan.weights, idx0):
        y += beta * waveform.samples[i0 : i0 + last + 1 : oversampling]
    return y


def composite_coefficients(
    dense: CompositeChannelDense,
    plan: RakePlan,
    threshold: float = DEFAULT_ALPHA_THRESHOLD,
) -> CompositeChannel:
    """alpha_k = sum_l beta_l * h_dense(k T_s + tau_l), trimmed by threshold.

    The span -n1..n2 keeps every coefficient with |alpha_k| above
    ``threshold * |alpha_0|``.
    """
    h = dense.samples
    os_ = dense.oversampling
    kmax = int(np.ceil(len(h) / os_)) + 1
    ks = np.arange(-kmax, kmax + 1)
    alpha = np.zeros(len(ks))
    for beta, tick in zip(plan.weights, plan.finger_ticks):
        idx = ks * os_ + (tick - dense.start_tick)
        valid = (idx >= 0) & (idx < len(h))
        alpha[valid] += beta * h[idx[valid]]

    a0 = alpha[kmax]
    if a0 <= 0.0:
        raise ValueError("alpha_0 <= 0: plan is not MRC-consistent with this channel")
    keep = np.abs(alpha) > threshold * a0
    keep[kmax] = True
    lo = int(np.argmax(keep))
    hi = len(keep) - 1 - int(np.argmax(keep[::-1]))
    return CompositeChannel(alpha=alpha[lo : hi + 1], n1=kmax - lo, n2=hi - kmax)


def rake_noise_scale(plan: RakePlan) -> float:
    """sum_l beta_l^2 — multiplies N0/2 in the combined noise variance."""
    return float(np.sum(plan.weights**2))
