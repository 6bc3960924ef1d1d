"""Transmit pulse shapes and the matched-filter autocorrelation.

Everything downstream (channel compositing, Rake sampling, equalizer
design) works on a uniform grid of spacing ``T_m = T_s / oversampling``.
Pulses are rendered on that grid, normalized to unit energy, and turned
into the receiver-side autocorrelation ``m(t) = p(t) * p(-t)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PULSE_KINDS = ("gaussian-doublet", "rrc", "user-samples")

# Truncating the RRC span may only leave this fraction of pulse energy in
# the outermost symbol at each end.  An RRC tail decays as t^-3, so the
# default 8-symbol span carries ~1e-4 there; the limit guards against
# gross misconfiguration (tiny spans, rolloff ~ 0), not ideal truncation.
_TAIL_ENERGY_LIMIT = 1e-3


@dataclass(frozen=True)
class PulseSpec:
    """Parameters of the transmit pulse.

    ``epsilon`` is the Gaussian-doublet width parameter (ns), ``rolloff``
    the RRC excess-bandwidth factor, ``span_symbols`` the truncation
    length, ``oversampling`` the number of grid samples per symbol and
    ``symbol_duration`` the symbol period T_s in ns.
    """

    kind: str = "rrc"
    symbol_duration: float = 5.0
    oversampling: int = 8
    span_symbols: int = 8
    rolloff: float = 0.5
    epsilon: float = 0.5
    user_samples: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in PULSE_KINDS:
            raise ValueError(f"unknown pulse kind {self.kind!r}")
        if self.oversampling < 1:
            raise ValueError("oversampling must be >= 1")
        if self.span_symbols < 1:
            raise ValueError("span_symbols must be >= 1")
        if not 0.0 <= self.rolloff <= 1.0:
            raise ValueError("rolloff must lie in [0, 1]")
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")
        if self.symbol_duration <= 0.0:
            raise ValueError("symbol_duration must be positive")
        if self.kind == "user-samples" and not self.user_samples:
            raise ValueError("user-samples pulse needs a nonempty sample list")

    @property
    def sample_interval(self) -> float:
        """Grid spacing T_m = T_s / oversampling, in ns."""
        return self.symbol_duration / self.oversampling


@dataclass(frozen=True)
class SampledWaveform:
    """A real waveform on the uniform T_m grid.

    ``start_tick`` locates ``samples[0]`` at ``start_tick * sample_interval``
    relative to t = 0, so shifted/accumulated waveforms keep alignment.
    """

    samples: np.ndarray
    sample_interval: float
    start_tick: int = 0

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=float))
        if self.sample_interval <= 0.0:
            raise ValueError("sample_interval must be positive")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("waveform samples must be finite")

    @property
    def times(self) -> np.ndarray:
        return (self.start_tick + np.arange(len(self.samples))) * self.sample_interval

    def energy(self) -> float:
        return float(np.sum(self.samples**2) * self.sample_interval)


def gaussian_doublet(t, epsilon: float):
    """Second derivative of a Gaussian: [1 - 4pi(t/eps)^2] exp(-2pi(t/eps)^2)."""
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    x = np.asarray(t, dtype=float) / epsilon
    out = (1.0 - 4.0 * np.pi * x**2) * np.exp(-2.0 * np.pi * x**2)
    return out if out.ndim else float(out)


def _rrc_impulse(t: np.ndarray, ts: float, beta: float) -> np.ndarray:
    """Root-raised-cosine impulse response (unnormalized, peak at t=0)."""
    t = t / ts
    out = np.empty_like(t)
    if beta == 0.0:
        out = np.sinc(t)
        return out
    # Remove the two singular points and fill them with their limits.
    sing = np.isclose(np.abs(t), 1.0 / (4.0 * beta), atol=1e-12)
    zero = np.isclose(t, 0.0, atol=1e-15)
    safe = ~(sing | zero)
    ts_ = t[safe]
    num = np.sin(np.pi * ts_ * (1 - beta)) + 4 * beta * ts_ * np.cos(np.pi * ts_ * (1 + beta))
    den = np.pi * ts_ * (1 - (4 * beta * ts_) ** 2)
    out[safe] = num / den
    out[zero] = 1.0 - beta + 4.0 * beta / np.pi
    out[sing] = (beta / np.sqrt(2.0)) * (
        (1 + 2 / np.pi) * np.sin(np.pi / (4 * beta))
        + (1 - 2 / np.pi) * np.cos(np.pi / (4 * beta))
    )
    return out


def render_pulse(spec: PulseSpec) -> SampledWaveform:
    """Sample the pulse over its span and normalize to unit energy.

    The grid is symmetric about t = 0 so rendered pulses are exactly even.
    """
    dt = spec.sample_interval
    half = (spec.span_symbols * spec.oversampling) // 2
    ticks = np.arange(-half, half + 1)
    t = ticks * dt

    if spec.kind == "gaussian-doublet":
        s = gaussian_doublet(t, spec.epsilon)
    elif spec.kind == "rrc":
        s = _rrc_impulse(t, spec.symbol_duration, spec.rolloff)
    else:
        s = np.asarray(spec.user_samples, dtype=float)
        if len(s) != len(ticks):
            # User samples define their own (odd) grid centered on zero.
            if len(s) % 2 == 0:
                raise ValueError("user-samples length must be odd (centered grid)")
            half = len(s) // 2
            ticks = np.arange(-half, half + 1)

    energy = float(np.sum(s**2) * dt)
    if energy <= 0.0:
        raise ValueError("pulse has zero energy")
    s = s / np.sqrt(energy)

    # Force exact even symmetry: kill asymmetric floating-point residue.
    s = 0.5 * (s + s[::-1])
    s = s / np.sqrt(np.sum(s**2) * dt)

    if spec.kind == "rrc":
        tail = np.sum(s[: spec.oversampling] ** 2) + np.sum(s[-spec.oversampling:] ** 2)
        if tail * dt > _TAIL_ENERGY_LIMIT:
            raise ValueError(
                f"RRC span of {spec.span_symbols} symbols truncates "
                f"{tail * dt:.2e} of the pulse energy; increase span_symbols"
            )

    return SampledWaveform(s, dt, start_tick=int(ticks[0]))


def matched_autocorrelation(pulse: SampledWaveform) -> SampledWaveform:
    """Deterministic autocorrelation m(t) = p(t) * p(-t) on the same grid.

    For a unit-energy pulse the zero-lag value is 1.
    """
    s = pulse.samples
    if len(s) == 0:
        raise ValueError("empty pulse")
    m = np.correlate(s, s, mode="full") * pulse.sample_interval
    m = 0.5 * (m + m[::-1])  # autocorrelation is even; enforce exactly
    half = len(s) - 1
    return SampledWaveform(m, pulse.sample_interval, start_tick=-half)


def dump_waveform(w: SampledWaveform, path) -> None:
    """Write a two-column (time_ns, amplitude) text file."""
    with open(path, "w") as fh:
        for t, a in zip(w.times, w.samples):
            fh.write(f"{float(t)!r},{float(a)!r}\n")
