"""IEEE 802.15.3a Saleh-Venzuela multipath channel generation.

Clusters arrive as a Poisson process of rate Lambda; rays within each
cluster as a Poisson process of rate lambda.  Mean-square path gain
decays as exp(-T_l/Gamma) * exp(-tau/gamma); amplitudes are lognormal
with total dB std sqrt(sigma_xi^2 + sigma_zeta^2) and equiprobable sign.
Realizations are truncated at ``max_delay``, shifted so the first
arrival is at delay 0, and normalized to unit energy.

Lognormal shadowing is drawn and recorded in the realization but never
applied: unit-energy normalization (needed for a fair receiver
comparison under an Eb/N0 sweep) would cancel it anyway.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng
from .pulse import SampledWaveform

_LN10 = np.log(10.0)


@dataclass(frozen=True)
class SvParams:
    """Cluster/ray rates (1/ns), decay constants (ns) and fading stds (dB)."""

    cluster_rate: float
    ray_rate: float
    cluster_decay: float
    ray_decay: float
    sigma_cluster_db: float
    sigma_ray_db: float
    sigma_shadow_db: float
    max_delay: float

    def __post_init__(self):
        if min(self.cluster_rate, self.ray_rate, self.cluster_decay, self.ray_decay) <= 0:
            raise ValueError("rates and decay constants must be strictly positive")
        if min(self.sigma_cluster_db, self.sigma_ray_db, self.sigma_shadow_db) < 0:
            raise ValueError("lognormal sigmas must be nonnegative")
        if self.max_delay <= 0:
            raise ValueError("max_delay must be positive")


# 4-10 m NLOS and >10 m extreme-NLOS scenarios.  Default max_delay is the
# 70 / 100 grid-tick window at T_m = 0.625 ns; composite_response trims
# further to the 99%-energy span.
CM3 = SvParams(0.0067, 2.1, 14.0, 7.9, 3.3941, 3.3941, 3.0, max_delay=43.75)
CM4 = SvParams(0.0067, 2.1, 24.0, 12.0, 3.3941, 3.3941, 3.0, max_delay=62.5)

PRESETS = {"cm3": CM3, "cm4": CM4}


@dataclass(frozen=True)
class ChannelRealization:
    """Discrete multipath profile: signed gains at nondecreasing delays (ns)."""

    path_gains: np.ndarray
    path_delays: np.ndarray
    shadowing_db: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "path_gains", np.asarray(self.path_gains, dtype=float))
        object.__setattr__(self, "path_delays", np.asarray(self.path_delays, dtype=float))
        if len(self.path_gains) != len(self.path_delays):
            raise ValueError("gain/delay length mismatch")
        if len(self.path_delays) and np.any(np.diff(self.path_delays) < 0):
            raise ValueError("path delays must be nondecreasing")

    def energy(self) -> float:
        return float(np.sum(self.path_gains**2))


@dataclass(frozen=True)
class CompositeChannelDense:
    """Channel (x) pulse (x) matched filter, sampled on the T_m grid.

    ``start_tick`` locates the first retained sample relative to the
    first-arrival time origin; ``oversampling`` is the number of grid
    ticks per symbol.
    """

    samples: np.ndarray
    sample_interval: float
    start_tick: int
    oversampling: int
    span_symbols: int


def _poisson_times(rate: float, horizon: float, generator: np.random.Generator) -> np.ndarray:
    """Arrival times of a Poisson process on (0, horizon], origin excluded."""
    times = []
    t = 0.0
    while True:
        t += generator.exponential(1.0 / rate)
        if t > horizon:
            return np.asarray(times)
        times.append(t)


def _generate_paths(params: SvParams, generator: np.random.Generator):
    """Raw (delays, gains, cluster_times, ray_offsets), unnormalized.

    The first cluster and its first ray arrive at t = 0 by convention.
    """
    cluster_times = np.concatenate(
        ([0.0], _poisson_times(params.cluster_rate, params.max_delay, generator))
    )
    sigma2 = params.sigma_cluster_db**2 + params.sigma_ray_db**2
    sigma = np.sqrt(sigma2)

    delays, gains, clusters, offsets = [], [], [], []
    for t_l in cluster_times:
        ray_offsets = np.concatenate(
            ([0.0], _poisson_times(params.ray_rate, params.max_delay - t_l, generator))
        )
        # E[h^2] = exp(-T_l/Gamma) exp(-tau/gamma); lognormal amplitude in dB:
        # mean_db = 10*log10(E[h^2]) - sigma^2 ln10 / 20.
        mean_db = (
            -10.0 * t_l / params.cluster_decay - 10.0 * ray_offsets / params.ray_decay
        ) / _LN10 - sigma2 * _LN10 / 20.0
        x = generator.normal(mean_db, sigma)
        amp = 10.0 ** (x / 20.0)
        sign = generator.choice([-1.0, 1.0], size=len(ray_offsets))
        delays.extend(t_l + ray_offsets)
        gains.extend(sign * amp)
        clusters.extend([t_l] * len(ray_offsets))
        offsets.extend(ray_offsets)

    order = np.argsort(delays, kind="stable")
    return (
        np.asarray(delays)[order],
        np.asarray(gains)[order],
        np.asarray(clusters),
        np.asarray(offsets)[order],
    )


def generate_realization(params: SvParams, seed: int) -> ChannelRealization:
    """Draw one normalized channel realization, bit-exact in (params, seed)."""
    for attempt in range(100):
        generator = rng.stream(seed, attempt)
        delays, gains, _, _ = _generate_paths(params, generator)
        keep = delays <= params.max_delay
        delays, gains = delays[keep], gains[keep]
        if len(delays) == 0:
            continue
        shadow = float(generator.normal(0.0, params.sigma_shadow_db))
        delays = delays - delays[0]
        gains = gains / np.sqrt(np.sum(gains**2))
        return ChannelRealization(gains, delays, shadowing_db=shadow, seed=seed)
    raise RuntimeError("no paths within max_delay after 100 attempts; check SvParams")


def rms_delay_spread(r: ChannelRealization) -> float:
    """Second central moment of the power-delay profile, in ns."""
    p = r.path_gains**2
    p = p / np.sum(p)
    mean = np.sum(p * r.path_delays)
    second = np.sum(p * r.path_delays**2)
    return float(np.sqrt(max(second - mean**2, 0.0)))


def coherence_bandwidth(r: ChannelRealization) -> float:
    """1 / (5 * rms delay spread), in MHz.

    The 1/(5 sigma_tau) rule is a convention, not physics; it matches the
    quoted CM3/CM4 coherence bandwidths at their nominal delay spreads.
    """
    spread = rms_delay_spread(r)
    if spread == 0.0:
        return float("inf")
    return 1e3 / (5.0 * spread)


def composite_response(
    r: ChannelRealization,
    m: SampledWaveform,
    oversampling: int,
    energy_fraction: float = 0.99,
) -> CompositeChannelDense:
    """Superpose m(t - tau_p) weighted by path gains on the T_m grid.

    Path delays snap to the nearest grid tick (colliding paths add
    coherently).  The result is trimmed front and back to the smallest
    window holding at least ``energy_fraction`` of the total energy.
    """
    if len(r.path_gains) == 0:
        raise ValueError("empty channel realization")
    dt = m.sample_interval
    ticks = np.rint(r.path_delays / dt).astype(int)
    n = int(ticks[-1]) + len(m.samples)
    out = np.zeros(n)
    for g, k in zip(r.path_gains, ticks):
        out[k : k + len(m.samples)] += g * m.samples

    power = out**2
    total = np.sum(power)
    if total <= 0.0:
        raise ValueError("composite response has zero energy")
    # Smallest contiguous window retaining >= energy_fraction of the total.
    need = energy_fraction * total
    cum = np.concatenate(([0.0], np.cumsum(power)))
    lo, best = 0, (n, 0)
    for i in range(n):
        j = int(np.searchsorted(cum, cum[i] + need))
        if j > n:
            break
        if j - i < best[0]:
            best = (j - i, i)
    length, lo = best
    trimmed = out[lo : lo + length]

    span = int(np.ceil(len(trimmed) / oversampling))
    return CompositeChannelDense(
        samples=trimmed,
        sample_interval=dt,
        start_tick=m.start_tick + lo,
        oversampling=oversampling,
        span_symbols=span,
    )


class RealizationFormatError(ValueError):
    """Raised when a realization file does not parse."""


_HEADER_PREFIX = "# sv-realization v1 "


def dump_realization(r: ChannelRealization, path) -> None:
    """Write `# sv-realization v1 ...` header plus delay_ns,gain rows."""
    with open(path, "w") as fh:
        fh.write(f"{_HEADER_PREFIX}seed={r.seed} shadow_db={r.shadowing_db!r}\n")
        for tau, g in zip(r.path_delays, r.path_gains):
            fh.write(f"{float(tau)!r},{float(g)!r}\n")


def load_realization(path) -> ChannelRealization:
    """Read a realization file; exact round-trip with dump_realization."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith(_HEADER_PREFIX):
        raise RealizationFormatError(f"{path}:1: missing sv-realization v1 header")
    try:
        fields = dict(tok.split("=", 1) for tok in lines[0][len(_HEADER_PREFIX):].split())
        seed = int(fields["seed"])
        shadow = float(fields["shadow_db"])
    except (ValueError, KeyError) as exc:
        raise RealizationFormatError(f"{path}:1: bad header ({exc})") from exc

    delays, gains = [], []
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            d, g = line.split(",")
            delays.append(float(d))
            gains.append(float(g))
        except ValueError as exc:
            raise RealizationFormatError(f"{path}:{ln}: bad row {line!r}") from exc
        if len(delays) > 1 and delays[-1] < delays[-2]:
            raise RealizationFormatError(f"{path}:{ln}: delays must be nondecreasing")
    if not delays:
        raise RealizationFormatError(f"{path}: no paths")
    return ChannelRealization(gains, delays, shadowing_db=shadow, seed=seed)


_SV_KEYS = {
    "cluster_rate", "ray_rate", "cluster_decay", "ray_decay",
    "sigma_cluster_db", "sigma_ray_db", "sigma_shadow_db", "max_delay",
}


def load_sv_params(path) -> SvParams:
    """Read flat `key = value` S-V parameters (e.g. user CM1/CM2 files)."""
    values = {}
    with open(path) as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise RealizationFormatError(f"{path}:{ln}: expected key = value")
            key, _, val = line.partition("=")
            key = key.strip()
            if key not in _SV_KEYS:
                raise RealizationFormatError(f"{path}:{ln}: unknown key {key!r}")
            try:
                values[key] = float(val)
            except ValueError as exc:
                raise RealizationFormatError(f"{path}:{ln}: bad number {val!r}") from exc
    missing = _SV_KEYS - values.keys()
    if missing:
        raise RealizationFormatError(f"{path}: missing keys {sorted(missing)}")
    return SvParams(**values)
