"""Acceptance gate: one test per release criterion.

Each test states its numeric target and tolerance inline; helper code
re-derives expected values independently of the library internals
(closed-form oracles, brute-force enumeration, quadratic minimization)
wherever the criterion calls for an oracle.
"""

import numpy as np
import pytest
from scipy.stats import norm

from uwblink import ber, channel, equalizer as eq, rng, txrx
from uwblink.ber import BerCurve, BerPoint
from uwblink.cli import ExperimentConfig, run_experiment
from uwblink.pulse import PulseSpec, matched_autocorrelation, render_pulse
from uwblink.txrx import CompositeChannel, FrameSpec


# --------------------------------------------------------------------------
# helpers


def _row_curve(grid, bers):
    points = tuple(
        BerPoint(snr_db=float(s), ber=float(min(max(b, 0.0), 1.0)), method="series")
        for s, b in zip(grid, bers)
    )
    return BerCurve(points, np.empty((0, len(grid))))


def _median_gain(curve_lo, curve_hi, target=1e-3):
    """Median over realizations of (crossing of hi-BER rx) - (crossing of lo)."""
    grid = curve_lo.snr_grid()
    gains = []
    for row_lo, row_hi in zip(curve_lo.per_realization, curve_hi.per_realization):
        a = ber.snr_at_ber(_row_curve(grid, row_lo), target)
        b = ber.snr_at_ber(_row_curve(grid, row_hi), target)
        if np.isfinite(a) and np.isfinite(b):
            gains.append(b - a)
    assert len(gains) >= 25, "too few realizations cross the target BER"
    return float(np.median(gains))


def _oracle_cost(v, n_ff, k1, comp, noise_scale, n0, k2):
    """E[(sum_r c_r y(n-r) - sum_i b_i d(n-i) - d(n))^2] from first principles.

    Expands the error as a linear combination of iid +-1 symbols plus
    independent Gaussian noise; independent of the library's Wiener
    machinery (only the composite taps alpha define the model).
    """
    c, b = v[:n_ff], v[n_ff:]
    coeff = {}
    for r_idx, cr in enumerate(c):
        r = r_idx - k1  # taps ordered c_{-K1}..c_{K2 or 0}
        for k in range(-comp.n1, comp.n2 + 1):
            lag = r + k
            coeff[lag] = coeff.get(lag, 0.0) + cr * comp.alpha[k + comp.n1]
    coeff[0] = coeff.get(0, 0.0) - 1.0
    for i, bi in enumerate(b, start=1):
        coeff[i] = coeff.get(i, 0.0) - bi
    signal = sum(val * val for val in coeff.values())
    return signal + n0 / 2.0 * noise_scale * float(np.sum(c**2))


def _oracle_minimize(n_ff, k1, comp, noise_scale, n0, k2, n_fb):
    """Exact minimizer of the quadratic cost via finite differences.

    For a quadratic, central differences and the second-difference
    Hessian are exact for any step, so this solves the problem without
    touching the analytic normal equations.
    """
    dim = n_ff + n_fb

    def j(v):
        return _oracle_cost(np.asarray(v, dtype=float), n_ff, k1, comp,
                            noise_scale, n0, k2)

    e = np.eye(dim)
    j0 = j(np.zeros(dim))
    g0 = np.array([(j(e[i]) - j(-e[i])) / 2.0 for i in range(dim)])
    h = np.empty((dim, dim))
    je = np.array([j(e[i]) for i in range(dim)])
    for i in range(dim):
        for k in range(i, dim):
            h[i, k] = h[k, i] = j(e[i] + e[k]) - je[i] - je[k] + j0
    v = np.linalg.solve(h, -g0)
    return v, j(v)


# --------------------------------------------------------------------------
# cached experiment sweeps (shared between criteria 6 and 7)

_GRID = np.arange(0.0, 40.1, 2.0)
_DOUBLET = PulseSpec(kind="gaussian-doublet", epsilon=0.5)
_FRAME = FrameSpec()


def _sweep(params, kind, fingers, k1, k2, pulse_spec, n=50, seed=11, grid=_GRID):
    rx = ber.ReceiverConfig(kind, fingers=fingers, k1=k1, k2=k2)
    return ber.ensemble_ber(
        params, rx, grid, n, method="series", master_seed=seed,
        pulse_spec=pulse_spec, frame=_FRAME,
    )


@pytest.fixture(scope="module")
def cm3_doublet():
    return {
        "rake": _sweep(channel.CM3, "rake", 10, 10, 10, _DOUBLET),
        "rake-le": _sweep(channel.CM3, "rake-le", 10, 10, 10, _DOUBLET),
    }


@pytest.fixture(scope="module")
def cm4_doublet():
    return {
        "rake": _sweep(channel.CM4, "rake", 10, 10, 10, _DOUBLET),
        "rake-le": _sweep(channel.CM4, "rake-le", 10, 10, 10, _DOUBLET),
    }


# --------------------------------------------------------------------------
# criteria


def test_criterion_1_awgn_baseline():
    """MC BER on a single-path channel within 3 binomial sigma of Q(sqrt(2 Eb/N0))."""
    comp = CompositeChannel(np.array([1.0]), 0, 0)
    frame = FrameSpec(payload_symbols=10_000, training_symbols=0)
    design = eq.identity_design(comp, 1.0, 1.0)
    chain = ber.ReceiverChain(comp, 1.0, design, frame)
    for snr_db in (0.0, 2.0, 4.0, 6.0):
        point = ber.monte_carlo_ber(
            chain, snr_db, min_errors=10**9, max_symbols=1_010_000,
            seed=rng.child_seed(1, 0, int(snr_db)),
        )
        expected = norm.sf(np.sqrt(2.0 * 10.0 ** (snr_db / 10.0)))
        sigma = np.sqrt(expected * (1.0 - expected) / point.trials)
        assert point.trials >= 10**6
        assert abs(point.ber - expected) <= 3.0 * sigma, (
            f"{snr_db} dB: {point.ber:.3e} vs {expected:.3e} (3sig {3*sigma:.2e})"
        )


def test_criterion_2_mmse_oracle_equivalence():
    """Closed-form LE/DFE match an independent quadratic minimizer.

    Taps within 1e-6, j_min within 1e-8, over 100 random channels.
    """
    for trial in range(100):
        g = rng.stream(200, trial)
        n1 = int(g.integers(0, 5))
        n2 = int(g.integers(0, 9 - n1 - 1))
        alpha = g.normal(0.0, 0.4, size=n1 + n2 + 1)
        alpha[n1] = 1.0
        alpha /= np.linalg.norm(alpha)
        comp = CompositeChannel(alpha, n1, n2)
        noise_scale = float(g.uniform(0.5, 2.0))
        n0 = float(g.uniform(0.01, 0.5))
        k1, k2 = int(g.integers(0, 6)), int(g.integers(0, 6))

        le = eq.mmse_le_design(comp, noise_scale, n0, k1, k2)
        v, jv = _oracle_minimize(k1 + k2 + 1, k1, comp, noise_scale, n0, k2, 0)
        assert np.max(np.abs(le.feedforward - v)) < 1e-6
        assert abs(le.j_min - jv) < 1e-8

        dfe = eq.mmse_dfe_design(comp, noise_scale, n0, k1, k2)
        v, jv = _oracle_minimize(k1 + 1, k1, comp, noise_scale, n0, k2, k2)
        assert np.max(np.abs(dfe.feedforward - v[: k1 + 1])) < 1e-6
        assert np.max(np.abs(dfe.feedback - v[k1 + 1 :])) < 1e-6 if k2 else True
        assert abs(dfe.j_min - jv) < 1e-8


def test_criterion_3_jmin_matches_empirical_mse():
    """Predicted j_min within 2% of measured MSE over 1e6 symbols."""
    n_sym = 1_000_000
    for trial in range(20):
        g = rng.stream(300, trial)
        n1 = int(g.integers(0, 4))
        n2 = int(g.integers(0, 4))
        alpha = g.normal(0.0, 0.3, size=n1 + n2 + 1)
        alpha[n1] = 1.0
        alpha /= np.linalg.norm(alpha)
        comp = CompositeChannel(alpha, n1, n2)
        noise_scale = float(g.uniform(0.5, 2.0))
        n0 = float(g.uniform(0.02, 0.5))
        k1, k2 = int(g.integers(1, 7)), int(g.integers(1, 7))
        kind = "dfe" if trial % 2 else "le"
        if kind == "le":
            design = eq.mmse_le_design(comp, noise_scale, n0, k1, k2)
        else:
            design = eq.mmse_dfe_design(comp, noise_scale, n0, k1, k2)

        d = g.choice([-1.0, 1.0], size=n_sym)
        y = np.convolve(d, alpha)[n1 : n1 + n_sym]
        y = y + g.normal(0.0, np.sqrt(n0 / 2.0 * noise_scale), size=n_sym)
        soft = np.convolve(y, design.feedforward)[k1 : k1 + n_sym]
        if kind == "dfe" and k2:
            # error-free (training) feedback of the true symbols
            fb = np.convolve(d, np.concatenate(([0.0], design.feedback)))[:n_sym]
            soft = soft - fb
        mse = float(np.mean((soft - d) ** 2))
        assert abs(mse - design.j_min) / design.j_min < 0.02, (
            f"trial {trial} ({kind}): mse {mse:.5f} vs j_min {design.j_min:.5f}"
        )


def test_criterion_4_series_vs_enumeration():
    """Series BER within 1e-8 of 2^m enumeration; Chernoff is an upper bound."""
    for trial in range(50):
        g = rng.stream(400, trial)
        n1 = int(g.integers(0, 3))
        n2 = int(g.integers(0, 3))
        alpha = g.normal(0.0, 0.35, size=n1 + n2 + 1)
        alpha[n1] = 1.0
        alpha /= np.linalg.norm(alpha)
        comp = CompositeChannel(alpha, n1, n2)
        n0 = float(g.uniform(0.01, 0.6))
        k1, k2 = int(g.integers(0, 5)), int(g.integers(0, 5))
        design = eq.mmse_le_design(comp, 1.0, n0, k1, k2)
        resp = eq.overall_response(design, comp, 1.0, n0)
        isi = resp.isi_taps()
        assert len(isi) <= 12
        exact = ber._enumerate_ber(resp.q0, isi, np.sqrt(resp.sigma_w2))
        series = ber.series_ber(resp)
        assert abs(series - exact) < 1e-8
        assert ber.chernoff_ber(design.j_min) >= series - 1e-12


def test_criterion_5_channel_statistics():
    """Cluster rate, delay-spread ordering and delay-spread envelope."""
    # Mean cluster inter-arrival over 1e4 realizations on a long horizon
    # (the default window is far shorter than 1/Lambda, so cluster
    # spacing must be observed over an extended horizon).
    horizon = 30_000.0
    gaps = []
    for i in range(10_000):
        t = channel._poisson_times(channel.CM3.cluster_rate, horizon, rng.stream(99, i))
        if len(t):
            gaps.append(t[0])
            gaps.extend(np.diff(t))
    mean_gap = float(np.mean(gaps))
    assert abs(mean_gap - 149.25) / 149.25 < 0.05, f"mean inter-arrival {mean_gap:.2f}"

    s3 = np.array([
        channel.rms_delay_spread(channel.generate_realization(channel.CM3, s))
        for s in range(2000)
    ])
    s4 = np.array([
        channel.rms_delay_spread(channel.generate_realization(channel.CM4, s))
        for s in range(2000)
    ])
    med3, med4 = float(np.median(s3)), float(np.median(s4))
    assert med4 > med3, f"CM4 median {med4:.2f} vs CM3 {med3:.2f}"
    # published 5-26 ns envelope with +-30% slack
    for med in (med3, med4):
        assert 5.0 * 0.7 <= med <= 26.0 * 1.3, f"median spread {med:.2f} ns"


def test_criterion_6a_cm3_le_gain(cm3_doublet):
    """CM3 Rake-MMSE over Rake at BER 1e-3: 1.8 +- 1.0 dB."""
    gain = _median_gain(cm3_doublet["rake-le"], cm3_doublet["rake"])
    assert 0.8 <= gain <= 2.8, f"CM3 LE gain {gain:.2f} dB"


def test_criterion_6b_cm4_le_gain(cm4_doublet):
    """CM4 Rake-MMSE over Rake at BER 1e-3: 4 +- 1.5 dB."""
    gain = _median_gain(cm4_doublet["rake-le"], cm4_doublet["rake"])
    assert 2.5 <= gain <= 5.5, f"CM4 LE gain {gain:.2f} dB"


def test_criterion_6c_cm3_dfe_over_le():
    """CM3 DFE over LE at BER 1e-3: at least 1.5 dB (band-limited pulse)."""
    le = _sweep(channel.CM3, "rake-le", 10, 10, 10, PulseSpec())
    dfe = _sweep(channel.CM3, "rake-dfe", 10, 10, 10, PulseSpec())
    gain = _median_gain(dfe, le)
    assert gain >= 1.5, f"CM3 DFE-over-LE gain {gain:.2f} dB"


def test_criterion_7_finger_tap_trade():
    """CM4: (L=10, K=5) wins at 4 dB; (L=5, K=20) wins at 16 dB."""
    grid = np.array([4.0, 16.0])
    many_fingers = _sweep(channel.CM4, "rake-dfe", 10, 5, 5, _DOUBLET,
                          n=100, grid=grid)
    many_taps = _sweep(channel.CM4, "rake-dfe", 5, 20, 20, _DOUBLET,
                       n=100, grid=grid)
    lo_f, hi_f = many_fingers.bers()
    lo_t, hi_t = many_taps.bers()
    assert lo_f < lo_t, f"4 dB: L10/K5 {lo_f:.3e} !< L5/K20 {lo_t:.3e}"
    assert hi_t < hi_f, f"16 dB: L5/K20 {hi_t:.3e} !< L10/K5 {hi_f:.3e}"


def test_criterion_8_worker_count_determinism(tmp_path):
    """The criterion-6 experiment yields byte-identical CSVs for any workers."""
    base = dict(
        channel="cm3", receivers=("rake", "rake-le", "rake-dfe"),
        fingers=10, k1=10, k2=10, snr_start=0.0, snr_stop=40.0, snr_step=2.0,
        realizations=50, method="series", seed=11,
        pulse="gaussian-doublet", epsilon=0.5,
    )
    cfg1 = ExperimentConfig(workers=1, output=str(tmp_path / "w1"), **base)
    cfg2 = ExperimentConfig(workers=3, output=str(tmp_path / "w3"), **base)
    run_experiment(cfg1, make_figures=False)
    run_experiment(cfg2, make_figures=False)
    names = [f"{rx}_series.csv" for rx in base["receivers"]]
    for name in names:
        a = (tmp_path / "w1" / name).read_bytes()
        b = (tmp_path / "w3" / name).read_bytes()
        assert a == b, f"{name} differs between worker counts"


def test_criterion_9_lms_sanity():
    """LMS-trained LE within 1.5x of closed-form j_min after 512 symbols."""
    n_train = 512
    for trial in range(20):
        g = rng.stream(500, trial)
        n1 = int(g.integers(0, 4))
        n2 = int(g.integers(0, 4))
        alpha = g.normal(0.0, 0.25, size=n1 + n2 + 1)
        alpha[n1] = 1.0
        alpha /= np.linalg.norm(alpha)
        comp = CompositeChannel(alpha, n1, n2)
        n0 = float(g.uniform(0.01, 0.2))
        wiener = eq.mmse_le_design(comp, 1.0, n0, 4, 4)

        d = g.choice([-1.0, 1.0], size=n_train + 16)
        y = np.convolve(d, alpha)[n1 : n1 + len(d)]
        y = y + g.normal(0.0, np.sqrt(n0 / 2.0), size=len(d))
        trained = eq.lms_train(y[:n_train], d[:n_train], 4, 4, step_mu=0.15)
        ratio = trained.j_min / wiener.j_min
        assert ratio <= 1.5, f"trial {trial}: empirical/Wiener MSE {ratio:.2f}"
