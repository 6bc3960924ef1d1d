"""MMSE linear / decision-feedback equalizer design, LMS training, detection.

Closed-form designs solve the Wiener normal equations built from the
symbol-spaced composite coefficients alpha and the Rake noise scale:

  LE:  (R + N) c = p with R[r,s] = rho(r - s), p[r] = alpha_{-r},
       N = (N0/2) * sum(beta^2) * I, taps c_{-K1}..c_{K2}.

  DFE: feedforward c_{-K1}..c_0 from the Schur-reduced system
       (R_F + N - U^T U) c = p_f, feedback b_i = (U c)_i, which equals
       the post-cursor of c (*) alpha — so error-free feedback cancels
       post-cursor ISI over the feedback span exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .txrx import CompositeChannel


@dataclass(frozen=True)
class EqualizerDesign:
    """Feedforward taps (lag -K1..K2 for LE, -K1..0 for DFE) and feedback taps.

    ``j_min`` is the residual mean-square error: the closed-form minimum
    for Wiener designs, or the trailing empirical MSE for LMS-trained ones.
    """

    kind: str  # "le" | "dfe"
    feedforward: np.ndarray
    feedback: np.ndarray
    k1: int
    k2: int
    j_min: float
    sigma_d2: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "feedforward", np.asarray(self.feedforward, dtype=float))
        object.__setattr__(self, "feedback", np.asarray(self.feedback, dtype=float))
        if self.kind not in ("le", "dfe"):
            raise ValueError("kind must be 'le' or 'dfe'")
        expected = self.k1 + self.k2 + 1 if self.kind == "le" else self.k1 + 1
        if len(self.feedforward) != expected:
            raise ValueError("feedforward length inconsistent with K1/K2")
        if self.kind == "le" and len(self.feedback):
            raise ValueError("linear equalizer has no feedback taps")
        if self.kind == "dfe" and len(self.feedback) != self.k2:
            raise ValueError("DFE needs K2 feedback taps")


@dataclass(frozen=True)
class OverallResponse:
    """Combined channel-plus-equalizer taps q_i and output noise variance."""

    q: np.ndarray
    k_min: int  # symbol lag of q[0]
    sigma_w2: float

    def __post_init__(self):
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float))

    @property
    def q0(self) -> float:
        return float(self.q[-self.k_min])

    def isi_taps(self) -> np.ndarray:
        """All q_i with i != 0."""
        mask = np.ones(len(self.q), dtype=bool)
        mask[-self.k_min] = False
        return self.q[mask]


def _spd_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cholesky solve with a single diagonal-jitter retry."""
    try:
        return cho_solve(cho_factor(a), b)
    except np.linalg.LinAlgError:
        jitter = 1e-12 * np.trace(a) / len(a)
        try:
            return cho_solve(cho_factor(a + jitter * np.eye(len(a))), b)
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError(
                "normal-equation matrix is singular even after jitter"
            ) from exc


def _toeplitz_autocorr(comp: CompositeChannel, size: int) -> np.ndarray:
    rho = np.array([comp.autocorrelation(lag) for lag in range(size)])
    idx = np.abs(np.subtract.outer(np.arange(size), np.arange(size)))
    return rho[idx]


def mmse_le_design(
    comp: CompositeChannel,
    noise_scale: float,
    n0: float,
    k1: int,
    k2: int,
    sigma_d2: float = 1.0,
) -> EqualizerDesign:
    """Wiener solution for the (K1+K2+1)-tap linear equalizer."""
    if k1 < 0 or k2 < 0:
        raise ValueError("tap counts must be nonnegative")
    size = k1 + k2 + 1
    r = _toeplitz_autocorr(comp, size) * sigma_d2
    nv = (n0 / 2.0) * noise_scale
    a = r + nv * np.eye(size)
    # p[r] = E[d(n) y(n-r)] = alpha_{-r}, taps ordered c_{-K1}..c_{K2}.
    p = np.array([comp.coefficient(-r) for r in range(-k1, k2 + 1)]) * sigma_d2
    c = _spd_solve(a, p)
    j_min = max(float(sigma_d2 - p @ c), 0.0)
    return EqualizerDesign("le", c, np.empty(0), k1, k2, j_min, sigma_d2)


def mmse_dfe_design(
    comp: CompositeChannel,
    noise_scale: float,
    n0: float,
    k1: int,
    k2: int,
    sigma_d2: float = 1.0,
) -> EqualizerDesign:
    """Wiener DFE: K1+1 feedforward taps, K2 feedback taps."""
    if k1 < 0 or k2 < 0:
        raise ValueError("tap counts must be nonnegative")
    size = k1 + 1
    r_f = _toeplitz_autocorr(comp, size) * sigma_d2
    nv = (n0 / 2.0) * noise_scale
    # u[i, j] = E[d(n-i) y(n-r_j)] = alpha_{i - r_j}, r_j = j - K1, i = 1..K2.
    taps_r = np.arange(-k1, 1)
    u = np.array(
        [[comp.coefficient(i - rj) for rj in taps_r] for i in range(1, k2 + 1)]
    ) * sigma_d2
    a = r_f + nv * np.eye(size) - (u.T @ u) / sigma_d2 if k2 else r_f + nv * np.eye(size)
    p = np.array([comp.coefficient(-rj) for rj in taps_r]) * sigma_d2
    c = _spd_solve(a, p)
    b = u @ c / sigma_d2 if k2 else np.empty(0)
    j_min = max(float(sigma_d2 - p @ c), 0.0)
    return EqualizerDesign("dfe", c, b, k1, k2, j_min, sigma_d2)


def identity_design(comp: CompositeChannel, noise_scale: float, n0: float) -> EqualizerDesign:
    """Pass-through 'design' (c = [1]) modeling a Rake with sign detection."""
    j = mse_of_taps(np.array([1.0]), 0, comp, noise_scale, n0)
    return EqualizerDesign("le", np.array([1.0]), np.empty(0), 0, 0, j)


def mse_of_taps(
    feedforward: np.ndarray,
    k1: int,
    comp: CompositeChannel,
    noise_scale: float,
    n0: float,
    feedback: np.ndarray | None = None,
) -> float:
    """Mean-square error of arbitrary taps (BPSK, error-free feedback)."""
    q, k_min = _convolve_taps(feedforward, k1, comp)
    extra = 0.0
    if feedback is not None and len(feedback):
        end = min(len(feedback), len(q) + k_min - 1)
        for i in range(1, end + 1):
            q[i - k_min] -= feedback[i - 1]
        extra = float(np.sum(feedback[end:] ** 2))  # taps past the q span
    q[-k_min] -= 1.0
    return float(
        np.sum(q**2) + extra + (n0 / 2.0) * noise_scale * np.sum(feedforward**2)
    )


def _convolve_taps(feedforward: np.ndarray, k1: int, comp: CompositeChannel):
    """q = c (*) alpha; returns (q, symbol lag of q[0])."""
    q = np.convolve(feedforward, comp.alpha)
    return q, -k1 - comp.n1


def overall_response(
    design: EqualizerDesign,
    comp: CompositeChannel,
    noise_scale: float,
    n0: float,
) -> OverallResponse:
    """Combined taps q_i and equalizer-output noise variance sigma_w^2.

    For a DFE the post-cursor taps inside the feedback span are set to
    exactly zero (error-free feedback premise).
    """
    q, k_min = _convolve_taps(design.feedforward, design.k1, comp)
    if design.kind == "dfe" and design.k2:
        end = min(design.k2, len(q) + k_min - 1)
        for i in range(1, end + 1):
            q[i - k_min] = 0.0
    sigma_w2 = float(np.sum(design.feedforward**2)) * noise_scale * n0 / 2.0
    return OverallResponse(q=q, k_min=k_min, sigma_w2=sigma_w2)


def detect(y: np.ndarray, design: EqualizerDesign) -> np.ndarray:
    """Hard +-1 decisions; DFE feedback is decision-directed."""
    y = np.asarray(y, dtype=float)
    n = len(y)
    ff = np.convolve(y, design.feedforward)
    # soft(m) = sum_i c[i] y(m + K1 - i) = conv[m + K1]
    soft = ff[design.k1 : design.k1 + n]
    if design.kind == "le" or not design.k2:
        return np.where(soft >= 0.0, 1.0, -1.0)
    b = design.feedback
    k2 = design.k2
    d = np.zeros(n + k2)
    for m in range(n):
        s = soft[m] - np.dot(b, d[m : m + k2][::-1])
        d[m + k2] = 1.0 if s >= 0.0 else -1.0
    return d[k2:]


def lms_train(
    y: np.ndarray,
    training: np.ndarray,
    k1: int,
    k2: int,
    step_mu: float = 0.01,
    kind: str = "le",
) -> EqualizerDesign:
    """One LMS pass over the training prefix, taps initialized to zero.

    The step is normalized by the measured input power per tap.  Raises
    if the running MSE diverges (grows past 10x its initial level).
    """
    y = np.asarray(y, dtype=float)
    training = np.asarray(training, dtype=float)
    if kind not in ("le", "dfe"):
        raise ValueError("kind must be 'le' or 'dfe'")
    n_ff = k1 + k2 + 1 if kind == "le" else k1 + 1
    n_train = len(training)
    if step_mu != 0.0 and n_train < 10 * (n_ff + (k2 if kind == "dfe" else 0)):
        raise ValueError("training sequence too short for this tap count")

    power = float(np.mean(y[:n_train] ** 2)) or 1.0
    mu = step_mu / (n_ff * power)
    c = np.zeros(n_ff)
    b = np.zeros(k2) if kind == "dfe" else np.empty(0)
    ypad = np.concatenate([np.zeros(k1 + k2), y, np.zeros(k1 + k2)])
    dpad = np.concatenate([np.zeros(k2), training])

    errs = np.empty(n_train)
    for n in range(n_train):
        pad = k1 + k2
        if kind == "le":
            # window [y(n+K1) .. y(n-K2)] matching taps c_{-K1}..c_{K2}
            win = ypad[n + pad - k2 : n + pad + k1 + 1][::-1]
            soft = np.dot(c, win)
        else:
            # window [y(n+K1) .. y(n)] matching taps c_{-K1}..c_0
            win = ypad[n + pad : n + pad + k1 + 1][::-1]
            past = dpad[n : n + k2][::-1] if k2 else np.empty(0)
            soft = np.dot(c, win) - np.dot(b, past)
        e = training[n] - soft
        errs[n] = e * e
        c = c + mu * e * win
        if kind == "dfe" and k2:
            b = b - mu * e * past
        if n > 50 and np.mean(errs[max(0, n - 20) : n]) > 10.0 * np.mean(errs[:20]) + 1e-30:
            raise RuntimeError("LMS diverged; reduce step_mu")

    tail = errs[int(0.8 * n_train) :] if n_train else errs
    j_emp = float(np.mean(tail)) if len(tail) else 0.0
    return EqualizerDesign(kind, c, b, k1, k2, j_emp)
