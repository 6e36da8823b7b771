"""Channel probing from sacrificed samples: homodyne measurements in
arbitrary quadrature directions, moment-based parameter estimation,
propagation to phase-error-rate confidence intervals, and the
photon-number cutoff hypothesis test.

The channel family is parameterized by finitely many numbers
(transmittance and excess noise), so tomography reduces to estimating
those from the regression of homodyne outcomes on the modulated
quadrature amplitudes.  Two variances enter the reported uncertainty:
``sigma1``, the sampling variance the phase-error observable would have
on n samples (2 e (1-e) / n, reported verbatim; the plain binomial
e (1-e) / n is also computed for reference), and ``sigma2``, the
propagated parameter uncertainty.  They add in quadrature.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as _stats

from .channel import ChannelModel
from .mathcore import DomainError, RandomStream, ensure_probability


@dataclass(frozen=True)
class HomodyneSamples:
    """Batch of quadrature measurements with the sender's references.

    ``theta`` is the measured quadrature direction, ``outcome`` the
    homodyne result, ``alice_x``/``alice_p`` the modulated means.
    """

    theta: np.ndarray
    outcome: np.ndarray
    alice_x: np.ndarray
    alice_p: np.ndarray

    def __len__(self):
        return self.outcome.size

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["theta", "outcome", "alice_x", "alice_p"])
        for row in zip(self.theta, self.outcome, self.alice_x, self.alice_p):
            writer.writerow([f"{v!r}" for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text):
        rows = list(csv.reader(io.StringIO(text)))
        data = np.array(rows[1:], dtype=float)
        return cls(
            theta=data[:, 0], outcome=data[:, 1],
            alice_x=data[:, 2], alice_p=data[:, 3],
        )


def sample_homodyne(mod, channel, theta_policy, n, stream):
    """Simulate ``n`` probe rounds.

    ``theta_policy`` is either the string ``"uniform"`` (directions drawn
    uniformly on [0, 2pi), independently of the sample index) or a fixed
    sequence of angles, cycled to length n.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    rng = stream.generator() if isinstance(stream, RandomStream) else stream
    sd = math.sqrt(mod.variance)
    x = rng.standard_normal(n) * sd
    p = rng.standard_normal(n) * sd
    if isinstance(theta_policy, str):
        if theta_policy != "uniform":
            raise DomainError(f"unknown theta policy {theta_policy!r}")
        theta = rng.uniform(0.0, 2.0 * math.pi, n)
    else:
        fixed = np.asarray(theta_policy, dtype=float)
        if fixed.size == 0:
            raise DomainError("fixed theta list must be non-empty")
        theta = np.resize(fixed, n)
    amp = x * np.cos(theta) + p * np.sin(theta)
    noise = rng.standard_normal(n) * math.sqrt(channel.noise_variance)
    outcome = math.sqrt(channel.transmittance) * amp + noise
    return HomodyneSamples(theta=theta, outcome=outcome, alice_x=x, alice_p=p)


@dataclass(frozen=True)
class ChannelEstimate:
    eta_hat: float
    eta_se: float
    noise_hat: float
    noise_se: float
    residual_variance: float
    n: int


def estimate_channel(samples):
    """Least-squares estimate of the transmittance and excess noise.

    Regresses outcomes on the modulated amplitude along each measured
    direction; the squared slope estimates the transmittance and the
    residual variance above the shot-noise unit estimates the excess
    noise (clamped at zero).
    """
    n = len(samples)
    if n < 100:
        raise DomainError("channel estimation needs at least 100 samples")
    a = samples.alice_x * np.cos(samples.theta) + samples.alice_p * np.sin(
        samples.theta
    )
    gram = float(a @ a)
    if gram <= 0.0:
        raise DomainError("degenerate design: no modulation power in the data")
    slope = float(a @ samples.outcome) / gram
    residuals = samples.outcome - slope * a
    resid_var = float(residuals @ residuals) / (n - 1)
    slope_se = math.sqrt(resid_var / gram)
    eta_hat = slope * slope
    eta_se = 2.0 * abs(slope) * slope_se
    noise_hat = max(0.0, resid_var - 1.0)
    noise_se = resid_var * math.sqrt(2.0 / (n - 1))
    return ChannelEstimate(
        eta_hat=eta_hat, eta_se=eta_se, noise_hat=noise_hat,
        noise_se=noise_se, residual_variance=resid_var, n=n,
    )


def phase_error_sigma1(e_p, n):
    """Sampling deviation sqrt(2 e_p (1 - e_p) / n) of a phase-error
    estimate from n samples."""
    e_p = ensure_probability(e_p, "e_p")
    if n < 1:
        raise DomainError("n must be >= 1")
    return math.sqrt(2.0 * e_p * (1.0 - e_p) / n)


@dataclass(frozen=True)
class CutoffTestResult:
    verdict: str  # "pass" | "fail" | "inconclusive"
    threshold: float
    exceedances: int
    n: int
    tail_estimate: float
    upper_bound: float

    @property
    def passed(self):
        return self.verdict == "pass"


def photon_cutoff_test(samples, n_max, epsilon, confidence=0.99):
    """Hypothesis test that at most ``n_max`` photons arrive per sample.

    Large photon numbers correlate with large homodyne amplitudes in all
    directions, so the test thresholds |outcome| at
    r = sqrt(2 N0 (2 n_max + 1)) and requires the Clopper-Pearson upper
    confidence bound on the exceedance probability to stay below
    ``epsilon``.  If the sample size cannot certify the requested epsilon
    even with zero exceedances, the verdict is ``inconclusive``.
    """
    epsilon = ensure_probability(epsilon, "epsilon")
    if n_max < 1:
        raise DomainError("n_max must be >= 1")
    n = len(samples)
    r = math.sqrt(2.0 * (2.0 * n_max + 1.0))
    k = int(np.count_nonzero(np.abs(samples.outcome) > r))
    floor = 1.0 - (1.0 - confidence) ** (1.0 / n)
    if floor > epsilon:
        verdict = "inconclusive"
        upper = floor
    else:
        if k == 0:
            upper = floor
        elif k == n:
            upper = 1.0
        else:
            upper = float(_stats.beta.ppf(confidence, k + 1, n - k))
        verdict = "pass" if upper <= epsilon else "fail"
    return CutoffTestResult(
        verdict=verdict, threshold=r, exceedances=k, n=n,
        tail_estimate=k / n, upper_bound=upper,
    )


@dataclass(frozen=True)
class SliceEstimate:
    e_b: float
    e_p: float
    sigma1: float
    sigma1_binomial: float
    sigma2: float

    @property
    def sigma_total(self):
        return math.sqrt(self.sigma1 ** 2 + self.sigma2 ** 2)


@dataclass(frozen=True)
class EstimationReport:
    """Channel estimate with per-slice error rates and uncertainties.

    The top-level sigma fields refer to the highest (sign) slice, whose
    phase error dominates the key-rate loss under attenuation.
    """

    eta_hat: float
    eta_se: float
    noise_hat: float
    n: int
    slices: tuple
    eta_clamped: bool = field(default=False)

    @property
    def sigma1(self):
        return self.slices[-1].sigma1

    @property
    def sigma2(self):
        return self.slices[-1].sigma2

    @property
    def sigma_total(self):
        return self.slices[-1].sigma_total

    def to_json(self):
        return {
            "eta_hat": self.eta_hat,
            "eta_se": self.eta_se,
            "noise_hat": self.noise_hat,
            "n": self.n,
            "eta_clamped": self.eta_clamped,
            "slices": [
                {
                    "e_b": s.e_b,
                    "e_p": s.e_p,
                    "sigma1": s.sigma1,
                    "sigma1_binomial": s.sigma1_binomial,
                    "sigma2": s.sigma2,
                    "sigma_total": s.sigma_total,
                }
                for s in self.slices
            ],
        }


def estimated_rate_report(samples, spec, mod, rel_tol=1e-6):
    """Full estimation pass: fit the channel, evaluate the slice error
    rates at the fitted transmittance, and attach uncertainties.

    ``sigma2`` propagates the transmittance standard error through a
    finite-difference sensitivity of each phase error rate.  The rate
    evaluation itself runs at the fitted transmittance with zero excess
    noise (the joint-state construction requires a pure attenuation
    channel); a noticeably positive ``noise_hat`` therefore signals model
    mismatch rather than entering the rates.
    """
    from . import epanalysis

    fit = estimate_channel(samples)
    eta_clamped = fit.eta_hat > 1.0
    eta = min(fit.eta_hat, 1.0)
    n = fit.n
    base = epanalysis.analyze_state(
        epanalysis.reduced_joint_state(
            spec, ChannelModel(transmittance=eta), rel_tol=rel_tol
        )
    )
    delta = max(1e-3, fit.eta_se)
    if eta + delta > 1.0:
        delta = -delta
    shifted = epanalysis.analyze_state(
        epanalysis.reduced_joint_state(
            spec, ChannelModel(transmittance=eta + delta), rel_tol=rel_tol
        )
    )
    slices = []
    for s, s_shift in zip(base, shifted):
        sens = abs(s_shift.e_p - s.e_p) / abs(delta)
        slices.append(
            SliceEstimate(
                e_b=s.e_b,
                e_p=s.e_p,
                sigma1=phase_error_sigma1(s.e_p, n),
                sigma1_binomial=math.sqrt(s.e_p * (1.0 - s.e_p) / n),
                sigma2=sens * fit.eta_se,
            )
        )
    return EstimationReport(
        eta_hat=fit.eta_hat,
        eta_se=fit.eta_se,
        noise_hat=fit.noise_hat,
        n=n,
        slices=tuple(slices),
        eta_clamped=eta_clamped,
    )
