"""Physical layer: Gaussian modulation, the beam-splitter attenuation
channel, homodyne outcomes and the eavesdropper's overlap kernel.

The channel is a beam splitter of transmittance ``eta`` with vacuum on the
idle port; the eavesdropper is modeled as holding the reflected beam.  Only
the x quadrature enters key-rate computations: the p-quadrature modulation
is treated as publicly compensated by the receiver, which makes every
amplitude and kernel in this module real.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .mathcore import VACUUM_NOISE, DomainError, RandomStream


@dataclass(frozen=True)
class ChannelModel:
    """Attenuation channel with optional excess noise.

    ``transmittance`` is the beam-splitter intensity transmission in (0, 1];
    ``excess_noise`` adds classical Gaussian noise of that variance (in
    shot-noise units) on top of the vacuum fluctuations.  The pure
    attenuation case has ``excess_noise == 0``.
    """

    transmittance: float
    excess_noise: float = 0.0
    vacuum_noise: float = field(default=VACUUM_NOISE, init=False, repr=False)

    def __post_init__(self):
        if not 0.0 < self.transmittance <= 1.0:
            raise DomainError(
                f"transmittance must lie in (0, 1], got {self.transmittance!r}"
            )
        if self.excess_noise < 0.0:
            raise DomainError("excess_noise must be >= 0")

    @property
    def noise_variance(self):
        """Variance of Bob's measured x conditional on the sent x."""
        return self.vacuum_noise * (1.0 + self.excess_noise)


@dataclass(frozen=True)
class ModulationSpec:
    """Gaussian modulation with the given variance per quadrature."""

    variance: float

    def __post_init__(self):
        if self.variance <= 0.0:
            raise DomainError("modulation variance must be positive")


def from_loss_db(loss_db):
    """Channel with transmittance 10^(-loss/10) for a loss in dB."""
    loss_db = float(loss_db)
    if loss_db < 0.0:
        raise DomainError(f"loss must be >= 0 dB, got {loss_db!r}")
    return ChannelModel(transmittance=10.0 ** (-loss_db / 10.0))


def sample_pair(mod, channel, stream, count):
    """Draw ``count`` correlated pairs (x, x') of sent and measured values.

    x ~ N(0, V); x' ~ N(sqrt(eta) x, noise_variance).  The sequence is a
    pure function of the stream.
    """
    if count < 1:
        raise DomainError("count must be >= 1")
    rng = stream.generator() if isinstance(stream, RandomStream) else stream
    x = rng.standard_normal(count) * math.sqrt(mod.variance)
    noise = rng.standard_normal(count) * math.sqrt(channel.noise_variance)
    x_prime = math.sqrt(channel.transmittance) * x + noise
    return x, x_prime


def eve_overlap_kernel(x1, x2, channel):
    """Overlap of the eavesdropper's states for two sent values x1, x2.

    Tracing out the reflected beam-splitter output leaves the kernel
    exp(-(1-eta) (x1-x2)^2 / (8 N0)); it equals 1 identically at eta = 1
    (nothing reaches the eavesdropper) and for x1 == x2.  Accepts arrays.
    """
    eta = channel.transmittance
    d = np.subtract(x1, x2)
    out = np.exp(-(1.0 - eta) * d * d / (8.0 * channel.vacuum_noise))
    return float(out) if np.isscalar(d) else out


def bob_wavefunction(x_prime, x, channel):
    """Real x-representation amplitude of Bob's state given the sent x.

    Defined for the pure attenuation channel only: a Gaussian amplitude
    centered on sqrt(eta) x with the vacuum variance, normalized so that
    the squared amplitude integrates to one over x'.
    """
    if channel.excess_noise != 0.0:
        raise DomainError(
            "pure-state amplitude is only defined for excess_noise == 0"
        )
    n0 = channel.vacuum_noise
    mu = math.sqrt(channel.transmittance) * x
    norm = (2.0 * math.pi * n0) ** -0.25
    d = np.subtract(x_prime, mu)
    out = norm * np.exp(-d * d / (4.0 * n0))
    return float(out) if np.isscalar(d) else out


def mutual_information(mod, channel):
    """Shannon mutual information (bits) between sent and measured x.

    For the Gaussian channel this is (1/2) log2(1 + eta V / noise).
    """
    snr = channel.transmittance * mod.variance / channel.noise_variance
    return 0.5 * math.log2(1.0 + snr)
