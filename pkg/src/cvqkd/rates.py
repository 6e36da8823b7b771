"""Asymptotic secret-key rates for the attenuation channel.

Direct reconciliation achieves I(X;X') - I(X;E) and reverse reconciliation
I(X;X') - I(X';E), where the eavesdropper terms are Holevo quantities of
the reflected-beam ensemble, evaluated through Gaussian von Neumann
entropies.  The eavesdropper is conditioned on the x data only: the
p modulation is publicly compensated by the receiver, so it appears here
as added thermal noise in the reflected mode's p quadrature.

Covariances in shot-noise units (transmittance eta, modulation V):

* unconditional reflected mode: diag(1 + (1-eta)V, 1 + (1-eta)V)
* given the sent x:             diag(1, 1 + (1-eta)V)
* given the measured x':        diag((V+1)/(eta V+1), 1 + (1-eta)V)

the last following from the Gaussian posterior of x given x' (variance
V / (eta V + 1)).  Every symplectic eigenvalue is the geometric mean of
the two diagonal entries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .channel import mutual_information
from .mathcore import DomainError, gaussian_state_entropy


def _require_attenuation(channel):
    if channel.excess_noise != 0.0:
        raise DomainError(
            "asymptotic rates are defined for the pure attenuation channel"
        )


def holevo_eve_direct(mod, channel):
    """Holevo information of the reflected beam about the sent x."""
    _require_attenuation(channel)
    v_leak = (1.0 - channel.transmittance) * mod.variance
    nu_unc = 1.0 + v_leak
    nu_cond = math.sqrt(1.0 + v_leak)
    return gaussian_state_entropy(nu_unc) - gaussian_state_entropy(nu_cond)


def holevo_eve_reverse(mod, channel):
    """Holevo information of the reflected beam about the measured x'."""
    _require_attenuation(channel)
    eta = channel.transmittance
    v = mod.variance
    v_leak = (1.0 - eta) * v
    nu_unc = 1.0 + v_leak
    var_x_given_xp = (v + 1.0) / (eta * v + 1.0)
    nu_cond = math.sqrt(var_x_given_xp * (1.0 + v_leak))
    return gaussian_state_entropy(nu_unc) - gaussian_state_entropy(nu_cond)


@dataclass(frozen=True)
class AsymptoticRateReport:
    """Mutual informations (bits/sample) and the two key-rate differences."""

    i_xy: float
    i_xe: float
    i_xpe: float

    @property
    def direct_rate(self):
        return self.i_xy - self.i_xe

    @property
    def reverse_rate(self):
        return self.i_xy - self.i_xpe


def asymptotic_rates(mod, channel):
    """Classical mutual information and both Holevo terms for a channel."""
    _require_attenuation(channel)
    return AsymptoticRateReport(
        i_xy=mutual_information(mod, channel),
        i_xe=holevo_eve_direct(mod, channel),
        i_xpe=holevo_eve_reverse(mod, channel),
    )
