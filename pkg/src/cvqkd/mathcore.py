"""Deterministic numerical primitives shared by every other module.

Conventions used throughout the toolkit:

* All quadrature variances are dimensionless, expressed in units of the
  vacuum fluctuation variance (shot noise), so the shot-noise unit is 1.0
  everywhere and the default modulation variance is 31.
* Entropies are in bits.
* Gaussian tails are truncated at 8 standard deviations where a finite
  range is needed; the neglected mass is below 1e-15.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate as _integrate
from scipy import special as _special

#: Vacuum (shot-noise) quadrature variance.  Fixed by convention; keeping it
#: as a named constant makes the formulas below readable.
VACUUM_NOISE = 1.0

#: Number of standard deviations at which Gaussian tails are truncated.
TAIL_SIGMAS = 8.0


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class IntegrationError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""


def ensure_probability(value, name="probability"):
    """Validate that ``value`` is a probability in [0, 1] and return it."""
    p = float(value)
    if not 0.0 <= p <= 1.0 or math.isnan(p):
        raise DomainError(f"{name} must lie in [0, 1], got {value!r}")
    return p


def binary_entropy(p):
    """Binary entropy h(p) = -p log2 p - (1-p) log2 (1-p), in bits.

    The endpoint values h(0) = h(1) = 0 are taken by continuity.  The
    argument is folded onto [0, 1/2] first so that h(p) == h(1-p) holds
    exactly in floating point.
    """
    p = ensure_probability(p, "p")
    p = min(p, 1.0 - p)
    if p == 0.0:
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


def inverse_erf(y):
    """Inverse of the error function on (-1, 1)."""
    y = float(y)
    if not -1.0 < y < 1.0:
        raise DomainError(f"inverse_erf requires |y| < 1, got {y!r}")
    return float(_special.erfinv(y))


def gaussian_cdf(z):
    """Standard normal CDF.  Accepts scalars or arrays."""
    out = _special.ndtr(z)
    return float(out) if np.isscalar(z) else out


def gaussian_quantile(q):
    """Standard normal quantile (inverse CDF) on the open interval (0, 1)."""
    arr = np.asarray(q, dtype=float)
    if np.any(arr <= 0.0) or np.any(arr >= 1.0):
        raise DomainError("gaussian_quantile requires 0 < q < 1")
    out = _special.ndtri(arr)
    return float(out) if np.isscalar(q) else out


def gaussian_state_entropy(nu):
    """Von Neumann entropy (bits) of a single-mode Gaussian state.

    ``nu`` is the symplectic eigenvalue of the state's covariance matrix in
    shot-noise units; ``nu == 1`` is a pure state with zero entropy.
    """
    nu = float(nu)
    if nu < 1.0:
        if nu > 1.0 - 1e-12:  # tolerate roundoff from covariance algebra
            return 0.0
        raise DomainError(f"symplectic eigenvalue must be >= 1, got {nu!r}")
    if nu == 1.0:
        return 0.0
    a = (nu + 1.0) / 2.0
    b = (nu - 1.0) / 2.0
    return a * math.log2(a) - (b * math.log2(b) if b > 0.0 else 0.0)


def integrate(f, domain, rel_tol=1e-8, abs_floor=1e-12):
    """Adaptive quadrature of ``f`` over a 1-D interval or 2-D rectangle.

    Parameters
    ----------
    f : callable
        ``f(x)`` for a 1-D domain ``(a, b)``; ``f(x, y)`` for a 2-D domain
        ``((ax, bx), (ay, by))``.
    domain : tuple
        Integration limits as above.
    rel_tol : float
        Relative tolerance on the result.
    abs_floor : float
        Absolute error floor; the accepted error bound is
        ``rel_tol * |result| + abs_floor``.

    Returns
    -------
    float
        The integral estimate.

    Raises
    ------
    IntegrationError
        If the quadrature reports an error bound above the requested
        tolerance or fails to converge.  Failures are never silent.
    """
    if rel_tol <= 0.0:
        raise DomainError("rel_tol must be positive")
    a, b = domain
    with warnings.catch_warnings():
        warnings.simplefilter("error", _integrate.IntegrationWarning)
        try:
            if np.isscalar(a):
                value, err = _integrate.quad(
                    f, a, b, epsabs=abs_floor, epsrel=rel_tol, limit=200
                )
            else:
                (ax, bx), (ay, by) = domain
                value, err = _integrate.dblquad(
                    lambda y, x: f(x, y), ax, bx, ay, by,
                    epsabs=abs_floor, epsrel=rel_tol,
                )
        except _integrate.IntegrationWarning as exc:
            raise IntegrationError(
                f"quadrature did not converge over {domain}: {exc}"
            ) from exc
    bound = rel_tol * abs(value) + abs_floor
    if err > bound:
        raise IntegrationError(
            f"quadrature error {err:.3e} exceeds tolerance {bound:.3e} "
            f"over {domain}"
        )
    return value


def _mix64(value):
    """splitmix64 finalizer; spreads entropy over all 64 bits."""
    value = (value + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    value = ((value ^ (value >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    value = ((value ^ (value >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return value ^ (value >> 31)


@dataclass(frozen=True)
class RandomStream:
    """A named position in a counter-based random number family.

    Identical ``(seed, stream_id)`` pairs always produce bit-identical
    sample sequences; distinct ``stream_id`` values produce statistically
    independent sequences, so parallel workers can draw from provably
    disjoint substreams.  Instances are immutable values; a generator
    obtained from one must not be advanced from two workers at once.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        object.__setattr__(self, "seed", int(self.seed) & 0xFFFFFFFFFFFFFFFF)
        object.__setattr__(
            self, "stream_id", int(self.stream_id) & 0xFFFFFFFFFFFFFFFF
        )

    def generator(self):
        """A fresh numpy Generator positioned at the start of this stream."""
        key = self.seed | (self.stream_id << 64)
        return np.random.Generator(np.random.Philox(key=key))

    def child(self, index):
        """Derive an independent substream; ``index`` selects among siblings."""
        return RandomStream(self.seed, _mix64(self.stream_id ^ _mix64(index)))
