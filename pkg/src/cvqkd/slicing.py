"""Sliced error correction over Gaussian-correlated values.

Alice converts each real value x into m slice bits plus a continuous
remainder sbar in [0, 1] (the conditional CDF of x within its cell), so the
map x -> (sbar, bits) is a bijection.  Bob estimates each slice bit from his
measurement x', the disclosed sbar and the already-corrected lower slices,
using exact maximum-a-posteriori decisions under the Gaussian channel law.

Bit labeling follows the convention that slice 1 is the least significant
bit of the cell index when cells are enumerated left to right; the top
slice m is the sign bit for the default symmetric construction.

The decision regions of the estimators on the x' axis (unions of intervals)
are computed once per conditioning context and shared by the error-rate
integrals, the joint-state construction and the estimator side-information
function.  All heavy paths are vectorized over batches of sbar values.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize as _optimize
from scipy import special as _special

from .mathcore import (
    TAIL_SIGMAS,
    DomainError,
    binary_entropy,
    integrate,
)

SLICESPEC_FORMAT_VERSION = 1

# Floor for cell quantiles before inversion; corresponds to the 8-sigma
# tail truncation (mass ~6e-16).
_Q_FLOOR = float(_special.ndtr(-TAIL_SIGMAS))


@dataclass(frozen=True)
class SliceSpec:
    """Slicing functions: cell boundaries, bit labeling and modulation.

    ``boundaries`` are the 2^m - 1 finite cell edges in quadrature units
    (strictly increasing); ``variance`` is the modulation variance the
    slices were designed for, in shot-noise units.
    """

    m: int
    boundaries: tuple
    variance: float

    def __post_init__(self):
        if self.m < 1:
            raise DomainError("slice count m must be >= 1")
        bounds = tuple(float(b) for b in self.boundaries)
        object.__setattr__(self, "boundaries", bounds)
        if len(bounds) != 2 ** self.m - 1:
            raise DomainError(
                f"expected {2 ** self.m - 1} boundaries for m={self.m}, "
                f"got {len(bounds)}"
            )
        if any(b2 <= b1 for b1, b2 in zip(bounds, bounds[1:])):
            raise DomainError("boundaries must be strictly increasing")
        if self.variance <= 0.0:
            raise DomainError("variance must be positive")

    @property
    def num_cells(self):
        return 2 ** self.m

    @property
    def clamp(self):
        """Value used in place of the infinite outer cell edges."""
        return TAIL_SIGMAS * math.sqrt(self.variance)

    def cell_edges(self):
        """Cell edges including the infinite outer ones; length 2^m + 1."""
        return np.concatenate(([-np.inf], self.boundaries, [np.inf]))

    def cell_probs(self):
        """Probability of each cell under N(0, variance)."""
        z = self.cell_edges() / math.sqrt(self.variance)
        cdf = _special.ndtr(z)
        return np.diff(cdf)

    def cell_bits(self, k):
        """Bit vector (s_1, ..., s_m) of cell ``k``; slice 1 is the LSB."""
        return tuple((k >> (i - 1)) & 1 for i in range(1, self.m + 1))

    def bits_to_cell(self, bits):
        return sum(int(b) << i for i, b in enumerate(bits))

    @property
    def bit_labeling(self):
        """Mapping cell index -> bit vector, for inspection."""
        return {k: self.cell_bits(k) for k in range(self.num_cells)}

    def to_json(self):
        return {
            "version": SLICESPEC_FORMAT_VERSION,
            "m": self.m,
            "boundaries": list(self.boundaries),
            "variance": self.variance,
        }

    @classmethod
    def from_json(cls, doc):
        if isinstance(doc, str):
            doc = json.loads(doc)
        version = doc.get("version")
        if version != SLICESPEC_FORMAT_VERSION:
            raise DomainError(f"unsupported slice-spec version {version!r}")
        return cls(
            m=int(doc["m"]),
            boundaries=tuple(doc["boundaries"]),
            variance=float(doc["variance"]),
        )


@dataclass(frozen=True)
class SymbolDecomposition:
    """One value decomposed into slice bits and the in-cell remainder."""

    bits: tuple
    sbar: float


def default_equiprobable_spec(m, variance):
    """Slice spec whose cells are the 2^m-quantiles of N(0, variance).

    For m = 2 the boundaries are (-tau, 0, tau) with
    tau = sqrt(2 variance) erfinv(1/2), every cell carrying probability 1/4.
    """
    if m < 1:
        raise DomainError("m must be >= 1")
    if variance <= 0.0:
        raise DomainError("variance must be positive")
    qs = np.arange(1, 2 ** m) / 2 ** m
    bounds = math.sqrt(variance) * _special.ndtri(qs)
    if m >= 1:
        bounds[len(bounds) // 2] = 0.0  # exact median of the symmetric law
    return SliceSpec(m=m, boundaries=tuple(bounds), variance=variance)


def _cell_index(spec, x):
    return np.searchsorted(spec.boundaries, x, side="left")


def decompose(x, spec):
    """Split ``x`` into its slice bits and in-cell conditional CDF value."""
    x = float(x)
    if not math.isfinite(x):
        raise DomainError("x must be finite")
    k = int(_cell_index(spec, x))
    sd = math.sqrt(spec.variance)
    edges = spec.cell_edges()
    lo = _special.ndtr(edges[k] / sd)
    hi = _special.ndtr(edges[k + 1] / sd)
    sbar = (_special.ndtr(x / sd) - lo) / (hi - lo)
    return SymbolDecomposition(bits=spec.cell_bits(k), sbar=min(max(sbar, 0.0), 1.0))


def decompose_batch(x, spec):
    """Vectorized :func:`decompose`; returns (bits (n, m) uint8, sbar (n,))."""
    x = np.asarray(x, dtype=float)
    k = _cell_index(spec, x)
    sd = math.sqrt(spec.variance)
    cdf_edges = _special.ndtr(spec.cell_edges() / sd)
    lo = cdf_edges[k]
    width = cdf_edges[k + 1] - lo
    sbar = np.clip((_special.ndtr(x / sd) - lo) / width, 0.0, 1.0)
    bits = (k[:, None] >> np.arange(spec.m)[None, :]) & 1
    return bits.astype(np.uint8), sbar


def invert(d, spec):
    """Unique x with decompose(x) == d.

    The in-cell conditional CDF is inverted in closed form.  Remainders of
    exactly 0 or 1 in the unbounded outer cells map to the 8-sigma clamp
    points rather than to +-infinity.
    """
    if len(d.bits) != spec.m:
        raise DomainError(f"expected {spec.m} bits, got {len(d.bits)}")
    sbar = float(d.sbar)
    if not 0.0 <= sbar <= 1.0:
        raise DomainError("sbar must lie in [0, 1]")
    k = spec.bits_to_cell(d.bits)
    x = _cells_at(spec, np.array([sbar]), np.array([k]))[0]
    return float(x)


def _cells_at(spec, sbar, cells):
    """x values at remainder ``sbar`` inside ``cells`` (both (n,) arrays)."""
    sd = math.sqrt(spec.variance)
    cdf_edges = _special.ndtr(spec.cell_edges() / sd)
    q = cdf_edges[cells] + sbar * (cdf_edges[cells + 1] - cdf_edges[cells])
    q = np.clip(q, _Q_FLOOR, 1.0 - _Q_FLOOR)
    return np.clip(sd * _special.ndtri(q), -spec.clamp, spec.clamp)


def _cell_points(spec, sbar):
    """Representatives of every cell at the given remainders.

    Returns an (n, 2^m) array whose column k is the x value inside cell k
    with in-cell conditional CDF ``sbar``; columns are strictly increasing
    left to right.  Outer-cell values are clamped at 8 sigma.
    """
    sbar = np.asarray(sbar, dtype=float)
    sd = math.sqrt(spec.variance)
    cdf_edges = _special.ndtr(spec.cell_edges() / sd)
    lo = cdf_edges[:-1][None, :]
    width = np.diff(cdf_edges)[None, :]
    q = np.clip(lo + sbar[:, None] * width, _Q_FLOOR, 1.0 - _Q_FLOOR)
    return np.clip(sd * _special.ndtri(q), -spec.clamp, spec.clamp)


# ---------------------------------------------------------------------------
# Estimator decision machinery.
#
# The estimator for slice i, conditioned on the previously corrected bits
# ``prev`` (an integer encoding bits s_1 .. s_{i-1}), compares two posterior
# mixtures along the x' axis.  Candidate cells on side b are
#     k = prev + b 2^(i-1) + t 2^i,   t = 0 .. 2^(m-i) - 1,
# each weighted by its cell probability (the joint density of (cell, sbar)
# factorizes as P_cell x uniform, so cells sharing a remainder carry their
# cell probability as prior weight).  The decision regions alternate between
# bit 0 and bit 1 across the sign changes of the log-posterior difference;
# bit 0 always wins at x' -> -inf because side 0 owns the leftmost cell.
# ---------------------------------------------------------------------------


def _candidate_cells(spec, i, prev):
    step = 2 ** i
    half = 2 ** (i - 1)
    tails = np.arange(2 ** (spec.m - i)) * step
    side0 = prev + tails
    side1 = prev + half + tails
    return side0, side1


def _log_mixture(y, mus, logw, sigma):
    """log sum_k w_k phi(y; mu_k, sigma), up to a common additive constant.

    ``y``: (..., 1) broadcastable against ``mus``: (n, K); result (..., n)?
    Shapes: y (n, G), mus (n, K) -> out (n, G).
    """
    z = (y[:, :, None] - mus[:, None, :]) / sigma
    expo = logw[:, None, :] - 0.5 * z * z
    mx = np.max(expo, axis=2)
    return mx + np.log(np.sum(np.exp(expo - mx[:, :, None]), axis=2))


def _instance_roots(spec, channel, x_cells, logp, i, prev, n_scan=None):
    """Decision boundaries of estimator i given lower bits ``prev``.

    Parameters
    ----------
    x_cells : (n, 2^m) array
        Cell representatives at each sample's remainder.
    logp : (2^m,) array
        Log prior weight (log cell probability) of every cell.

    Returns
    -------
    (n, R) array of ascending boundaries padded with +inf.  Decision regions
    alternate 0, 1, 0, ... from the left.
    """
    eta = channel.transmittance
    sigma = math.sqrt(channel.noise_variance)
    side0, side1 = _candidate_cells(spec, i, prev)
    mus0 = math.sqrt(eta) * x_cells[:, side0]
    mus1 = math.sqrt(eta) * x_cells[:, side1]
    n = x_cells.shape[0]

    if len(side0) == 1:
        # Single Gaussian against single Gaussian: closed-form threshold.
        mu0 = mus0[:, 0]
        mu1 = mus1[:, 0]
        root = 0.5 * (mu0 + mu1) + sigma * sigma * (
            logp[side0[0]] - logp[side1[0]]
        ) / (mu1 - mu0)
        return root[:, None]

    lw0 = np.broadcast_to(logp[side0], mus0.shape)
    lw1 = np.broadcast_to(logp[side1], mus1.shape)

    lo = mus0[:, 0] - 12.0 * sigma
    hi = mus1[:, -1] + 12.0 * sigma
    if n_scan is None:
        span = float(np.max(hi - lo))
        n_scan = min(4096, max(64, int(span / (sigma / 8.0)) + 1))
    t = np.linspace(0.0, 1.0, n_scan)
    y = lo[:, None] + (hi - lo)[:, None] * t[None, :]

    g = _log_mixture(y, mus0, lw0, sigma) - _log_mixture(y, mus1, lw1, sigma)
    sign = np.where(g >= 0.0, 1, -1)
    flips = sign[:, :-1] != sign[:, 1:]
    rows, cols = np.nonzero(flips)

    # Root parity must be odd (sign is + at -inf and - at +inf); a miss means
    # the scan straddled a near-tangent pair -- rescan those rows finer.
    counts = np.bincount(rows, minlength=n)
    bad = np.nonzero(counts % 2 == 0)[0]
    if bad.size and n_scan < 4096:
        fine = _instance_roots(
            spec, channel, x_cells[bad], logp, i, prev, n_scan=4096
        )
        ok = np.setdiff1d(np.arange(n), bad)
        r_max = max(int(counts.max()), fine.shape[1], 1)
        roots = np.full((n, r_max), np.inf)
        if ok.size:
            coarse = _bisect_roots(
                y, g, rows, cols, mus0, lw0, mus1, lw1, sigma, n, counts
            )
            roots[ok, : coarse.shape[1]] = coarse[ok]
        roots[bad, : fine.shape[1]] = fine
        return roots

    return _bisect_roots(y, g, rows, cols, mus0, lw0, mus1, lw1, sigma, n, counts)


def _bisect_roots(y, g, rows, cols, mus0, lw0, mus1, lw1, sigma, n, counts):
    lo = y[rows, cols]
    hi = y[rows, cols + 1]
    glo = g[rows, cols]
    m0 = mus0[rows]
    w0 = lw0[rows]
    m1 = mus1[rows]
    w1 = lw1[rows]
    for _ in range(50):
        mid = 0.5 * (lo + hi)
        gmid = (
            _log_mixture(mid[:, None], m0, w0, sigma)
            - _log_mixture(mid[:, None], m1, w1, sigma)
        )[:, 0]
        same = np.sign(gmid) == np.sign(glo)
        lo = np.where(same, mid, lo)
        glo = np.where(same, gmid, glo)
        hi = np.where(same, hi, mid)
    r_max = max(int(counts.max()) if counts.size else 1, 1)
    roots = np.full((n, r_max), np.inf)
    first = np.concatenate(([0], np.cumsum(counts)[:-1]))
    slot = np.arange(rows.size) - first[rows]
    roots[rows, slot] = 0.5 * (lo + hi)
    return roots


def _all_instance_roots(spec, channel, x_cells, logp):
    """Roots for every (slice, prev-bits) conditioning context."""
    out = {}
    for i in range(1, spec.m + 1):
        for prev in range(2 ** (i - 1)):
            out[(i, prev)] = _instance_roots(spec, channel, x_cells, logp, i, prev)
    return out


def _segments_for_cell(spec, roots_by_instance, k):
    """Decision-region segmentation of the x' axis for Alice's cell ``k``.

    Returns (edges, e_index): ``edges`` is (n, R+2) ascending including the
    infinite endpoints, ``e_index`` is (n, R+1) giving the estimator vector
    decided on each segment.
    """
    pieces = []
    for i in range(1, spec.m + 1):
        prev = k & (2 ** (i - 1) - 1)
        pieces.append(roots_by_instance[(i, prev)])
    allr = np.sort(np.concatenate(pieces, axis=1), axis=1)
    n = allr.shape[0]
    ninf = np.full((n, 1), -np.inf)
    pinf = np.full((n, 1), np.inf)
    edges = np.concatenate([ninf, allr, pinf], axis=1)
    left = edges[:, :-1]
    e_index = np.zeros(left.shape, dtype=np.int64)
    for i in range(1, spec.m + 1):
        prev = k & (2 ** (i - 1) - 1)
        r = roots_by_instance[(i, prev)]
        count = np.sum(r[:, None, :] <= left[:, :, None], axis=2)
        e_index |= (count & 1) << (i - 1)
    return edges, e_index


def joint_estimator_masses(spec, channel, sbar):
    """Estimator-vector distribution for every Alice cell at each remainder.

    Returns ``(x_cells, G)`` where ``x_cells`` is the (n, 2^m) array of cell
    representatives and ``G`` has shape (n, 2^m, 2^m): ``G[j, k, e]`` is the
    probability that Bob's estimator vector equals ``e`` given that Alice's
    value lies in cell ``k`` with remainder ``sbar[j]``, with lower slices
    corrected.  This is the workhorse of the joint-state construction.
    """
    sbar = np.asarray(sbar, dtype=float)
    n = sbar.size
    ncells = spec.num_cells
    x_cells = _cell_points(spec, sbar)
    logp = np.log(spec.cell_probs())
    roots = _all_instance_roots(spec, channel, x_cells, logp)
    sigma = math.sqrt(channel.noise_variance)
    sqeta = math.sqrt(channel.transmittance)
    G = np.zeros((n, ncells, ncells))
    rows = np.arange(n)
    for k in range(ncells):
        edges, e_index = _segments_for_cell(spec, roots, k)
        cdf = _special.ndtr((edges - sqeta * x_cells[:, k : k + 1]) / sigma)
        segmass = np.diff(cdf, axis=1)
        flat = (rows[:, None] * ncells + e_index).ravel()
        G[:, k, :] = np.bincount(
            flat, weights=segmass.ravel(), minlength=n * ncells
        ).reshape(n, ncells)
    return x_cells, G


def map_bit_llr(i, x_prime, sbar, prev, channel, spec):
    """Log-likelihood ratio log(P[bit=0] / P[bit=1]) for slice ``i``.

    ``prev`` encodes the corrected bits of slices below ``i`` as an integer
    (slice 1 in the least significant position).  All of ``x_prime``,
    ``sbar`` and ``prev`` may be arrays of equal length.
    """
    x_prime = np.atleast_1d(np.asarray(x_prime, dtype=float))
    sbar = np.atleast_1d(np.asarray(sbar, dtype=float))
    prev = np.atleast_1d(np.asarray(prev, dtype=np.int64))
    x_prime, sbar, prev = np.broadcast_arrays(x_prime, sbar, prev)
    sigma = math.sqrt(channel.noise_variance)
    sqeta = math.sqrt(channel.transmittance)
    logp = np.log(spec.cell_probs())
    x_cells = _cell_points(spec, sbar)
    half = 2 ** (i - 1)
    tails = np.arange(2 ** (spec.m - i)) * 2 ** i
    out = np.empty(x_prime.shape)
    for pv in np.unique(prev):
        mask = prev == pv
        side0 = pv + tails
        side1 = pv + half + tails
        mus0 = sqeta * x_cells[np.ix_(mask, side0)]
        mus1 = sqeta * x_cells[np.ix_(mask, side1)]
        y = x_prime[mask][:, None]
        lse0 = _log_mixture(y, mus0, np.broadcast_to(logp[side0], mus0.shape), sigma)
        lse1 = _log_mixture(y, mus1, np.broadcast_to(logp[side1], mus1.shape), sigma)
        out[mask] = (lse0 - lse1)[:, 0]
    return out


def map_estimate_bit(i, x_prime, sbar, prev_bits, channel, spec):
    """MAP estimate of Alice's slice-``i`` bit from Bob's side information.

    Exact posterior ties resolve to bit 0.
    """
    if len(prev_bits) != i - 1:
        raise DomainError(f"slice {i} estimator needs {i - 1} previous bits")
    prev = sum(int(b) << j for j, b in enumerate(prev_bits))
    llr = map_bit_llr(i, x_prime, sbar, prev, channel, spec)
    return int(llr[0] < 0.0)


def estimate_bits_batch(spec, channel, x_prime, sbar):
    """Sequential MAP estimates of all m slice bits (genie-aided order).

    Returns an (n, m) uint8 array; slice i uses the *estimated* bits of the
    lower slices, mirroring the sequential protocol without corrections.
    """
    x_prime = np.asarray(x_prime, dtype=float)
    n = x_prime.size
    prev = np.zeros(n, dtype=np.int64)
    bits = np.zeros((n, spec.m), dtype=np.uint8)
    for i in range(1, spec.m + 1):
        llr = map_bit_llr(i, x_prime, sbar, prev, channel, spec)
        b = (llr < 0.0).astype(np.uint8)
        bits[:, i - 1] = b
        prev |= b.astype(np.int64) << (i - 1)
    return bits


def ebar_batch(x_prime, sbar, cells, channel, spec):
    """Vectorized estimator side information (see :func:`ebar`)."""
    x_prime = np.asarray(x_prime, dtype=float)
    sbar = np.asarray(sbar, dtype=float)
    cells = np.asarray(cells, dtype=np.int64)
    n = x_prime.size
    sigma = math.sqrt(channel.noise_variance)
    sqeta = math.sqrt(channel.transmittance)
    x_cells = _cell_points(spec, sbar)
    logp = np.log(spec.cell_probs())
    roots = _all_instance_roots(spec, channel, x_cells, logp)
    out = np.empty(n)
    for k in np.unique(cells):
        mask = cells == k
        sub = {key: r[mask] for key, r in roots.items()}
        edges, e_index = _segments_for_cell(spec, sub, int(k))
        mu = sqeta * x_cells[mask, k][:, None]
        cdf = _special.ndtr((edges - mu) / sigma)
        segmass = np.diff(cdf, axis=1)
        xp = x_prime[mask][:, None]
        seg_of_x = np.sum(edges[:, 1:-1] <= xp, axis=1)
        rows = np.arange(mask.sum())
        target = e_index[rows, seg_of_x]
        match = e_index == target[:, None]
        total = np.sum(segmass * match, axis=1)
        below = (np.arange(e_index.shape[1])[None, :] < seg_of_x[:, None])
        full_below = np.sum(segmass * match * below, axis=1)
        partial = _special.ndtr((x_prime[mask] - mu[:, 0]) / sigma) - cdf[
            rows, seg_of_x
        ]
        out[mask] = np.clip((full_below + partial) / np.maximum(total, 1e-300), 0.0, 1.0)
    return out


def ebar(x_prime, sbar, bits, channel, spec):
    """Conditional CDF of Bob's value given everything both sides computed.

    This is Pr[X' <= x' | sbar, all slice bits, all estimator values]; by
    construction it is uniform on [0, 1] given its conditioning variables
    and statistically independent of the estimator bits.
    """
    k = spec.bits_to_cell(bits)
    return float(
        ebar_batch(
            np.array([float(x_prime)]),
            np.array([float(sbar)]),
            np.array([k]),
            channel,
            spec,
        )[0]
    )


def _wrong_mass_at(spec, channel, x):
    """Per-slice probability that the estimator errs, given Alice's x.

    Returns a length-m array: entry i-1 is the mass of the x' region where
    estimator i (fed the true lower bits of x) decides against slice i of x.
    """
    k = int(_cell_index(spec, x))
    d = decompose(x, spec)
    x_cells = _cell_points(spec, np.array([d.sbar]))
    logp = np.log(spec.cell_probs())
    sigma = math.sqrt(channel.noise_variance)
    mu = math.sqrt(channel.transmittance) * x
    out = np.empty(spec.m)
    for i in range(1, spec.m + 1):
        prev = k & (2 ** (i - 1) - 1)
        roots = _instance_roots(spec, channel, x_cells, logp, i, prev)[0]
        roots = roots[np.isfinite(roots)]
        cdf = _special.ndtr((np.concatenate(([-np.inf], roots, [np.inf])) - mu) / sigma)
        seg = np.diff(cdf)
        true_bit = (k >> (i - 1)) & 1
        wrong = np.arange(seg.size) % 2 != true_bit
        out[i - 1] = float(np.sum(seg[wrong]))
    return out


def classical_bit_error_rate(i, spec, channel, rel_tol=1e-6):
    """Error probability of the slice-``i`` estimator with corrected lower
    slices: the double integral of the wrong-decision indicator against
    N(0, V) x N(sqrt(eta) x, noise).  The inner x' mass is evaluated in
    closed form per x; the outer x integral is adaptive with breakpoints at
    the cell boundaries.
    """
    if not 1 <= i <= spec.m:
        raise DomainError(f"slice index {i} out of range 1..{spec.m}")
    sd = math.sqrt(spec.variance)
    lim = spec.clamp

    def integrand(x):
        pdf = math.exp(-x * x / (2.0 * spec.variance)) / (sd * math.sqrt(2 * math.pi))
        return pdf * _wrong_mass_at(spec, channel, x)[i - 1]

    from scipy import integrate as _si

    value, err = _si.quad(
        integrand, -lim, lim, points=list(spec.boundaries),
        epsabs=1e-12, epsrel=rel_tol, limit=400,
    )
    from .mathcore import IntegrationError

    if err > rel_tol * abs(value) + 1e-10:
        raise IntegrationError(
            f"bit-error integral for slice {i} did not converge "
            f"(error {err:.2e})"
        )
    return min(max(value, 0.0), 1.0)


def sec_common_bit_rate(spec, channel):
    """Common bits per sample produced by sliced error correction.

    H(slice bits) minus the ideal syndrome cost sum_i h(e_i^b); equals m
    minus the entropy costs for equiprobable cells.
    """
    probs = spec.cell_probs()
    h_cells = float(-np.sum(probs * np.log2(probs)))
    cost = sum(
        binary_entropy(classical_bit_error_rate(i, spec, channel))
        for i in range(1, spec.m + 1)
    )
    return h_cells - cost


@dataclass(frozen=True)
class OptimizationResult:
    spec: SliceSpec
    objective: float
    initial_objective: float
    evaluations: int
    converged: bool


def optimize_slices(
    channel, m, initial, objective=None, max_evals=200, boundary_tol=1e-3
):
    """Derivative-free search over the boundary vector.

    ``objective`` maps a SliceSpec to the quantity being maximized and
    defaults to the total distillable rate of the joint-state analysis.
    The search is a Nelder-Mead simplex with monotone acceptance: the
    returned spec never scores below ``initial``.  Exhausting the
    evaluation budget returns the best spec seen with ``converged=False``.
    """
    if objective is None:
        from . import epanalysis

        def objective(spec):
            return epanalysis.total_rate(spec, channel)

    if initial.m != m:
        raise DomainError("initial spec has wrong slice count")

    best = {"spec": initial, "value": objective(initial)}
    initial_value = best["value"]
    evals = [1]

    def negated(vec):
        if np.any(np.diff(vec) <= 0.0):
            return 1e6  # simplex wandered out of the ordered region
        if evals[0] >= max_evals:
            return 1e6
        spec = SliceSpec(m=m, boundaries=tuple(vec), variance=initial.variance)
        evals[0] += 1
        value = objective(spec)
        if value > best["value"]:
            best["spec"] = spec
            best["value"] = value
        return -value

    result = _optimize.minimize(
        negated,
        np.asarray(initial.boundaries, dtype=float),
        method="Nelder-Mead",
        options={
            "maxfev": max_evals,
            "xatol": boundary_tol,
            "fatol": 1e-6,
            "initial_simplex": _initial_simplex(initial),
        },
    )
    return OptimizationResult(
        spec=best["spec"],
        objective=best["value"],
        initial_objective=initial_value,
        evaluations=evals[0],
        converged=bool(result.success) and evals[0] < max_evals,
    )


def _initial_simplex(spec):
    base = np.asarray(spec.boundaries, dtype=float)
    n = base.size
    simplex = np.tile(base, (n + 1, 1))
    step = 0.05 * math.sqrt(spec.variance)
    for j in range(n):
        simplex[j + 1, j] += step
        if j + 1 < n and simplex[j + 1, j] >= simplex[j + 1, j + 1]:
            simplex[j + 1, j] = 0.5 * (base[j] + base[j + 1])
    return simplex
