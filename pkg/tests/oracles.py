"""Independent numerical oracles used by the test suite.

Everything here deliberately avoids the implementation paths of the package
under test: cumulative distribution functions are built from grid sums
rather than error functions, estimator decisions are brute-force pointwise
posterior comparisons rather than root-finding, masses are Riemann sums,
and quantum states are assembled in a truncated Fock basis.
"""

import math

import numpy as np


# ---------------------------------------------------------------------------
# Grid-discretization oracle for the reduced slice/estimator state.
# ---------------------------------------------------------------------------

def grid_reduced_state(spec, channel, n_x=2000, n_xp=2001, n_sbar=1200):
    """Discretized construction of the reduced joint state.

    Discretizes the sender's value on ``n_x`` grid points to build the
    within-cell CDFs, represents the remainder register on ``n_sbar``
    equal-probability levels, scans the receiver's axis pointwise for the
    estimator decisions, and partial-traces by pairing equal remainder
    levels.  Shares no special-function machinery with the package.
    """
    V = spec.variance
    eta = channel.transmittance
    sigma2 = channel.noise_variance
    lim = 8.0 * math.sqrt(V)
    ncells = spec.num_cells

    xs = np.linspace(-lim, lim, n_x)
    dx = xs[1] - xs[0]
    pdf = np.exp(-xs * xs / (2.0 * V))
    pdf /= pdf.sum() * dx
    cell_of = np.searchsorted(spec.boundaries, xs, side="left")

    probs = np.array([pdf[cell_of == k].sum() * dx for k in range(ncells)])
    probs /= probs.sum()

    # Equal-probability remainder levels, mapped into each cell by the
    # grid CDF (midpoint convention).
    sbars = (np.arange(n_sbar) + 0.5) / n_sbar
    x_at = np.empty((n_sbar, ncells))
    for k in range(ncells):
        sel = cell_of == k
        mass = pdf[sel] * dx
        cdf = np.cumsum(mass) - 0.5 * mass
        cdf /= mass.sum()
        x_at[:, k] = np.interp(sbars, cdf, xs[sel])

    lo = math.sqrt(eta) * x_at.min() - 10.0 * math.sqrt(sigma2)
    hi = math.sqrt(eta) * x_at.max() + 10.0 * math.sqrt(sigma2)
    xps = np.linspace(lo, hi, n_xp)
    dxp = xps[1] - xps[0]

    def likelihood(k):
        d = xps[None, :] - math.sqrt(eta) * x_at[:, k][:, None]
        return np.exp(-d * d / (2.0 * sigma2))

    # Estimator decisions, brute force: for every (slice, lower-bit) context
    # compare the two posterior mixtures pointwise on the x' grid.
    like = [likelihood(k) for k in range(ncells)]
    decisions = {}
    for i in range(1, spec.m + 1):
        step, half = 2 ** i, 2 ** (i - 1)
        for prev in range(half):
            side0 = [prev + t * step for t in range(2 ** (spec.m - i))]
            side1 = [c + half for c in side0]
            w0 = sum(probs[c] * like[c] for c in side0)
            w1 = sum(probs[c] * like[c] for c in side1)
            decisions[(i, prev)] = w1 > w0

    evec = {}
    for k in range(ncells):
        idx = np.zeros((n_sbar, n_xp), dtype=np.int64)
        for i in range(1, spec.m + 1):
            prev = k & (2 ** (i - 1) - 1)
            idx |= decisions[(i, prev)].astype(np.int64) << (i - 1)
        evec[k] = idx

    G = np.zeros((n_sbar, ncells, ncells))
    rows = np.arange(n_sbar)
    for k in range(ncells):
        norm = like[k].sum(axis=1) * dxp
        w = like[k] / norm[:, None] * dxp
        flat = (rows[:, None] * ncells + evec[k]).ravel()
        G[:, k, :] = np.bincount(
            flat, weights=w.ravel(), minlength=n_sbar * ncells
        ).reshape(n_sbar, ncells)

    kappa = np.exp(
        -(1.0 - eta)
        * (x_at[:, :, None] - x_at[:, None, :]) ** 2
        / (8.0 * channel.vacuum_noise)
    )
    sq = np.sqrt(G)
    dim = ncells * ncells
    rho = np.zeros((dim, dim))
    for a in range(dim):
        s, e = a >> spec.m, a & (ncells - 1)
        for b in range(a, dim):
            s2, e2 = b >> spec.m, b & (ncells - 1)
            val = math.sqrt(probs[s] * probs[s2]) * np.mean(
                kappa[:, s, s2] * sq[:, s, e] * sq[:, s2, e2]
            )
            rho[a, b] = rho[b, a] = val
    return rho


# ---------------------------------------------------------------------------
# Fock-basis oracles for coherent-state overlaps and Gaussian entropies.
# ---------------------------------------------------------------------------

def coherent_vector(alpha, cutoff):
    """Fock coefficients of |alpha> up to ``cutoff`` (real or complex)."""
    n = np.arange(cutoff)
    log_fact = np.concatenate(([0.0], np.cumsum(np.log(np.arange(1, cutoff)))))
    alpha = complex(alpha)
    if alpha == 0:
        vec = np.zeros(cutoff, dtype=complex)
        vec[0] = 1.0
        return vec
    logs = n * np.log(abs(alpha)) - 0.5 * log_fact
    phases = np.exp(1j * n * np.angle(alpha))
    return np.exp(-0.5 * abs(alpha) ** 2 + logs) * phases


def coherent_overlap_fock(x1, x2, eta, n0=1.0, cutoff=64):
    """<beta|alpha> for the reflected-beam states of two sent values."""
    a1 = math.sqrt(1.0 - eta) * x1 / (2.0 * math.sqrt(n0))
    a2 = math.sqrt(1.0 - eta) * x2 / (2.0 * math.sqrt(n0))
    v1 = coherent_vector(a1, cutoff)
    v2 = coherent_vector(a2, cutoff)
    return float(np.real(np.vdot(v2, v1)))


def fock_entropy(rho):
    """Von Neumann entropy (bits) of a density matrix."""
    vals = np.linalg.eigvalsh(rho)
    vals = vals[vals > 1e-16]
    return float(-np.sum(vals * np.log2(vals)))


def thermal_entropy_fock(nbar, cutoff=64):
    """Entropy of a thermal state by direct Fock diagonalization."""
    if nbar <= 0.0:
        return 0.0
    n = np.arange(cutoff)
    loglam = n * math.log(nbar) - (n + 1) * math.log(1.0 + nbar)
    lam = np.exp(loglam[loglam > -700.0])
    return float(-np.sum(lam * np.log2(lam)))


def _coherent_matrix(alphas, cutoff):
    """Rows are Fock coefficient vectors of the given amplitudes."""
    alphas = np.asarray(alphas, dtype=complex)
    n = np.arange(cutoff)
    log_fact = np.concatenate(([0.0], np.cumsum(np.log(np.arange(1, cutoff)))))
    mag = np.abs(alphas)[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.where(mag > 0, n[None, :] * np.log(np.where(mag > 0, mag, 1.0)), 0.0)
    phases = np.exp(1j * n[None, :] * np.angle(alphas)[:, None])
    out = np.exp(-0.5 * mag ** 2 + logs - 0.5 * log_fact[None, :]) * phases
    out[np.abs(alphas) == 0] = 0.0
    out[np.abs(alphas) == 0, 0] = 1.0
    return out


def _gauss_hermite_mixture(weights_x, xs, weights_p, ps, scale, cutoff):
    """Density matrix of a Gaussian mixture of coherent states.

    alpha = scale * (x + i p) / 2 with (x, p) on the given quadrature nodes.
    """
    xs = np.asarray(xs, dtype=float)
    ps = np.asarray(ps, dtype=float)
    w = (np.asarray(weights_x)[:, None] * np.asarray(weights_p)[None, :]).ravel()
    alphas = (scale * (xs[:, None] + 1j * ps[None, :]) / 2.0).ravel()
    c = _coherent_matrix(alphas, cutoff)
    return np.einsum("k,ki,kj->ij", w, c, c.conj(), optimize=True)


def eve_conditional_entropy_fock(eta, variance, cutoff=256, nodes=96):
    """Entropy of the reflected mode given the sent x (p unknown).

    Built as a Gauss-Hermite mixture over the unknown p modulation at
    x = 0; displacement covariance makes the answer x-independent.
    """
    t, w = np.polynomial.hermite_e.hermegauss(nodes)
    ps = t * math.sqrt(variance)
    wp = w / w.sum()
    rho = _gauss_hermite_mixture([1.0], [0.0], wp, ps, math.sqrt(1 - eta), cutoff)
    return fock_entropy(rho)


def eve_reverse_conditional_entropy_fock(eta, variance, cutoff=256, nodes=96):
    """Entropy of the reflected mode given the receiver's measured x'.

    The posterior of the sent x given x' is Gaussian with variance
    V / (eta V + 1); p keeps its prior.  Evaluated at x' = 0 by
    displacement covariance.
    """
    t, w = np.polynomial.hermite_e.hermegauss(nodes)
    wn = w / w.sum()
    post_var = variance / (eta * variance + 1.0)
    xs = t * math.sqrt(post_var)
    ps = t * math.sqrt(variance)
    rho = _gauss_hermite_mixture(wn, xs, wn, ps, math.sqrt(1 - eta), cutoff)
    return fock_entropy(rho)


def eve_unconditional_entropy_fock(eta, variance, cutoff=768):
    """Entropy of the reflected mode with nothing known (thermal)."""
    nbar = (1.0 - eta) * variance / 2.0
    return thermal_entropy_fock(nbar, cutoff=cutoff)


# ---------------------------------------------------------------------------
# Miscellaneous small oracles.
# ---------------------------------------------------------------------------

def entropy_mpmath(p, dps=50):
    """Binary entropy via arbitrary-precision logs."""
    import mpmath

    with mpmath.workdps(dps):
        p = mpmath.mpf(p)
        if p == 0 or p == 1:
            return 0.0
        val = -(p * mpmath.log(p, 2) + (1 - p) * mpmath.log(1 - p, 2))
        return float(val)


def brute_posterior_bit(spec, channel, i, x_prime, sbar, prev_bits):
    """Direct two-sided posterior comparison for one estimator decision."""
    from cvqkd import slicing

    probs = spec.cell_probs()
    eta = channel.transmittance
    sigma2 = channel.noise_variance
    prev = sum(int(b) << j for j, b in enumerate(prev_bits))
    totals = [0.0, 0.0]
    for k in range(spec.num_cells):
        if (k & (2 ** (i - 1) - 1)) != prev:
            continue
        xk = slicing.invert(
            slicing.SymbolDecomposition(bits=spec.cell_bits(k), sbar=sbar), spec
        )
        w = probs[k] * math.exp(
            -((x_prime - math.sqrt(eta) * xk) ** 2) / (2.0 * sigma2)
        )
        totals[(k >> (i - 1)) & 1] += w
    return int(totals[1] > totals[0])
