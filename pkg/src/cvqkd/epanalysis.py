"""Numerical construction of the reduced slice/estimator quantum state and
the per-slice bit/phase error and distillable-pair rates.

The global pure state over Alice's value register, Bob's mode and the
eavesdropper's mode is rewritten in the (bits, remainder) coordinates on
both sides.  Tracing out the two continuous remainder registers and the
eavesdropper leaves a 4^m-dimensional state over the slice and estimator
qubit registers whose matrix elements reduce to one-dimensional integrals
over the remainder sbar:

    <s,e| rho |s',e'> =
        sqrt(P_s P_s') Int_0^1 dsbar  kappa(x(sbar,s), x(sbar,s'))
                                      sqrt(G_e(sbar,s) G_e'(sbar,s'))

where P_s is the cell probability, x(sbar, s) inverts the slice
decomposition, kappa is the eavesdropper overlap kernel and G_e(sbar, s) is
the probability that Bob's estimator vector comes out as e given Alice's
cell and remainder.  The estimator-side remainder integrates out exactly:
its normalization function cancels Bob's conditional amplitude pointwise,
leaving the square-root cell masses above, constant along ebar (the
cancellation is verified numerically in the test suite).  Adaptivity is
therefore spent along sbar, where the integrand has kinks wherever the
estimator decision regions change structure.

All coefficients are real and non-negative in this basis: the receiver's
p-quadrature compensation makes every amplitude real, and the integrand is
a product of non-negative factors.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelModel, eve_overlap_kernel, from_loss_db
from .mathcore import DomainError, IntegrationError, binary_entropy
from .slicing import SliceSpec, joint_estimator_masses

# Gauss-Kronrod 15/7 pair on [-1, 1]; ascending nodes.  The odd-indexed
# nodes form the embedded 7-point Gauss rule used for error estimation.
_GK_NODES = np.array([
    -0.991455371120813, -0.949107912342759, -0.864864423359769,
    -0.741531185599394, -0.586087235467691, -0.405845151377397,
    -0.207784955007898, 0.0, 0.207784955007898, 0.405845151377397,
    0.586087235467691, 0.741531185599394, 0.864864423359769,
    0.949107912342759, 0.991455371120813,
])
_GK_WEIGHTS = np.array([
    0.022935322010529, 0.063092092629979, 0.104790010322250,
    0.140653259715525, 0.169004726639267, 0.190350578064785,
    0.204432940075298, 0.209482141084728, 0.204432940075298,
    0.190350578064785, 0.169004726639267, 0.140653259715525,
    0.104790010322250, 0.063092092629979, 0.022935322010529,
])
_GAUSS_WEIGHTS = np.array([
    0.129484966168870, 0.279705391489277, 0.381830050505119,
    0.417959183673469, 0.381830050505119, 0.279705391489277,
    0.129484966168870,
])
_GAUSS_IDX = np.arange(1, 15, 2)


@dataclass(frozen=True)
class ReducedJointState:
    """Reduced state over the ordered slice/estimator qubit registers.

    The basis index is ``s_index * 2^m + e_index`` with slice 1 (estimator 1)
    in the least significant bit of its group.  The matrix is real
    symmetric with unit trace; ``element_error`` is the worst per-element
    quadrature error bound.
    """

    matrix: np.ndarray
    m: int
    element_error: float

    def trace(self):
        return float(np.trace(self.matrix))

    def purity(self):
        return float(np.trace(self.matrix @ self.matrix))

    def min_eigenvalue(self):
        return float(np.linalg.eigvalsh(self.matrix)[0])


def reduced_joint_state(
    spec, channel, rel_tol=1e-6, abs_floor=1e-10, max_panels=4000
):
    """Construct the reduced slice/estimator state for the given channel.

    Requires the pure attenuation channel (no excess noise) and m <= 3; the
    cost grows with the fourth power of the register dimension.  Every
    matrix element is integrated adaptively until its error estimate is
    below ``rel_tol * |element| + abs_floor``.
    """
    if channel.excess_noise != 0.0:
        raise DomainError(
            "joint-state construction needs a pure attenuation channel "
            "(excess_noise == 0)"
        )
    if spec.m > 3:
        raise DomainError("joint-state construction supports m <= 3")

    dim = 4 ** spec.m
    ncells = spec.num_cells
    idx_a, idx_b = np.triu_indices(dim)
    ka, ea = idx_a >> spec.m, idx_a & (ncells - 1)
    kb, eb = idx_b >> spec.m, idx_b & (ncells - 1)
    probs = spec.cell_probs()
    coef = np.sqrt(probs[ka] * probs[kb])
    n_elem = idx_a.size

    def eval_panels(lo, hi):
        """Integrate all elements over the panels [lo_i, hi_i]; returns
        (values, errors) of shape (npanels, n_elem)."""
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        nodes = (mid[:, None] + half[:, None] * _GK_NODES[None, :]).ravel()
        x_cells, masses = joint_estimator_masses(spec, channel, nodes)
        kappa = eve_overlap_kernel(
            x_cells[:, :, None], x_cells[:, None, :], channel
        )
        sqrt_g = np.sqrt(masses)
        f = coef[None, :] * kappa[:, ka, kb] * sqrt_g[:, ka, ea] * sqrt_g[:, kb, eb]
        f = f.reshape(lo.size, _GK_NODES.size, n_elem)
        i15 = np.einsum("k,pkn->pn", _GK_WEIGHTS, f) * half[:, None]
        i7 = np.einsum("k,pkn->pn", _GAUSS_WEIGHTS, f[:, _GAUSS_IDX, :]) * half[:, None]
        return i15, np.abs(i15 - i7)

    lo = np.linspace(0.0, 1.0, 17)[:-1]
    hi = np.linspace(0.0, 1.0, 17)[1:]
    values, errors = eval_panels(lo, hi)

    while True:
        total = values.sum(axis=0)
        err = errors.sum(axis=0)
        tol = rel_tol * np.abs(total) + abs_floor
        failing = err > tol
        if not np.any(failing):
            break
        if lo.size >= max_panels:
            worst = int(np.argmax(err - tol))
            raise IntegrationError(
                f"joint-state element ({idx_a[worst]}, {idx_b[worst]}) did "
                f"not converge after {lo.size} panels "
                f"(error {err[worst]:.2e}, tolerance {tol[worst]:.2e})"
            )
        # Split the panels carrying the largest error on any failing element.
        score = errors[:, failing].max(axis=1)
        n_split = max(1, min(int(np.count_nonzero(score > 0)), 64))
        order = np.argsort(score)[::-1][:n_split]
        order = order[score[order] > 0.0]
        mid = 0.5 * (lo[order] + hi[order])
        new_lo = np.concatenate([lo[order], mid])
        new_hi = np.concatenate([mid, hi[order]])
        child_vals, child_errs = eval_panels(new_lo, new_hi)
        keep = np.setdiff1d(np.arange(lo.size), order)
        lo = np.concatenate([lo[keep], new_lo])
        hi = np.concatenate([hi[keep], new_hi])
        values = np.concatenate([values[keep], child_vals])
        errors = np.concatenate([errors[keep], child_errs])

    matrix = np.zeros((dim, dim))
    matrix[idx_a, idx_b] = total
    matrix[idx_b, idx_a] = total
    return ReducedJointState(
        matrix=matrix, m=spec.m, element_error=float(err.max())
    )


def pair_marginal(state, i):
    """Partial trace onto the slice-``i`` register pair (s_i, e_i).

    Returns a 4x4 matrix over the basis index ``2 s_i + e_i``.
    """
    m = state.m
    if not 1 <= i <= m:
        raise DomainError(f"slice index {i} out of range 1..{m}")
    t = state.matrix.reshape((2,) * (4 * m))
    # Axis layout per side: (s_m .. s_1, e_m .. e_1); kept axes are s_i, e_i.
    letters = "abcdefghijklmnopqrstuvwx"
    bra = list(letters[: 2 * m])
    ket = list(letters[2 * m : 4 * m])
    for j in range(2 * m):
        if j not in (m - i, 2 * m - i):
            ket[j] = bra[j]
    out = "".join([bra[m - i], bra[2 * m - i], ket[m - i], ket[2 * m - i]])
    rho = np.einsum(f"{''.join(bra)}{''.join(ket)}->{out}", t)
    return rho.reshape(4, 4)


def bit_error_rate(rho_pair):
    """(1 - <Z x Z>) / 2 of a two-qubit state, clamped to [0, 1]."""
    d = np.real(np.diag(rho_pair))
    zz = d[0] - d[1] - d[2] + d[3]
    return float(np.clip((1.0 - zz) / 2.0, 0.0, 1.0))


def phase_error_rate(rho_pair):
    """(1 - <X x X>) / 2 of a two-qubit state, clamped to [0, 1]."""
    r = np.real(rho_pair)
    xx = r[0, 3] + r[3, 0] + r[1, 2] + r[2, 1]
    return float(np.clip((1.0 - xx) / 2.0, 0.0, 1.0))


def slice_rate(e_b, e_p):
    """Distillable pairs (or secret bits) per sample for one slice:
    1 - h(e_b) - h(e_p), clamped at zero when the code costs exceed one bit.
    """
    return max(0.0, 1.0 - binary_entropy(e_b) - binary_entropy(e_p))


@dataclass(frozen=True)
class SliceRates:
    """Per-slice error rates and rate; ``rate_raw`` may be negative."""

    e_b: float
    e_p: float
    rate_raw: float

    @property
    def available(self):
        return self.rate_raw > 0.0

    @property
    def rate(self):
        return max(0.0, self.rate_raw)


@dataclass(frozen=True)
class RateRow:
    """One attenuation value of the rate table."""

    loss_db: float
    slices: tuple
    total_rate: float


def analyze_state(state):
    """Per-slice rates of an already-constructed joint state."""
    out = []
    for i in range(1, state.m + 1):
        rho = pair_marginal(state, i)
        e_b = bit_error_rate(rho)
        e_p = phase_error_rate(rho)
        raw = 1.0 - binary_entropy(e_b) - binary_entropy(e_p)
        out.append(SliceRates(e_b=e_b, e_p=e_p, rate_raw=raw))
    return tuple(out)


def total_rate(spec, channel, rel_tol=1e-6):
    """Total distillable rate sum_i max(0, R_i); optimizer objective."""
    state = reduced_joint_state(spec, channel, rel_tol=rel_tol)
    return sum(s.rate for s in analyze_state(state))


def rate_row(spec, loss_db, rel_tol=1e-6):
    channel = from_loss_db(loss_db)
    state = reduced_joint_state(spec, channel, rel_tol=rel_tol)
    slices = analyze_state(state)
    return RateRow(
        loss_db=float(loss_db),
        slices=slices,
        total_rate=sum(s.rate for s in slices),
    )


def rate_table(spec, losses_db, mod=None, rel_tol=1e-6, map_fn=map):
    """One RateRow per loss value, mirroring the attenuation benchmark.

    ``mod`` (if given) must agree with the spec's design variance.
    ``map_fn`` lets callers parallelize across losses; results keep the
    input order regardless.
    """
    if mod is not None and mod.variance != spec.variance:
        raise DomainError(
            "modulation variance disagrees with the slice-spec variance"
        )
    losses = [float(l) for l in losses_db]
    return list(map_fn(lambda l: rate_row(spec, l, rel_tol=rel_tol), losses))


def rows_to_json(rows, extra=None):
    """JSON-ready dict for a list of RateRows; raw rates are retained."""
    payload = []
    for row in rows:
        entry = {
            "loss_db": row.loss_db,
            "total_rate": row.total_rate,
            "slices": [
                {
                    "e_b": s.e_b,
                    "e_p": s.e_p,
                    "rate_raw": s.rate_raw,
                    "available": s.available,
                }
                for s in row.slices
            ],
        }
        payload.append(entry)
    doc = {"rows": payload}
    if extra:
        doc.update(extra)
    return doc


def rows_to_csv(rows, extra_columns=None, header_comments=()):
    """CSV text with the fixed column layout
    loss_db, e1_b, e1_p, R1, ..., R_total; unavailable slice rates print
    as '-'.  ``extra_columns`` maps column name -> per-row values appended
    after R_total.
    """
    if not rows:
        raise DomainError("no rows to serialize")
    m = len(rows[0].slices)
    buf = io.StringIO()
    for comment in header_comments:
        buf.write(f"# {comment}\n")
    writer = csv.writer(buf, lineterminator="\n")
    header = ["loss_db"]
    for i in range(1, m + 1):
        header += [f"e{i}_b", f"e{i}_p", f"R{i}"]
    header.append("R_total")
    extra_columns = extra_columns or {}
    header += list(extra_columns)
    writer.writerow(header)
    for j, row in enumerate(rows):
        record = [f"{row.loss_db:g}"]
        for s in row.slices:
            record += [
                f"{s.e_b:.6g}",
                f"{s.e_p:.6g}",
                f"{s.rate_raw:.6g}" if s.available else "-",
            ]
        record.append(f"{row.total_rate:.6g}")
        record += [f"{extra_columns[name][j]:.6g}" for name in extra_columns]
        writer.writerow(record)
    return buf.getvalue()
