"""Operational key distillation: slice-sequential syndrome reconciliation
over a simulated public channel, leakage accounting, and privacy
amplification by Toeplitz hashing.

The sender discloses, per block of ``l`` samples: the continuous remainder
values (side information by protocol design, independent of the key bits),
one syndrome per slice sized from that slice's bit error rate, and a short
random-parity verification tag per slice.  The receiver forms soft
posteriors for each slice from his measurements, the remainders and the
already-corrected lower slices, and runs belief-propagation syndrome
decoding.  Syndrome and verification bits are counted in a leakage ledger;
the final hash length charges the phase-error entropy per slice on top of
the disclosed bits.

Transcript byte layout (little-endian), one record per disclosure:

    u32 length        covers everything after this field
    u32 frame_id
    u8  direction     0 = Alice to Bob, 1 = Bob to Alice
    u8  kind          0 = SBAR, 1 = SYNDROME, 2 = VERIFY
    payload           SBAR: float64 array of remainders
                      SYNDROME: u8 slice index, u32 bit count, packed bits
                      VERIFY: u8 slice index, u32 bit count, packed bits
                      (a one-bit VERIFY reply carries the accept flag)

Packed bits follow the numpy ``packbits`` big-endian-within-byte layout.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .mathcore import DomainError, binary_entropy
from .slicing import decompose_batch, map_bit_llr

_LLR_CLIP = 30.0


# ---------------------------------------------------------------------------
# Sparse parity-check codes and belief propagation.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ParityCheck:
    """Sparse binary parity-check matrix in edge-list form.

    ``check_index`` and ``var_index`` list the edges sorted by check; the
    derived pointers delimit per-check and per-variable edge groups.
    """

    rows: int
    cols: int
    check_index: np.ndarray
    var_index: np.ndarray
    code_id: str

    def __post_init__(self):
        if not self.rows < self.cols:
            raise DomainError("parity check needs rows < cols")
        order = np.argsort(self.check_index, kind="stable")
        object.__setattr__(self, "check_index", self.check_index[order])
        object.__setattr__(self, "var_index", self.var_index[order])
        counts = np.bincount(self.check_index, minlength=self.rows)
        if np.any(counts == 0):
            raise DomainError("every check must touch at least one variable")
        object.__setattr__(
            self, "_check_ptr", np.concatenate(([0], np.cumsum(counts)))
        )
        vorder = np.argsort(self.var_index, kind="stable")
        vcounts = np.bincount(self.var_index, minlength=self.cols)
        if np.any(vcounts == 0):
            raise DomainError("every variable must sit in at least one check")
        object.__setattr__(self, "_var_order", vorder)
        object.__setattr__(
            self, "_var_ptr", np.concatenate(([0], np.cumsum(vcounts)))
        )


def build_code(target_rate, l, stream, column_degree=3):
    """Deterministic sparse code with ``ceil(l (1 - target_rate))`` checks.

    Columns are placed greedily on the lowest-degree checks with seeded
    tie-breaking; candidate placements that would close a 4-cycle are
    rejected for a bounded number of retries, minimizing (not eliminating)
    the short-cycle count when the check space is small.
    """
    if not 0.0 < target_rate < 1.0:
        raise DomainError("target_rate must lie in (0, 1)")
    if l < 1024:
        raise DomainError("block length below 1024 is not supported")
    rows = math.ceil(l * (1.0 - target_rate))
    dv = min(column_degree, rows)
    rng = stream.generator()
    degrees = np.zeros(rows, dtype=np.int64)
    used_pairs = set()
    edges_c = np.empty(l * dv, dtype=np.int64)
    edges_v = np.empty(l * dv, dtype=np.int64)
    pos = 0
    for col in range(l):
        best = None
        best_collisions = None
        for _ in range(12):
            jitter = rng.random(rows)
            picks = np.argsort(degrees + jitter, kind="stable")[:dv]
            collisions = sum(
                1
                for a in range(dv)
                for b in range(a + 1, dv)
                if (min(picks[a], picks[b]), max(picks[a], picks[b])) in used_pairs
            )
            if best is None or collisions < best_collisions:
                best, best_collisions = picks, collisions
            if collisions == 0:
                break
        for a in range(dv):
            for b in range(a + 1, dv):
                used_pairs.add((min(best[a], best[b]), max(best[a], best[b])))
        degrees[best] += 1
        edges_c[pos : pos + dv] = best
        edges_v[pos : pos + dv] = col
        pos += dv
    return ParityCheck(
        rows=rows,
        cols=l,
        check_index=edges_c,
        var_index=edges_v,
        code_id=f"ldpc-dv{dv}-r{rows}x{l}-s{stream.seed:x}.{stream.stream_id:x}",
    )


def syndrome(code, bits):
    """Parity-check image of ``bits`` over GF(2)."""
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.size != code.cols:
        raise DomainError(
            f"bit vector length {bits.size} does not match code width {code.cols}"
        )
    sums = np.add.reduceat(
        bits[code.var_index].astype(np.int64), code._check_ptr[:-1]
    )
    return (sums & 1).astype(np.uint8)


def size_code_rate(e_b, beta):
    """Syndrome sizing for a slice with bit error rate ``e_b``.

    The disclosed fraction is h(e_b) (1 + beta), capped at one; the code
    rate is one minus that fraction.
    """
    if not 0.0 <= e_b < 0.5:
        raise DomainError("e_b must lie in [0, 0.5)")
    if beta < 0.0:
        raise DomainError("beta must be >= 0")
    fraction = min(1.0, binary_entropy(e_b) * (1.0 + beta))
    return 1.0 - fraction


def bp_decode(code, llr, target_syndrome, max_iters=100):
    """Belief-propagation syndrome decoding.

    Finds bits matching ``target_syndrome`` starting from the channel
    log-likelihood ratios (positive means bit 0).  Returns
    ``(bits, converged, iterations)``; non-convergence is reported, never
    silently accepted.
    """
    llr = np.clip(np.asarray(llr, dtype=float), -_LLR_CLIP, _LLR_CLIP)
    target = np.asarray(target_syndrome, dtype=np.uint8)
    hard = (llr < 0.0).astype(np.uint8)
    if np.array_equal(syndrome(code, hard), target):
        return hard, True, 0
    sign = 1.0 - 2.0 * target.astype(float)
    v2c = llr[code.var_index]
    cptr = code._check_ptr
    vorder = code._var_order
    vptr = code._var_ptr
    vi = code.var_index
    ci = code.check_index
    for iteration in range(1, max_iters + 1):
        t = np.tanh(0.5 * np.clip(v2c, -_LLR_CLIP, _LLR_CLIP))
        t = np.where(np.abs(t) < 1e-12, np.where(t < 0, -1e-12, 1e-12), t)
        prod = np.multiply.reduceat(t, cptr[:-1])
        ratio = np.clip(sign[ci] * prod[ci] / t, -0.999999999999, 0.999999999999)
        c2v = 2.0 * np.arctanh(ratio)
        sums = np.add.reduceat(c2v[vorder], vptr[:-1])
        inv = np.empty_like(vorder)
        inv[vorder] = np.arange(vorder.size)
        total = llr + sums
        hard = (total < 0.0).astype(np.uint8)
        if np.array_equal(syndrome(code, hard), target):
            return hard, True, iteration
        v2c = total[vi] - c2v
    return hard, False, max_iters


# ---------------------------------------------------------------------------
# Frames, reconciliation and leakage accounting.
# ---------------------------------------------------------------------------

@dataclass
class LeakageLedger:
    """Exact count of key-relevant bits placed on the public channel."""

    syndrome_bits_per_slice: dict
    verification_bits: int = 0
    continuous_side_info: bool = True

    @property
    def syndrome_bits_total(self):
        return sum(self.syndrome_bits_per_slice.values())

    @property
    def total_bits(self):
        return self.syndrome_bits_total + self.verification_bits


@dataclass
class ReconciliationFrame:
    """All per-block protocol data for one reconciliation attempt."""

    frame_id: int
    block_length: int
    alice_bits: np.ndarray  # (m, l) uint8
    sbar: np.ndarray  # (l,) disclosed remainders
    bob_x: np.ndarray  # (l,) receiver measurements
    syndromes: list  # per-slice syndrome vectors
    verify_tags: list  # per-slice sender tags
    verify_stream: object  # RandomStream seeding the public tag selectors
    decoded_bits: np.ndarray | None = None
    slice_converged: list = field(default_factory=list)
    slice_verified: list = field(default_factory=list)
    accepted: bool = False


VERIFY_TAG_BITS = 32


def _verify_tag(bits, rng):
    """Random-parity tag; consumes 32 rows of selector bits from ``rng``."""
    sel = rng.integers(0, 2, size=(VERIFY_TAG_BITS, bits.size), dtype=np.uint8)
    return ((sel.astype(np.int64) @ bits.astype(np.int64)) & 1).astype(np.uint8)


def make_frame(frame_id, x_values, bob_values, codes, spec, verify_stream):
    """Sender-side frame preparation: slicing, syndromes and tags."""
    bits, sbar = decompose_batch(np.asarray(x_values, dtype=float), spec)
    alice_bits = bits.T.copy()  # (m, l)
    syndromes = [syndrome(codes[i], alice_bits[i]) for i in range(spec.m)]
    tag_rng = verify_stream.generator()
    tags = [_verify_tag(alice_bits[i], tag_rng) for i in range(spec.m)]
    return ReconciliationFrame(
        frame_id=frame_id,
        block_length=len(x_values),
        alice_bits=alice_bits,
        sbar=sbar,
        bob_x=np.asarray(bob_values, dtype=float),
        syndromes=syndromes,
        verify_tags=tags,
        verify_stream=verify_stream,
    )


def reconcile(frame, codes, channel, spec, max_iters=100):
    """Receiver-side sequential decoding of all slices of one frame.

    Slice i is decoded from the measurement posteriors conditioned on the
    corrected bits of slices below i; each decoded slice is checked
    against the sender's random-parity tag and the frame is rejected if
    any slice fails.  Returns ``(decoded_bits, ledger)`` and updates the
    frame status in place.
    """
    m = spec.m
    l = frame.block_length
    decoded = np.zeros((m, l), dtype=np.uint8)
    prev = np.zeros(l, dtype=np.int64)
    # The tag generator replays the sender's public selector stream exactly.
    tag_rng = frame.verify_stream.generator()
    frame.slice_converged = []
    frame.slice_verified = []
    for i in range(m):
        llr = map_bit_llr(i + 1, frame.bob_x, frame.sbar, prev, channel, spec)
        bits, converged, _ = bp_decode(
            codes[i], llr, frame.syndromes[i], max_iters=max_iters
        )
        decoded[i] = bits
        expected = _verify_tag(bits, tag_rng)
        verified = bool(np.array_equal(expected, frame.verify_tags[i]))
        frame.slice_converged.append(bool(converged))
        frame.slice_verified.append(verified)
        prev |= bits.astype(np.int64) << i
    frame.decoded_bits = decoded
    frame.accepted = all(frame.slice_verified)
    ledger = LeakageLedger(
        syndrome_bits_per_slice={
            i + 1: codes[i].rows for i in range(m)
        },
        verification_bits=VERIFY_TAG_BITS * m,
    )
    return decoded, ledger


# ---------------------------------------------------------------------------
# Privacy amplification.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KeyMaterial:
    """Final secret bits with their provenance."""

    bits: np.ndarray
    length: int
    provenance: dict

    def packed(self):
        if self.length == 0:
            return b""
        return np.packbits(self.bits).tobytes()


def toeplitz_hash(bits, out_len, stream):
    """Universal hash by multiplication with a seeded Toeplitz matrix.

    The matrix entries are T[i, j] = t[i + L - 1 - j] for a seeded random
    bit string t; the product is evaluated as one convolution via FFTs,
    which is exact because every intermediate count fits a double.
    """
    bits = np.asarray(bits, dtype=np.uint8)
    length = int(out_len)
    if length <= 0:
        return np.zeros(0, dtype=np.uint8)
    big_l = bits.size
    rng = stream.generator()
    t = rng.integers(0, 2, size=big_l + length - 1, dtype=np.uint8)
    n = 1 << int(math.ceil(math.log2(big_l + t.size)))
    conv = np.fft.irfft(
        np.fft.rfft(t.astype(float), n) * np.fft.rfft(bits.astype(float), n), n
    )
    window = np.rint(conv[big_l - 1 : big_l - 1 + length]).astype(np.int64)
    return (window & 1).astype(np.uint8)


def key_length(block_length, syndrome_bits_per_slice, e_p_per_slice, margin):
    """Hash output length: per slice, the block minus the disclosed
    syndrome bits minus the phase-error charge ceil(l h(e_p)); minus the
    additive margin; clamped at zero."""
    total = 0
    for i, rows in syndrome_bits_per_slice.items():
        charge = math.ceil(block_length * binary_entropy(e_p_per_slice[i]))
        total += block_length - rows - charge
    return max(0, total - margin)


def privacy_amplify(
    bits_per_slice, ledger, e_p_per_slice, margin, stream, block_length=None
):
    """Contract the reconciled slices into final key material.

    ``bits_per_slice`` maps slice index to the corrected bit vector; only
    slices with a positive net rate should be passed in.  Both parties
    call this with identical inputs and seed and obtain identical keys.
    """
    included = sorted(bits_per_slice)
    if not included:
        return KeyMaterial(bits=np.zeros(0, dtype=np.uint8), length=0,
                           provenance={"reason": "no slices included"})
    l = block_length or bits_per_slice[included[0]].size
    rows = {i: ledger.syndrome_bits_per_slice[i] for i in included}
    length = key_length(l, rows, e_p_per_slice, margin)
    if length == 0:
        return KeyMaterial(
            bits=np.zeros(0, dtype=np.uint8), length=0,
            provenance={"reason": "leakage plus margin exceeded the block"},
        )
    stacked = np.concatenate([bits_per_slice[i] for i in included])
    key = toeplitz_hash(stacked, length, stream)
    return KeyMaterial(
        bits=key,
        length=length,
        provenance={
            "slices": included,
            "hash_seed": [stream.seed, stream.stream_id],
        },
    )


# ---------------------------------------------------------------------------
# Transcript records.
# ---------------------------------------------------------------------------

# ---------------------------------------------------------------------------
# End-to-end pipeline.
# ---------------------------------------------------------------------------

#: Smallest syndrome a slice code may carry.  The entropy sizing of nearly
#: error-free slices yields a handful of parity bits, far too few for the
#: decoder to localize even a single flip; the floor keeps single-error
#: correction reliable and is charged to the leakage ledger like any other
#: syndrome bit.
MIN_SYNDROME_ROWS = 96


@dataclass
class DistillationReport:
    frames_total: int
    frames_accepted: int
    ledger: LeakageLedger
    alice_key: np.ndarray
    bob_key: np.ndarray
    key_bits: int
    key_rate_per_sample: float
    block_length: int
    transcript: bytes
    frame_status: list
    code_rows: dict
    e_b: dict
    e_p: dict
    included_slices: list

    @property
    def frame_error_rate(self):
        return 1.0 - self.frames_accepted / self.frames_total


def size_codes(spec, channel, l, beta, stream, e_b=None, min_rows=MIN_SYNDROME_ROWS):
    """Build one code per slice, sized from the slice bit error rates."""
    from .slicing import classical_bit_error_rate

    if e_b is None:
        e_b = {
            i: classical_bit_error_rate(i, spec, channel)
            for i in range(1, spec.m + 1)
        }
    codes = {}
    for i in range(1, spec.m + 1):
        rate = size_code_rate(e_b[i], beta)
        rate = min(rate, 1.0 - min_rows / l)
        codes[i] = build_code(rate, l, stream.child(i))
    return codes, e_b


def _process_frame(args):
    (frame_id, spec, channel, codes, l, stream, zero_noise) = args
    from .channel import ModulationSpec, sample_pair

    frame_stream = stream.child(frame_id)
    mod = ModulationSpec(variance=spec.variance)
    if zero_noise:
        rng = frame_stream.child(0).generator()
        x = rng.standard_normal(l) * math.sqrt(spec.variance)
        x_prime = math.sqrt(channel.transmittance) * x
    else:
        x, x_prime = sample_pair(mod, channel, frame_stream.child(0), l)
    frame = make_frame(
        frame_id, x, x_prime, [codes[i] for i in range(1, spec.m + 1)],
        spec, frame_stream.child(1),
    )
    decoded, ledger = reconcile(
        frame, [codes[i] for i in range(1, spec.m + 1)], channel, spec
    )
    matches = bool(np.array_equal(decoded, frame.alice_bits))
    return frame, ledger, matches


def run_distillation(
    spec,
    channel,
    l,
    frames,
    beta,
    margin,
    stream,
    e_p=None,
    e_b=None,
    zero_noise=False,
    min_rows=MIN_SYNDROME_ROWS,
    map_fn=map,
):
    """Simulate the full distillation pipeline over ``frames`` blocks.

    Returns a :class:`DistillationReport` whose Alice and Bob keys are the
    concatenated per-frame hashes over accepted frames; they are verified
    bit-identical before being reported.  ``e_p`` (per-slice phase error
    rates for the privacy-amplification charge) defaults to the joint-state
    analysis of the channel; slices with a non-positive net rate are
    excluded from hashing entirely.
    """
    from . import epanalysis

    codes, e_b = size_codes(
        spec, channel, l, beta, stream.child(0x0DE5), e_b=e_b, min_rows=min_rows
    )
    if e_p is None:
        state = epanalysis.reduced_joint_state(spec, channel)
        e_p = {
            i + 1: s.e_p for i, s in enumerate(epanalysis.analyze_state(state))
        }
    included = [
        i
        for i in range(1, spec.m + 1)
        if 1.0 - binary_entropy(e_b[i]) - binary_entropy(e_p[i]) > 0.0
    ]

    tasks = [
        (fid, spec, channel, codes, l, stream.child(0xF0A), zero_noise)
        for fid in range(frames)
    ]
    results = list(map_fn(_process_frame, tasks))

    alice_parts = []
    bob_parts = []
    transcript = []
    status = []
    accepted = 0
    ledger_totals = LeakageLedger(
        syndrome_bits_per_slice={i: 0 for i in range(1, spec.m + 1)},
        verification_bits=0,
    )
    for frame, ledger, matches in results:
        transcript.append(frame_transcript(frame))
        for i, rows in ledger.syndrome_bits_per_slice.items():
            ledger_totals.syndrome_bits_per_slice[i] += rows
        ledger_totals.verification_bits += ledger.verification_bits
        status.append(
            {
                "frame_id": frame.frame_id,
                "accepted": frame.accepted,
                "converged": list(frame.slice_converged),
                "verified": list(frame.slice_verified),
                "bits_match": matches,
            }
        )
        if not frame.accepted:
            continue
        accepted += 1
        hash_stream = stream.child(0xA5E).child(frame.frame_id)
        per_slice_ledger = LeakageLedger(
            syndrome_bits_per_slice={i: codes[i].rows for i in included}
        )
        alice_key = privacy_amplify(
            {i: frame.alice_bits[i - 1] for i in included},
            per_slice_ledger, e_p, margin, hash_stream, block_length=l,
        )
        bob_key = privacy_amplify(
            {i: frame.decoded_bits[i - 1] for i in included},
            per_slice_ledger, e_p, margin, hash_stream, block_length=l,
        )
        if not np.array_equal(alice_key.bits, bob_key.bits):
            raise AssertionError(
                f"accepted frame {frame.frame_id} produced diverging keys"
            )
        alice_parts.append(alice_key.bits)
        bob_parts.append(bob_key.bits)

    alice_bits = (
        np.concatenate(alice_parts) if alice_parts else np.zeros(0, dtype=np.uint8)
    )
    bob_bits = (
        np.concatenate(bob_parts) if bob_parts else np.zeros(0, dtype=np.uint8)
    )
    return DistillationReport(
        frames_total=frames,
        frames_accepted=accepted,
        ledger=ledger_totals,
        alice_key=alice_bits,
        bob_key=bob_bits,
        key_bits=int(alice_bits.size),
        key_rate_per_sample=alice_bits.size / (frames * l),
        block_length=l,
        transcript=b"".join(transcript),
        frame_status=status,
        code_rows={i: codes[i].rows for i in range(1, spec.m + 1)},
        e_b=e_b,
        e_p=e_p,
        included_slices=included,
    )


KIND_SBAR = 0
KIND_SYNDROME = 1
KIND_VERIFY = 2
DIR_A_TO_B = 0
DIR_B_TO_A = 1


def _record(frame_id, direction, kind, payload):
    body = struct.pack("<IBB", frame_id, direction, kind) + payload
    return struct.pack("<I", len(body)) + body


def _bits_payload(slice_index, bits):
    packed = np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes()
    return struct.pack("<BI", slice_index, int(np.asarray(bits).size)) + packed


def frame_transcript(frame):
    """Serialized public-channel records for one frame, in protocol order."""
    out = [
        _record(
            frame.frame_id, DIR_A_TO_B, KIND_SBAR,
            np.asarray(frame.sbar, dtype="<f8").tobytes(),
        )
    ]
    for i, syn in enumerate(frame.syndromes, start=1):
        out.append(
            _record(frame.frame_id, DIR_A_TO_B, KIND_SYNDROME, _bits_payload(i, syn))
        )
    for i, tag in enumerate(frame.verify_tags, start=1):
        out.append(
            _record(frame.frame_id, DIR_A_TO_B, KIND_VERIFY, _bits_payload(i, tag))
        )
    status = np.array([1 if frame.accepted else 0], dtype=np.uint8)
    out.append(
        _record(frame.frame_id, DIR_B_TO_A, KIND_VERIFY, _bits_payload(0, status))
    )
    return b"".join(out)


def read_transcript(data):
    """Iterate (frame_id, direction, kind, payload) records."""
    offset = 0
    while offset < len(data):
        (length,) = struct.unpack_from("<I", data, offset)
        offset += 4
        frame_id, direction, kind = struct.unpack_from("<IBB", data, offset)
        payload = data[offset + 6 : offset + length]
        if len(payload) != length - 6:
            raise DomainError("truncated transcript record")
        offset += length
        yield frame_id, direction, kind, payload


def replay_ledger(data):
    """Recompute disclosure totals from a serialized transcript."""
    syndrome_bits = {}
    verification_bits = 0
    sbar_values = 0
    frames = set()
    for frame_id, direction, kind, payload in read_transcript(data):
        frames.add(frame_id)
        if kind == KIND_SBAR:
            sbar_values += len(payload) // 8
        elif kind == KIND_SYNDROME:
            slice_index, nbits = struct.unpack_from("<BI", payload, 0)
            syndrome_bits[slice_index] = syndrome_bits.get(slice_index, 0) + nbits
        elif kind == KIND_VERIFY and direction == DIR_A_TO_B:
            _, nbits = struct.unpack_from("<BI", payload, 0)
            verification_bits += nbits
    return {
        "frames": len(frames),
        "syndrome_bits_per_slice": syndrome_bits,
        "syndrome_bits_total": sum(syndrome_bits.values()),
        "verification_bits": verification_bits,
        "sbar_values": sbar_values,
    }
