"""Segment quantization and the permutation + XOR cipher.

Encryption of one segment:

    1. mu, sigma over the raw samples -> (r, x0), optionally salted
    2. logistic sequence X of the segment length
    3. mask M[i] = floor(X[i] * 255), permutation P = argsort(X)
    4. bytes = quantize(samples to 0..255)
    5. ciphertext[i] = bytes[P[i]] XOR M[i]

Decryption regenerates X from the stored (r, x0); the permutation and
mask are never persisted or transmitted. The byte-domain roundtrip is
exact; the real-domain roundtrip is within half a quantization step.
"""

import struct
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .backend import kernels
from .chaos import ChaoticParams, KeySalt, SegmentStats, derive_params, iterate_logistic
from .errors import (
    CorruptRecordError,
    InvalidPermutationError,
    InvalidSignalError,
)

MAGIC = b"HECG"
RECORD_VERSION = 1


class Mode(IntEnum):
    DIRECT = 0
    ML_PREDICTED = 1


@dataclass(frozen=True, eq=False)
class SignalSegment:
    """Fixed window of real-valued samples at a known sample rate."""

    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", arr)
        if arr.ndim != 1 or arr.size < 2:
            raise InvalidSignalError(f"segment needs >= 2 samples, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InvalidSignalError("segment contains non-finite samples")
        if not (self.sample_rate > 0):
            raise InvalidSignalError(f"sample_rate must be positive, got {self.sample_rate}")

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class QuantizationRange:
    """Min/max of the raw segment, carried so decryption can rescale."""

    min: float
    max: float

    def __post_init__(self):
        if not (np.isfinite(self.min) and np.isfinite(self.max)):
            raise InvalidSignalError("quantization range must be finite")
        if self.max < self.min:
            raise InvalidSignalError(f"max {self.max} < min {self.min}")
        if not np.isfinite(self.max - self.min):
            raise InvalidSignalError("quantization range span overflows")

    @property
    def span(self) -> float:
        return self.max - self.min


@dataclass(frozen=True, eq=False)
class QuantizedSegment:
    bytes: np.ndarray
    range: QuantizationRange


@dataclass(frozen=True, eq=False)
class KeyMaterial:
    """Per-segment derived artifacts: permutation P, mask M, range.

    Immutable after construction; never serialized.
    """

    permutation: np.ndarray
    mask: np.ndarray
    range: QuantizationRange
    params: ChaoticParams


@dataclass(frozen=True)
class EncryptedRecord:
    """Ciphertext plus the public metadata needed to locate its key.

    Binary layout (little-endian, no padding, no checksum):

        magic 'HECG' (4) | version u8 (=1) | mode_tag u8 | segment_len u32
        | min f64 | max f64 | timestamp u64 | device_id_len u8
        | device_id bytes | key_id (16) | ciphertext (segment_len)
    """

    ciphertext: bytes
    range: QuantizationRange
    segment_len: int
    key_id: bytes
    salt: KeySalt
    mode_tag: Mode

    def __post_init__(self):
        if len(self.ciphertext) != self.segment_len:
            raise CorruptRecordError(
                f"ciphertext length {len(self.ciphertext)} != segment_len {self.segment_len}"
            )
        if len(self.key_id) != 16:
            raise CorruptRecordError(f"key_id must be 16 bytes, got {len(self.key_id)}")

    def to_bytes(self) -> bytes:
        head = struct.pack(
            "<4sBBIddQB",
            MAGIC,
            RECORD_VERSION,
            int(self.mode_tag),
            self.segment_len,
            self.range.min,
            self.range.max,
            self.salt.timestamp,
            len(self.salt.device_id),
        )
        return head + self.salt.device_id + self.key_id + self.ciphertext

    @classmethod
    def from_bytes(cls, blob: bytes) -> "EncryptedRecord":
        fixed = struct.calcsize("<4sBBIddQB")
        if len(blob) < fixed:
            raise CorruptRecordError(f"record truncated at {len(blob)} bytes")
        magic, version, mode, seg_len, lo, hi, ts, dev_len = struct.unpack_from("<4sBBIddQB", blob)
        if magic != MAGIC:
            raise CorruptRecordError(f"bad magic {magic!r}")
        if version != RECORD_VERSION:
            raise CorruptRecordError(f"unsupported record version {version}")
        try:
            mode_tag = Mode(mode)
        except ValueError:
            raise CorruptRecordError(f"unknown mode tag {mode}") from None
        need = fixed + dev_len + 16 + seg_len
        if len(blob) != need:
            raise CorruptRecordError(f"record is {len(blob)} bytes, layout needs {need}")
        pos = fixed
        device_id = blob[pos : pos + dev_len]
        pos += dev_len
        key_id = blob[pos : pos + 16]
        pos += 16
        ciphertext = blob[pos:]
        return cls(
            ciphertext=ciphertext,
            range=QuantizationRange(min=lo, max=hi),
            segment_len=seg_len,
            key_id=key_id,
            salt=KeySalt(timestamp=ts, device_id=device_id),
            mode_tag=mode_tag,
        )


def make_key_id(salt: KeySalt, counter: int) -> bytes:
    """16-byte store index built from the salt digest and segment counter.

    Carries no key entropy; it only names the key-store row.
    """
    return struct.pack("<QQ", salt.digest(), counter & 0xFFFFFFFFFFFFFFFF)


def compute_stats(segment: SignalSegment) -> SegmentStats:
    """Arithmetic mean and population standard deviation of the raw samples."""
    s = segment.samples
    return SegmentStats(mean=float(np.mean(s)), std_dev=float(np.std(s)))


def quantize(segment: SignalSegment) -> QuantizedSegment:
    """Map samples linearly onto 0..255, rounding half away from zero.

    A constant segment quantizes to all zeros with its value recorded in
    the range.
    """
    s = segment.samples
    lo = float(np.min(s))
    hi = float(np.max(s))
    rng = QuantizationRange(min=lo, max=hi)
    if hi == lo:
        return QuantizedSegment(bytes=np.zeros(len(s), dtype=np.uint8), range=rng)
    scaled = (s - lo) / (hi - lo) * 255.0
    # floor(v + 0.5) == round-half-away-from-zero for v >= 0, and is
    # deterministic across platforms.
    b = np.floor(scaled + 0.5).astype(np.uint8)
    return QuantizedSegment(bytes=b, range=rng)


def dequantize(q: QuantizedSegment, sample_rate: float) -> SignalSegment:
    """Inverse of quantize up to half a quantization step per sample."""
    lo, hi = q.range.min, q.range.max
    if hi == lo:
        samples = np.full(len(q.bytes), lo, dtype=np.float64)
    else:
        samples = lo + q.bytes.astype(np.float64) / 255.0 * (hi - lo)
    return SignalSegment(samples=samples, sample_rate=sample_rate)


def derive_key_material(
    params: ChaoticParams, n: int, rng: QuantizationRange, burn_in: int = 0
) -> KeyMaterial:
    """Generate per-segment mask and permutation from the chaotic sequence.

    mask[i] = floor(X[i] * 2^24) mod 256, the third byte of each
    iterate's binary fraction, applied per element. The leading digits of
    a logistic orbit follow its skewed invariant density, so flooring
    X*255 directly yields mask bytes with biased bits at every r in the
    regime; the deeper byte is uniform to well below monobit resolution
    while staying a pure, deterministic function of the iterate
    (x * 2^24 is an exact exponent shift in binary64).

    The permutation is the stable ascending argsort of X (ties broken by
    lower original index).
    """
    if n < 2:
        raise InvalidSignalError(f"segment length must be >= 2, got {n}")
    seq = iterate_logistic(params, n, burn_in)
    x = seq.values
    mask = (np.floor(x * 16777216.0).astype(np.int64) & 0xFF).astype(np.uint8)
    perm = np.argsort(x, kind="stable").astype(np.intp)
    return KeyMaterial(permutation=perm, mask=mask, range=rng, params=params)


def apply_keystream(quantized: np.ndarray, perm: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Permute then XOR one quantized segment. Exposed for direct testing."""
    q = np.ascontiguousarray(quantized, dtype=np.uint8)
    p = np.ascontiguousarray(perm, dtype=np.intp)
    m = np.ascontiguousarray(mask, dtype=np.uint8)
    if not (len(q) == len(p) == len(m)):
        raise CorruptRecordError(
            f"keystream length mismatch: data {len(q)}, perm {len(p)}, mask {len(m)}"
        )
    return np.asarray(kernels.keystream_apply(q, p, m))


def remove_keystream(ciphertext: np.ndarray, perm: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Invert apply_keystream exactly."""
    c = np.ascontiguousarray(ciphertext, dtype=np.uint8)
    p = np.ascontiguousarray(perm, dtype=np.intp)
    m = np.ascontiguousarray(mask, dtype=np.uint8)
    if not (len(c) == len(p) == len(m)):
        raise CorruptRecordError(
            f"keystream length mismatch: data {len(c)}, perm {len(p)}, mask {len(m)}"
        )
    return np.asarray(kernels.keystream_invert(c, p, m))


def invert_permutation(p: np.ndarray) -> np.ndarray:
    """Return q with q[p[i]] = i, validating that p is a bijection."""
    p = np.asarray(p)
    n = len(p)
    if n == 0 or not np.array_equal(np.sort(p), np.arange(n)):
        raise InvalidPermutationError("index list is not a bijection on 0..n-1")
    q = np.empty(n, dtype=np.intp)
    q[p] = np.arange(n, dtype=np.intp)
    return q


def encrypt(
    segment: SignalSegment,
    params: ChaoticParams,
    salt: KeySalt = KeySalt(0),
    mode_tag: Mode = Mode.DIRECT,
    counter: int = 0,
    burn_in: int = 0,
) -> tuple[EncryptedRecord, KeyMaterial]:
    """Encrypt one segment with already-final params (salting is the caller's).

    Returns the record plus the key material for in-process decryption
    and testing; the key material must never travel with the record.
    """
    q = quantize(segment)
    km = derive_key_material(params, len(segment), q.range, burn_in)
    ct = apply_keystream(q.bytes, km.permutation, km.mask)
    record = EncryptedRecord(
        ciphertext=ct.tobytes(),
        range=q.range,
        segment_len=len(segment),
        key_id=make_key_id(salt, counter),
        salt=salt,
        mode_tag=mode_tag,
    )
    return record, km


def decrypt(
    record: EncryptedRecord,
    params: ChaoticParams,
    sample_rate: float = 500.0,
    burn_in: int = 0,
) -> SignalSegment:
    """Regenerate the keystream from params and invert the cipher.

    params must be the exact (post-salt) values used at encryption; the
    record itself does not carry the sample rate, so the caller supplies
    it (default 500 Hz).
    """
    ct = np.frombuffer(record.ciphertext, dtype=np.uint8)
    if len(ct) != record.segment_len:
        raise CorruptRecordError(
            f"ciphertext length {len(ct)} != segment_len {record.segment_len}"
        )
    km = derive_key_material(params, record.segment_len, record.range, burn_in)
    q_bytes = remove_keystream(ct, km.permutation, km.mask)
    return dequantize(QuantizedSegment(bytes=q_bytes, range=record.range), sample_rate)


def decrypt_bytes(record: EncryptedRecord, params: ChaoticParams, burn_in: int = 0) -> np.ndarray:
    """Byte-domain decryption (dequantization skipped); exact inverse."""
    ct = np.frombuffer(record.ciphertext, dtype=np.uint8)
    if len(ct) != record.segment_len:
        raise CorruptRecordError(
            f"ciphertext length {len(ct)} != segment_len {record.segment_len}"
        )
    km = derive_key_material(params, record.segment_len, record.range, burn_in)
    return remove_keystream(ct, km.permutation, km.mask)


def params_for_segment(segment: SignalSegment) -> ChaoticParams:
    """Direct biometric derivation: stats -> chaotic regime, unsalted."""
    return derive_params(compute_stats(segment))
