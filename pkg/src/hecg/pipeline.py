"""End-to-end loop: segment source -> encrypt -> store -> decrypt -> classify.

The serial-port acquisition of the original system is replaced by two
sources (synthetic quasi-ECG and CSV replay) and the cloud by a local
directory store that keeps ciphertext records and key material in
separate files. A single producer thread feeds a bounded queue; the
consumer encrypts, persists, retrieves, decrypts and hands the segment
to a pluggable classifier hook.
"""

import csv
import queue
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .chaos import ChaoticParams, KeySalt, apply_salt
from .cipher import (
    EncryptedRecord,
    Mode,
    SignalSegment,
    decrypt,
    encrypt,
    params_for_segment,
)
from .errors import IngestionError, StoreError
from .mlkey import KeyPredictor, encrypt_ml, predict_params

DEFAULT_SAMPLE_RATE = 500.0
DEFAULT_SEGMENT_LEN = 300


class SourceKind(Enum):
    FILE_REPLAY = "file-replay"
    SYNTHETIC = "synthetic"


class Pacing(Enum):
    REAL_TIME = "real-time"
    UNPACED = "unpaced"


# ---------------------------------------------------------------------------
# sources


def synthetic_ecg_wave(
    duration_s: float,
    sample_rate: float = DEFAULT_SAMPLE_RATE,
    heart_rate_bpm: float = 60.0,
    noise_amplitude: float = 0.02,
    seed: int = 0,
) -> np.ndarray:
    """Deterministic quasi-ECG: Gaussian bumps per beat plus seeded noise.

    Five bumps approximate the P-QRS-T morphology; beat-to-beat timing
    jitters slightly (seeded) so consecutive segments differ, which keeps
    per-segment keys fresh. Amplitudes sit roughly in [-0.5, 1.5].
    """
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * sample_rate))
    t = np.arange(n) / sample_rate
    wave = np.zeros(n)
    period = 60.0 / heart_rate_bpm
    # (offset within beat as fraction of period, amplitude, width seconds)
    bumps = [
        (-0.20, 0.12, 0.025),  # P
        (-0.03, -0.12, 0.010),  # Q
        (0.00, 1.10, 0.012),  # R
        (0.035, -0.22, 0.012),  # S
        (0.22, 0.28, 0.045),  # T
    ]
    beat_t = 0.5 * period
    while beat_t < duration_s + period:
        for frac, amp, width in bumps:
            c = beat_t + frac * period
            lo = max(0, int((c - 5 * width) * sample_rate))
            hi = min(n, int((c + 5 * width) * sample_rate) + 1)
            if lo < hi:
                wave[lo:hi] += amp * np.exp(-0.5 * ((t[lo:hi] - c) / width) ** 2)
        beat_t += period * (1.0 + 0.04 * rng.standard_normal())
    if noise_amplitude > 0:
        wave += rng.normal(0.0, noise_amplitude, n)
    return wave


def synthetic_ecg(
    duration_s: float,
    sample_rate: float = DEFAULT_SAMPLE_RATE,
    heart_rate_bpm: float = 60.0,
    noise_amplitude: float = 0.02,
    seed: int = 0,
    segment_len: int = DEFAULT_SEGMENT_LEN,
):
    """Yield consecutive non-overlapping segments of a synthetic recording."""
    wave = synthetic_ecg_wave(duration_s, sample_rate, heart_rate_bpm, noise_amplitude, seed)
    for start in range(0, len(wave) - segment_len + 1, segment_len):
        yield SignalSegment(wave[start : start + segment_len], sample_rate)


def ingest_csv(
    path,
    column=0,
    sample_rate: float = DEFAULT_SAMPLE_RATE,
    segment_len: int = DEFAULT_SEGMENT_LEN,
):
    """Yield consecutive segments from one numeric CSV column.

    column may be an index (no header assumed; a non-numeric first row is
    tolerated as a header) or a name (header required). The trailing
    partial segment is dropped; a malformed row raises IngestionError
    naming its line number.
    """
    buf = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        col_idx = None
        for line_no, row in enumerate(reader, start=1):
            if not row:
                continue
            if col_idx is None:
                if isinstance(column, str):
                    if column not in row:
                        raise IngestionError(f"no column named {column!r} in header", line_no)
                    col_idx = row.index(column)
                    continue
                col_idx = int(column)
                try:
                    float(row[col_idx])
                except (ValueError, IndexError):
                    continue  # header row
            if col_idx >= len(row):
                raise IngestionError(f"row has {len(row)} fields, need {col_idx + 1}", line_no)
            try:
                buf.append(float(row[col_idx]))
            except ValueError:
                raise IngestionError(f"non-numeric value {row[col_idx]!r}", line_no) from None
            if len(buf) == segment_len:
                yield SignalSegment(np.asarray(buf), sample_rate)
                buf = []


@dataclass
class SegmentSource:
    """Segment stream plus the pacing contract the pipeline honours."""

    kind: SourceKind
    sample_rate: float = DEFAULT_SAMPLE_RATE
    segment_len: int = DEFAULT_SEGMENT_LEN
    pacing: Pacing = Pacing.UNPACED
    _factory: object = None

    @property
    def segment_duration_s(self) -> float:
        return self.segment_len / self.sample_rate

    def __iter__(self):
        return iter(self._factory())

    @classmethod
    def synthetic(
        cls,
        duration_s: float,
        sample_rate: float = DEFAULT_SAMPLE_RATE,
        segment_len: int = DEFAULT_SEGMENT_LEN,
        heart_rate_bpm: float = 60.0,
        noise_amplitude: float = 0.02,
        seed: int = 0,
        pacing: Pacing = Pacing.UNPACED,
    ) -> "SegmentSource":
        return cls(
            kind=SourceKind.SYNTHETIC,
            sample_rate=sample_rate,
            segment_len=segment_len,
            pacing=pacing,
            _factory=lambda: synthetic_ecg(
                duration_s, sample_rate, heart_rate_bpm, noise_amplitude, seed, segment_len
            ),
        )

    @classmethod
    def from_csv(
        cls,
        path,
        column=0,
        sample_rate: float = DEFAULT_SAMPLE_RATE,
        segment_len: int = DEFAULT_SEGMENT_LEN,
        pacing: Pacing = Pacing.UNPACED,
    ) -> "SegmentSource":
        return cls(
            kind=SourceKind.FILE_REPLAY,
            sample_rate=sample_rate,
            segment_len=segment_len,
            pacing=pacing,
            _factory=lambda: ingest_csv(path, column, sample_rate, segment_len),
        )


# ---------------------------------------------------------------------------
# store


class FileStore:
    """Directory-per-stream record store with a separate key-store file.

    Records land in <root>/<stream>/seg_NNNNNN.rec; key material lives in
    <root>/<stream>/keys.txt as lines "key_id_hex32 r x0" with both reals
    at 17 significant digits (lossless binary64 round-trip). Ciphertext
    and keys are never co-located in one file.
    """

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _stream_dir(self, stream_id: str) -> Path:
        d = self.root / stream_id
        d.mkdir(parents=True, exist_ok=True)
        return d

    def _keys_path(self, stream_id: str) -> Path:
        return self._stream_dir(stream_id) / "keys.txt"

    def put_record(self, stream_id: str, index: int, record: EncryptedRecord):
        path = self._stream_dir(stream_id) / f"seg_{index:06d}.rec"
        path.write_bytes(record.to_bytes())

    def get_record(self, stream_id: str, index: int) -> EncryptedRecord:
        path = self.root / stream_id / f"seg_{index:06d}.rec"
        if not path.exists():
            raise StoreError(f"no record for {stream_id}[{index}]")
        return EncryptedRecord.from_bytes(path.read_bytes())

    def record_indices(self, stream_id: str) -> list:
        d = self.root / stream_id
        if not d.exists():
            return []
        return sorted(int(p.stem.split("_")[1]) for p in d.glob("seg_*.rec"))

    def put_key(self, stream_id: str, key_id: bytes, params: ChaoticParams):
        line = f"{key_id.hex()} {params.r:.17g} {params.x0:.17g}\n"
        with open(self._keys_path(stream_id), "a") as fh:
            fh.write(line)

    def get_key(self, stream_id: str, key_id: bytes) -> ChaoticParams:
        path = self._keys_path(stream_id)
        if not path.exists():
            raise StoreError(f"key store missing for stream {stream_id}")
        want = key_id.hex()
        with open(path) as fh:
            for line in fh:
                parts = line.split()
                if len(parts) == 3 and parts[0] == want:
                    return ChaoticParams(r=float(parts[1]), x0=float(parts[2]))
        raise StoreError(f"no key {want} in stream {stream_id}")

    def delete_keys(self, stream_id: str):
        path = self._keys_path(stream_id)
        if path.exists():
            path.unlink()

    def streams(self) -> list:
        return sorted(p.name for p in self.root.iterdir() if p.is_dir())


# ---------------------------------------------------------------------------
# classifier hook


def count_peaks(segment: SignalSegment, threshold_frac: float = 0.6) -> int:
    """R-wave style peak count: local maxima above a range threshold,
    separated by a 250 ms refractory gap."""
    s = segment.samples
    lo, hi = float(np.min(s)), float(np.max(s))
    if hi == lo:
        return 0
    thresh = lo + threshold_frac * (hi - lo)
    refractory = max(1, int(0.25 * segment.sample_rate))
    peaks = 0
    last = -refractory
    for i in range(1, len(s) - 1):
        if s[i] >= thresh and s[i] >= s[i - 1] and s[i] >= s[i + 1] and i - last >= refractory:
            peaks += 1
            last = i
    return peaks


def default_classifier(segment: SignalSegment) -> str:
    """Placeholder for the diagnosis model: fixed label plus peak count.

    Swap in a real model by passing any callable SignalSegment -> str to
    run_pipeline.
    """
    return f"unclassified/peaks={count_peaks(segment)}"


# ---------------------------------------------------------------------------
# metrics and the loop


@dataclass
class PipelineMetrics:
    """Per-segment latencies in seconds plus run-level counters."""

    mode_tag: Mode
    encrypt_s: list = field(default_factory=list)
    store_s: list = field(default_factory=list)
    decrypt_s: list = field(default_factory=list)
    total_s: list = field(default_factory=list)
    arrival_monotonic: list = field(default_factory=list)
    labels: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    distinct_biometric_params: int = 0
    distinct_stored_params: int = 0

    @property
    def segments_processed(self) -> int:
        return len(self.total_s)

    def summary(self) -> dict:
        def stats(values):
            if not values:
                return {"median": 0.0, "p99": 0.0, "mean": 0.0}
            arr = np.asarray(values)
            return {
                "median": float(np.median(arr)),
                "p99": float(np.percentile(arr, 99)),
                "mean": float(np.mean(arr)),
            }

        return {
            "mode": self.mode_tag.name,
            "segments": self.segments_processed,
            "errors": len(self.errors),
            "encrypt_s": stats(self.encrypt_s),
            "store_s": stats(self.store_s),
            "decrypt_s": stats(self.decrypt_s),
            "total_s": stats(self.total_s),
            "distinct_biometric_params": self.distinct_biometric_params,
            "distinct_stored_params": self.distinct_stored_params,
        }

    def table(self) -> str:
        s = self.summary()
        lines = [
            f"mode={s['mode']} segments={s['segments']} errors={s['errors']}",
            "stage      median_ms   p99_ms      mean_ms",
        ]
        for stage in ("encrypt_s", "store_s", "decrypt_s", "total_s"):
            st = s[stage]
            lines.append(
                f"{stage:<10s} {st['median'] * 1e3:<11.4f} {st['p99'] * 1e3:<11.4f} {st['mean'] * 1e3:.4f}"
            )
        lines.append(
            f"distinct params: biometric={s['distinct_biometric_params']} stored={s['distinct_stored_params']}"
        )
        return "\n".join(lines)


def run_pipeline(
    source: SegmentSource,
    mode: Mode,
    store: FileStore,
    segment_count: int | None = None,
    model: KeyPredictor | None = None,
    stream_id: str = "stream0",
    device_id: bytes = b"desk01",
    base_timestamp: int = 1_700_000_000_000,
    classifier=default_classifier,
    burn_in: int = 0,
    queue_size: int = 8,
) -> PipelineMetrics:
    """Process segments end to end until the source ends or the count is hit.

    Per segment: derive or predict params, salt them with a deterministic
    timestamp (base_timestamp + index, so runs are reproducible), encrypt,
    persist record and key separately, read both back, decrypt, classify.
    Encrypt latency excludes I/O; store latency is measured separately.
    Store failures are recorded per segment and the loop continues.
    """
    if mode is Mode.ML_PREDICTED and model is None:
        raise StoreError("ML mode requires a trained KeyPredictor")
    metrics = PipelineMetrics(mode_tag=mode)
    handoff: queue.Queue = queue.Queue(maxsize=queue_size)
    stop = object()

    def produce():
        cadence = source.segment_duration_s
        for i, seg in enumerate(source):
            if segment_count is not None and i >= segment_count:
                break
            if source.pacing is Pacing.REAL_TIME and i > 0:
                time.sleep(cadence)
            handoff.put((i, seg))
        handoff.put(stop)

    producer = threading.Thread(target=produce, daemon=True)
    producer.start()

    biometric_seen = set()
    stored_seen = set()
    while True:
        item = handoff.get()
        if item is stop:
            break
        index, segment = item
        metrics.arrival_monotonic.append(time.perf_counter())
        t_seg = time.perf_counter()
        try:
            t0 = time.perf_counter()
            if mode is Mode.ML_PREDICTED:
                params = predict_params(model, segment)
            else:
                params = params_for_segment(segment)
            salt = KeySalt(timestamp=base_timestamp + index, device_id=device_id)
            salted = apply_salt(params, salt)
            record, _ = encrypt(
                segment, salted, salt=salt, mode_tag=mode, counter=index, burn_in=burn_in
            )
            encrypt_elapsed = time.perf_counter() - t0
            biometric_seen.add((params.r, params.x0))
            stored_seen.add((salted.r, salted.x0))

            t0 = time.perf_counter()
            store.put_record(stream_id, index, record)
            store.put_key(stream_id, record.key_id, salted)
            store_elapsed = time.perf_counter() - t0

            fetched = store.get_record(stream_id, index)
            key = store.get_key(stream_id, fetched.key_id)
            t0 = time.perf_counter()
            decrypted = decrypt(fetched, key, source.sample_rate, burn_in)
            decrypt_elapsed = time.perf_counter() - t0

            if classifier is not None:
                metrics.labels.append(classifier(decrypted))
        except Exception as exc:  # noqa: BLE001 - per-segment fault isolation
            metrics.errors.append((index, f"{type(exc).__name__}: {exc}"))
            continue
        metrics.encrypt_s.append(encrypt_elapsed)
        metrics.store_s.append(store_elapsed)
        metrics.decrypt_s.append(decrypt_elapsed)
        metrics.total_s.append(time.perf_counter() - t_seg)

    producer.join()
    metrics.distinct_biometric_params = len(biometric_seen)
    metrics.distinct_stored_params = len(stored_seen)
    return metrics
