"""Monte Carlo BER/FER sweep driver with paired-seed scheme comparison.

Every (channel, Eb/N0, frame) cell derives its noise and information-bit
streams from a seed sequence keyed on those indices alone, so all schemes
process literally the same received signal and the comparison is paired.
Cells can run on worker processes; results are folded in deterministic
(channel, Eb/N0, frame) order so the emitted CSV is identical regardless of
worker count, including when early stopping trims saturated points.
"""

from __future__ import annotations

import csv
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import ldpc, turbo
from .channel import (
    ChannelRealization,
    ebn0_to_noise_variance,
    random_channel,
)
from .constellation import Constellation

log = logging.getLogger(__name__)

_CHANNEL_TAG = 101
_INFO_TAG = 202
_NOISE_TAG = 303


@dataclass
class ExperimentSpec:
    """Everything needed to reproduce one sweep."""

    schemes: list[str]
    modulation: int = 64
    taps: int = 7
    n_channels: int = 10
    frames_per_channel: int = 100
    ebn0_grid_db: list[float] = field(default_factory=lambda: [10.0, 12.0])
    seed: int = 1234
    code_length: int = 4096
    code_rate: float = 0.5
    min_bit_errors: int | None = 200
    outer_iters: int | None = None
    decoder_iters: int = 100
    workers: int = 1
    diagnostics_path: str | None = None

    def __post_init__(self) -> None:
        if not self.schemes:
            raise ValueError("at least one scheme required")
        if not self.ebn0_grid_db:
            raise ValueError("Eb/N0 grid must be nonempty")
        for count in (self.n_channels, self.frames_per_channel, self.taps):
            if count < 1:
                raise ValueError("counts must be >= 1")


@dataclass
class BerRecord:
    """Aggregated error counts for one (scheme, Eb/N0) point."""

    scheme: str
    ebn0_db: float
    bit_errors: int = 0
    bits_counted: int = 0
    frame_errors: int = 0
    frames_counted: int = 0
    wall_time: float = 0.0

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits_counted if self.bits_counted else 0.0

    @property
    def fer(self) -> float:
        return self.frame_errors / self.frames_counted if self.frames_counted else 0.0


@lru_cache(maxsize=4)
def _cached_code(code_length: int, seed: int) -> ldpc.LdpcCode:
    return ldpc.build_code(code_length, seed)


def _channel_for(spec: ExperimentSpec, channel_idx: int) -> ChannelRealization:
    rng = np.random.default_rng(
        np.random.SeedSequence([spec.seed, _CHANNEL_TAG, channel_idx])
    )
    return random_channel(spec.taps, rng)


def _run_channel(args: tuple) -> list[tuple]:
    """Worker body: all cells of one channel. Returns per-cell count tuples."""
    spec, channel_idx, skip = args
    c = Constellation.qam(spec.modulation)
    code = _cached_code(spec.code_length, spec.seed)
    base = _channel_for(spec, channel_idx)
    configs = {
        name: turbo.scheme_defaults(name, spec.outer_iters) for name in spec.schemes
    }
    for cfg in configs.values():
        cfg.decoder_iters = spec.decoder_iters
        cfg.stop_on_convergence = True
    out: list[tuple] = []
    for e_idx, ebn0 in enumerate(spec.ebn0_grid_db):
        noise_var = ebn0_to_noise_variance(
            ebn0, c.mean_energy, c.bits_per_symbol, spec.code_rate, base.taps
        )
        ch = ChannelRealization(base.taps, noise_var)
        active = [s for s in spec.schemes if (s, e_idx) not in skip]
        if not active:
            continue
        for f_idx in range(spec.frames_per_channel):
            info_rng = np.random.default_rng(
                np.random.SeedSequence(
                    [spec.seed, _INFO_TAG, channel_idx, e_idx, f_idx]
                )
            )
            info_bits = info_rng.integers(0, 2, size=code.k).astype(np.uint8)
            for scheme in active:
                noise_rng = np.random.default_rng(
                    np.random.SeedSequence(
                        [spec.seed, _NOISE_TAG, channel_idx, e_idx, f_idx]
                    )
                )
                start = time.perf_counter()
                try:
                    result = turbo.run_frame(
                        configs[scheme], code, c, ch, info_bits, noise_rng
                    )
                except Exception as exc:  # pragma: no cover - defensive path
                    out.append(
                        (channel_idx, e_idx, f_idx, scheme, None, repr(exc), 0.0)
                    )
                    continue
                elapsed = time.perf_counter() - start
                out.append(
                    (
                        channel_idx,
                        e_idx,
                        f_idx,
                        scheme,
                        result.bit_errors,
                        result.to_json_record(
                            scheme=scheme,
                            seed=spec.seed,
                            channel=channel_idx,
                            ebn0_db=ebn0,
                            frame=f_idx,
                        ),
                        elapsed,
                    )
                )
    return out


def run_sweep(spec: ExperimentSpec) -> list[BerRecord]:
    """Run the full sweep and return one record per (scheme, Eb/N0) point.

    Early stopping (when ``spec.min_bit_errors`` is set) is evaluated at
    channel boundaries in channel order: once a point has accumulated enough
    bit errors, later channels no longer contribute to it.
    """
    records = {
        (s, e): BerRecord(scheme=s, ebn0_db=ebn0)
        for s in spec.schemes
        for e, ebn0 in enumerate(spec.ebn0_grid_db)
    }
    k = spec.code_length // 2
    skipped_frames = 0
    diag_sink = None
    if spec.diagnostics_path:
        diag_sink = open(spec.diagnostics_path, "w")
    try:
        saturated: set[tuple[str, int]] = set()
        pending = list(range(spec.n_channels))
        while pending:
            batch = pending[: max(1, spec.workers)]
            pending = pending[len(batch) :]
            jobs = [(spec, idx, frozenset(saturated)) for idx in batch]
            if spec.workers > 1 and len(batch) > 1:
                with ProcessPoolExecutor(max_workers=spec.workers) as pool:
                    chunks = list(pool.map(_run_channel, jobs))
            else:
                chunks = [_run_channel(job) for job in jobs]
            for chunk in chunks:
                for channel_idx, e_idx, f_idx, scheme, errors, info, elapsed in chunk:
                    if errors is None:
                        skipped_frames += 1
                        log.warning(
                            "frame skipped (channel=%d ebn0_idx=%d frame=%d "
                            "scheme=%s): %s",
                            channel_idx,
                            e_idx,
                            f_idx,
                            scheme,
                            info,
                        )
                        continue
                    if (scheme, e_idx) in saturated:
                        continue
                    rec = records[(scheme, e_idx)]
                    rec.bit_errors += errors
                    rec.bits_counted += k
                    rec.frame_errors += int(errors > 0)
                    rec.frames_counted += 1
                    rec.wall_time += elapsed
                    if diag_sink is not None:
                        diag_sink.write(info + "\n")
                # Early-stop decisions happen only between channels.
                if spec.min_bit_errors is not None:
                    for key, rec in records.items():
                        if rec.bit_errors >= spec.min_bit_errors:
                            saturated.add(key)
            if len(saturated) == len(records):
                break
    finally:
        if diag_sink is not None:
            diag_sink.close()
    if skipped_frames:
        log.warning("%d frame(s) skipped due to errors", skipped_frames)
    ordered = [
        records[(s, e)]
        for s in spec.schemes
        for e in range(len(spec.ebn0_grid_db))
    ]
    return ordered


def emit_csv(records: list[BerRecord], path: str | Path) -> None:
    """Write records as plot-ready CSV with exact-round-trip floats."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scheme", "ebn0_db", "ber", "fer", "bits", "frames"])
        for rec in records:
            writer.writerow(
                [
                    rec.scheme,
                    repr(float(rec.ebn0_db)),
                    repr(rec.ber),
                    repr(rec.fer),
                    rec.bits_counted,
                    rec.frames_counted,
                ]
            )


def read_csv(path: str | Path) -> list[dict]:
    """Parse an :func:`emit_csv` file back into dict rows."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        row["ebn0_db"] = float(row["ebn0_db"])
        row["ber"] = float(row["ber"])
        row["fer"] = float(row["fer"])
        row["bits"] = int(row["bits"])
        row["frames"] = int(row["frames"])
    return rows
