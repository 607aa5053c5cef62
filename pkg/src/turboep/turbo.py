"""Turbo loop: iterative exchange between an EP equalizer and the LDPC decoder.

Each outer iteration initializes per-symbol Gaussian site factors (either a
bare projection of the decoder's symbol priors, or the outer-EP refinement
that divides by the previous iteration's extrinsic), equalizes, demaps the
extrinsics to bit LLRs, clips them, decodes, and feeds the decoder's
extrinsic LLRs (posterior minus the clipped equalizer input) back as the
next symbol prior.  Extrinsic exchange in both directions keeps each side's
own contribution out of the information it receives; feeding the full
posterior back instead reinforces the equalizer's previous errors through
the outer-EP division and stalls exactly the frames the refinement is meant
to rescue.  Clipping applies only on the equalizer-to-decoder path.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import ldpc
from .channel import ChannelRealization, transmit
from .constellation import Constellation
from .ep_core import (
    EpDiagnostics,
    EpParams,
    Gaussian,
    outer_ep_init,
    project_prior,
)
from .equalizers import WindowSpec, equalize

SCHEMES = ("lmmse", "bep", "d-bep", "fep", "d-fep", "ksep", "d-ksep", "bp-ep")

#: Effectively-certain LLR magnitude used for receiver-known pad bits.
PAD_BIT_LLR = 40.0


def default_beta_schedule(t: int) -> float:
    """Damping weight for outer iteration t: min(e^{t/1.5}/10, 0.7)."""
    return min(math.exp(t / 1.5) / 10.0, 0.7)


@dataclass
class TurboConfig:
    """Full receiver configuration for one scheme."""

    scheme: str
    ep: EpParams
    outer_iters: int = 5
    llr_clip: float = 5.0
    backend: str = "block"
    init: str = "projection"
    window: WindowSpec | None = None
    beta_schedule: Callable[[int], float] = default_beta_schedule
    decoder_iters: int = 100
    stop_on_convergence: bool = False

    def __post_init__(self) -> None:
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.outer_iters < 0:
            raise ValueError("outer_iters must be >= 0")
        if self.llr_clip <= 0:
            raise ValueError("llr_clip must be positive")
        if self.init not in ("projection", "outer-ep"):
            raise ValueError("init must be 'projection' or 'outer-ep'")


def scheme_defaults(scheme: str, outer_iters: int | None = None) -> TurboConfig:
    """Default configuration for each named scheme.

    ``lmmse`` runs no site refinement at all; the single-pass EP schemes use
    S=3 inner sweeps with projection initialization; the double-EP (``d-``)
    variants cut the inner sweeps to S=1 and recycle the previous turbo
    iteration's extrinsic in the initialization; ``bp-ep`` refines only
    across turbo iterations (S=0) with absolute-value variance control.
    """
    scheme = scheme.lower()
    table = {
        "lmmse": dict(s=0, init="projection", control="keep", backend="block", t=5),
        "bep": dict(s=3, init="projection", control="keep", backend="block", t=5),
        "fep": dict(s=3, init="projection", control="keep", backend="windowed", t=5),
        "ksep": dict(s=3, init="projection", control="keep", backend="kalman", t=5),
        "d-bep": dict(s=1, init="outer-ep", control="keep", backend="block", t=5),
        "d-fep": dict(s=1, init="outer-ep", control="keep", backend="windowed", t=5),
        "d-ksep": dict(s=1, init="outer-ep", control="keep", backend="kalman", t=5),
        "bp-ep": dict(s=0, init="outer-ep", control="abs", backend="block", t=8),
    }
    if scheme not in table:
        raise ValueError(f"unknown scheme {scheme!r}")
    row = table[scheme]
    return TurboConfig(
        scheme=scheme,
        ep=EpParams(inner_iters=row["s"], variance_control=row["control"]),
        outer_iters=row["t"] if outer_iters is None else outer_iters,
        backend=row["backend"],
        init=row["init"],
    )


@dataclass
class IterationStats:
    """Per-outer-iteration record for one frame."""

    info_bit_errors: int
    decoder_converged: bool


@dataclass
class FrameResult:
    """Outcome of one decoded frame."""

    info_bits: np.ndarray
    iterations: list[IterationStats]
    extrinsic_passes: int
    control_triggers: int
    decoder_llrs: list[np.ndarray] = field(default_factory=list)

    @property
    def bit_errors(self) -> int:
        return self.iterations[-1].info_bit_errors

    @property
    def converged(self) -> bool:
        return self.iterations[-1].decoder_converged

    def to_json_record(self, **extra) -> str:
        record = dict(extra)
        record["bit_errors"] = [it.info_bit_errors for it in self.iterations]
        record["decoder_converged"] = [
            bool(it.decoder_converged) for it in self.iterations
        ]
        record["extrinsic_passes"] = self.extrinsic_passes
        record["control_triggers"] = self.control_triggers
        return json.dumps(record, sort_keys=True)


def _symbol_priors(
    bit_llrs: np.ndarray, n_pad: int, c: Constellation
) -> np.ndarray:
    """Reshape codeword-bit LLRs (plus known-zero pad bits) into symbol pmfs."""
    if n_pad:
        bit_llrs = np.concatenate([bit_llrs, np.full(n_pad, PAD_BIT_LLR)])
    return c.prior_pmf_from_llrs(bit_llrs.reshape(-1, c.bits_per_symbol))


def run_frame(
    config: TurboConfig,
    code: ldpc.LdpcCode,
    c: Constellation,
    ch: ChannelRealization,
    info_bits: np.ndarray,
    rng: np.random.Generator,
    keep_llrs: bool = False,
) -> FrameResult:
    """Encode, transmit, and turbo-decode one frame.

    The rng is consumed only by the channel noise, so two schemes driven with
    identically seeded generators see the same received signal.  When the
    codeword length is not a multiple of the symbol label width, the frame is
    right-padded with receiver-known zero bits to fill the last symbol; pad
    positions carry a pinned near-certain LLR in the symbol priors and are
    stripped before decoding.

    Set ``keep_llrs`` to retain each iteration's clipped decoder-input LLRs.
    """
    q = c.bits_per_symbol
    n_pad = (-code.n) % q
    codeword = ldpc.encode(code, info_bits)
    tx_bits = codeword
    if n_pad:
        tx_bits = np.concatenate([codeword, np.zeros(n_pad, dtype=np.uint8)])
    symbols = c.modulate(tx_bits)
    y = transmit(symbols, ch, rng)

    diag = EpDiagnostics()
    prior = _symbol_priors(np.zeros(code.n), n_pad, c)
    extrinsic_prev: Gaussian | None = None
    iterations: list[IterationStats] = []
    kept: list[np.ndarray] = []
    decoded_info = np.zeros(code.k, dtype=np.uint8)
    for t in range(config.outer_iters + 1):
        params = EpParams(
            epsilon=config.ep.epsilon,
            beta=config.beta_schedule(t),
            inner_iters=config.ep.inner_iters,
            variance_control=config.ep.variance_control,
        )
        if config.init == "outer-ep":
            factors = outer_ep_init(prior, extrinsic_prev, c, params)
        else:
            factors = project_prior(prior, c, params.epsilon)
        marginals = equalize(
            y,
            ch,
            factors,
            prior,
            c,
            params,
            backend=config.backend,
            window=config.window,
            diag=diag,
        )
        llrs = c.extrinsic_llrs_from_gaussian(
            marginals.extrinsics.mean, marginals.extrinsics.variance
        ).reshape(-1)[: code.n]
        llrs = np.clip(llrs, -config.llr_clip, config.llr_clip)
        if keep_llrs:
            kept.append(llrs.copy())
        posterior_llrs, decoded_info, converged = ldpc.decode(
            code, llrs, config.decoder_iters
        )
        iterations.append(
            IterationStats(
                info_bit_errors=int(np.sum(decoded_info != info_bits)),
                decoder_converged=converged,
            )
        )
        if config.stop_on_convergence and converged:
            break
        prior = _symbol_priors(posterior_llrs - llrs, n_pad, c)
        extrinsic_prev = marginals.extrinsics
    return FrameResult(
        info_bits=decoded_info,
        iterations=iterations,
        extrinsic_passes=diag.extrinsic_passes,
        control_triggers=diag.control_triggers,
        decoder_llrs=kept,
    )
