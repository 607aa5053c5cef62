"""(3,6)-regular rate-1/2 LDPC code: construction, encoding, sum-product decoding.

Construction is a progressive-edge-growth-flavored greedy: variables are
connected one at a time to the three least-loaded checks whose pairwise
co-occurrence would not close a 4-cycle; when no 4-cycle-free choice exists
(tiny codes) the constraint is relaxed for that variable.  The parity matrix
is then column-permuted into a systematic arrangement (information bits
first) with full-rank parity; rank-deficient draws are retried with a fresh
seed a bounded number of times.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


class ConstructionError(RuntimeError):
    """Raised when no regular full-rank code is found within the retry budget."""


@dataclass
class LdpcCode:
    """A systematic (3,6)-regular code of length n.

    ``parity_matrix`` is dense uint8 with n/2 rows; codewords are laid out as
    ``[info | parity]``.  ``encoder`` holds the dense GF(2) map from info
    bits to parity bits.  ``check_neighbors`` lists the 6 variables on each
    check, the edge table driving the decoder.
    """

    parity_matrix: np.ndarray
    encoder: np.ndarray
    n: int
    check_neighbors: np.ndarray

    @property
    def k(self) -> int:
        return self.n // 2


_VAR_DEGREE = 3
_CHECK_DEGREE = 6
_MAX_BUILD_TRIES = 25


_TRIPLE_SEARCH_CAP = 64


def _fresh_triple(
    order: np.ndarray, used_pairs: set[tuple[int, int]]
) -> list[int] | None:
    """First check triple (best candidates first) whose three pairs are unused."""
    cands = [int(c) for c in order[:_TRIPLE_SEARCH_CAP]]
    for i1, c1 in enumerate(cands):
        for i2 in range(i1 + 1, len(cands)):
            c2 = cands[i2]
            if (min(c1, c2), max(c1, c2)) in used_pairs:
                continue
            for i3 in range(i2 + 1, len(cands)):
                c3 = cands[i3]
                if (min(c1, c3), max(c1, c3)) in used_pairs:
                    continue
                if (min(c2, c3), max(c2, c3)) in used_pairs:
                    continue
                return [c1, c2, c3]
    return None


def _greedy_regular_graph(
    n: int, rng: np.random.Generator
) -> tuple[np.ndarray, int] | None:
    """One attempt at a (3,6)-regular bipartite graph, 4-cycle-free where possible.

    Returns the parity rows plus the number of variables that had to reuse a
    check pair (each reuse closes a 4-cycle; 0 means girth >= 6).
    """
    m = n // 2
    degrees = np.zeros(m, dtype=np.int64)
    used_pairs: set[tuple[int, int]] = set()
    rows = np.zeros((m, n), dtype=np.uint8)
    relaxed = 0
    for var in range(n):
        eligible = np.nonzero(degrees < _CHECK_DEGREE)[0]
        if eligible.size < _VAR_DEGREE:
            return None
        order = eligible[np.lexsort((rng.random(eligible.size), degrees[eligible]))]
        chosen = _fresh_triple(order, used_pairs)
        if chosen is None:
            relaxed += 1
            chosen = []
            for check in order:
                if all(
                    (min(check, c), max(check, c)) not in used_pairs
                    for c in chosen
                ):
                    chosen.append(int(check))
                if len(chosen) == _VAR_DEGREE:
                    break
            extras = [int(c) for c in order if c not in chosen]
            chosen.extend(extras[: _VAR_DEGREE - len(chosen)])
        if len(chosen) < _VAR_DEGREE:
            return None
        for i, a in enumerate(chosen):
            for b in chosen[i + 1 :]:
                used_pairs.add((min(a, b), max(a, b)))
        rows[chosen, var] = 1
        degrees[chosen] += 1
    if not np.all(degrees == _CHECK_DEGREE):
        return None
    return rows, relaxed


def _gf2_rref(matrix: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form over GF(2) using bit-packed rows."""
    m, n = matrix.shape
    packed = np.packbits(matrix, axis=1)
    pivots: list[int] = []
    row = 0
    for col in range(n):
        if row == m:
            break
        byte, bit = divmod(col, 8)
        col_bits = (packed[:, byte] >> (7 - bit)) & 1
        hits = np.nonzero(col_bits[row:])[0]
        if hits.size == 0:
            continue
        pivot = row + int(hits[0])
        if pivot != row:
            packed[[row, pivot]] = packed[[pivot, row]]
            col_bits[[row, pivot]] = col_bits[[pivot, row]]
        mask = col_bits.astype(bool)
        mask[row] = False
        if np.any(mask):
            packed[mask] ^= packed[row]
        pivots.append(col)
        row += 1
    unpacked = np.unpackbits(packed, axis=1, count=n)
    return unpacked, pivots


def build_code(n: int, seed: int) -> LdpcCode:
    """Construct a systematic (3,6)-regular code deterministically from a seed."""
    if n < 24 or n % 2:
        raise ValueError("code length must be even and >= 24")
    fallback: tuple | None = None
    for attempt in range(_MAX_BUILD_TRIES):
        rng = np.random.default_rng(np.random.SeedSequence([seed, attempt]))
        built = _greedy_regular_graph(n, rng)
        if built is None:
            continue
        h, relaxed = built
        rref, pivots = _gf2_rref(h)
        if len(pivots) < n // 2:
            continue
        if relaxed:
            # Full rank but with 4-cycles: keep as a last resort and look
            # for a cleaner draw first.
            if fallback is None:
                fallback = (h, rref, pivots)
            continue
        return _finalize(h, rref, pivots)
    if fallback is not None:
        return _finalize(*fallback)
    raise ConstructionError(f"no full-rank regular code found for n={n}")


def _finalize(h: np.ndarray, rref: np.ndarray, pivots: list[int]) -> LdpcCode:
    """Column-permute into [info | parity] layout and build the edge tables."""
    m, n = h.shape
    pivot_cols = np.array(pivots)
    info_cols = np.setdiff1d(np.arange(n), pivot_cols)
    perm = np.concatenate([info_cols, pivot_cols])
    h_sys = np.ascontiguousarray(h[:, perm])
    encoder = np.ascontiguousarray(rref[:, info_cols])
    check_neighbors = np.array(
        [np.nonzero(row)[0] for row in h_sys], dtype=np.int64
    )
    return LdpcCode(
        parity_matrix=h_sys,
        encoder=encoder,
        n=n,
        check_neighbors=check_neighbors,
    )


def encode(code: LdpcCode, info_bits: np.ndarray) -> np.ndarray:
    """Systematic encode: codeword = [info | parity], H c = 0 over GF(2)."""
    info_bits = np.asarray(info_bits, dtype=np.uint8)
    if info_bits.shape != (code.k,):
        raise ValueError(f"expected {code.k} info bits")
    parity = (code.encoder @ info_bits.astype(np.int64)) & 1
    return np.concatenate([info_bits, parity.astype(np.uint8)])


_TANH_CLIP = 1.0 - 1e-12


def decode(
    code: LdpcCode, channel_llrs: np.ndarray, max_iters: int = 100
) -> tuple[np.ndarray, np.ndarray, bool]:
    """Flooding sum-product decoding.

    Returns (posterior LLRs, hard info bits, converged flag); convergence
    means the hard decision satisfied every parity check at some iteration.
    Symbols whose posterior LLR is exactly zero are treated as undecided, so
    an all-zero input never claims convergence.
    """
    llrs = np.asarray(channel_llrs, dtype=float)
    if llrs.shape != (code.n,):
        raise ValueError(f"expected {code.n} channel LLRs")
    if not np.all(np.isfinite(llrs)):
        raise ValueError("channel LLRs must be finite")
    neighbors = code.check_neighbors
    check_to_var = np.zeros(neighbors.shape)
    posterior = llrs.copy()
    converged = False
    for _ in range(max_iters):
        var_to_check = posterior[neighbors] - check_to_var
        t = np.clip(np.tanh(0.5 * var_to_check), -_TANH_CLIP, _TANH_CLIP)
        left = np.cumprod(t, axis=1)
        right = np.cumprod(t[:, ::-1], axis=1)[:, ::-1]
        excl = np.ones_like(t)
        excl[:, 1:] *= left[:, :-1]
        excl[:, :-1] *= right[:, 1:]
        check_to_var = 2.0 * np.arctanh(np.clip(excl, -_TANH_CLIP, _TANH_CLIP))
        totals = np.bincount(
            neighbors.reshape(-1),
            weights=check_to_var.reshape(-1),
            minlength=code.n,
        )
        posterior = llrs + totals
        hard = posterior < 0
        decided = not np.any(posterior == 0.0)
        if decided and not np.any(np.sum(hard[neighbors], axis=1) & 1):
            converged = True
            break
    info_bits = (posterior[: code.k] < 0).astype(np.uint8)
    return posterior, info_bits, converged


def save_alist(code: LdpcCode, path: str | Path) -> None:
    """Write the parity matrix in the standard alist interchange format."""
    h = code.parity_matrix
    m, n = h.shape
    var_lists = [np.nonzero(h[:, j])[0] + 1 for j in range(n)]
    check_lists = [np.nonzero(h[i])[0] + 1 for i in range(m)]
    lines = [
        f"{n} {m}",
        f"{max(len(v) for v in var_lists)} {max(len(ck) for ck in check_lists)}",
        " ".join(str(len(v)) for v in var_lists),
        " ".join(str(len(ck)) for ck in check_lists),
    ]
    lines += [" ".join(map(str, v)) for v in var_lists]
    lines += [" ".join(map(str, ck)) for ck in check_lists]
    Path(path).write_text("\n".join(lines) + "\n")


def load_alist(path: str | Path) -> np.ndarray:
    """Read an alist file back into a dense 0/1 parity matrix."""
    tokens = Path(path).read_text().split("\n")
    n, m = map(int, tokens[0].split())
    h = np.zeros((m, n), dtype=np.uint8)
    for j in range(n):
        for i in tokens[4 + j].split():
            h[int(i) - 1, j] = 1
    return h
