"""Rate-3/4 LDPC code: deterministic progressive construction, systematic-style
encoder derived by GF(2) elimination, and a vectorized sum-product decoder.

The graph is built greedily one variable node at a time, always attaching to
the lowest-degree checks that do not close a 4-cycle (no two checks may share
two variables), so the girth is at least 6 and the check degrees stay exactly
regular.  Construction is fully determined by the seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .bits import BitBuffer

_LLR_CLIP = 30.0


@dataclass(frozen=True)
class LdpcCode:
    n: int
    k: int
    check_to_var: np.ndarray   # (m, row_weight) int32
    vm_order: np.ndarray       # check-major edge ids in variable-major order
    info_pos: np.ndarray       # (k,) columns carrying information bits
    parity_pos: np.ndarray     # (rank,) pivot columns solved from info bits
    gen: np.ndarray            # (rank, k) uint8 parity generator
    seed: int

    @property
    def rate(self) -> float:
        return self.k / self.n

    @property
    def m(self) -> int:
        return int(self.check_to_var.shape[0])

    @property
    def row_weight(self) -> int:
        return int(self.check_to_var.shape[1])

    def parity_matrix(self) -> np.ndarray:
        h = np.zeros((self.m, self.n), dtype=np.uint8)
        rows = np.repeat(np.arange(self.m), self.row_weight)
        h[rows, self.check_to_var.ravel()] = 1
        return h


def _construct_graph(n: int, m: int, col_weight: int, row_cap: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    deg = np.zeros(m, dtype=np.int64)
    pair_used: set[tuple[int, int]] = set()
    var_checks = np.empty((n, col_weight), dtype=np.int32)
    for v in range(n):
        chosen: list[int] = []
        for _ in range(col_weight):
            picked = -1
            for d in range(int(deg.min()), row_cap):
                cands = np.nonzero(deg == d)[0]
                if cands.size == 0:
                    continue
                cands = cands[rng.permutation(cands.size)]
                for c in cands:
                    if c in chosen:
                        continue
                    if any(((min(c, o), max(c, o)) in pair_used) for o in chosen):
                        continue
                    picked = int(c)
                    break
                if picked >= 0:
                    break
            if picked < 0:
                # capacity corner at the very end: accept a short cycle rather than fail
                for c in np.argsort(deg):
                    if deg[c] < row_cap and int(c) not in chosen:
                        picked = int(c)
                        break
            chosen.append(picked)
            deg[picked] += 1
        for i in range(col_weight):
            for j in range(i + 1, col_weight):
                a, b = chosen[i], chosen[j]
                pair_used.add((min(a, b), max(a, b)))
        var_checks[v] = sorted(chosen)
    if not np.all(deg == row_cap):
        raise RuntimeError("construction did not fill checks regularly")
    check_to_var = np.full((m, row_cap), -1, dtype=np.int32)
    fill = np.zeros(m, dtype=np.int64)
    for v in range(n):
        for c in var_checks[v]:
            check_to_var[c, fill[c]] = v
            fill[c] += 1
    return check_to_var


def _derive_encoder(check_to_var: np.ndarray, n: int, k: int):
    m, rw = check_to_var.shape
    words = (n + 63) // 64
    rows = np.zeros((m, words), dtype=np.uint64)
    for c in range(m):
        for v in check_to_var[c]:
            rows[c, v // 64] ^= np.uint64(1) << np.uint64(v % 64)

    pivot_cols: list[int] = []
    r = 0
    for col in range(n - 1, -1, -1):
        w, b = col // 64, np.uint64(1) << np.uint64(col % 64)
        hit = np.nonzero((rows[r:, w] & b) != 0)[0]
        if hit.size == 0:
            continue
        i = r + int(hit[0])
        if i != r:
            rows[[r, i]] = rows[[i, r]]
        mask = (rows[:, w] & b) != 0
        mask[r] = False
        rows[mask] ^= rows[r]
        pivot_cols.append(col)
        r += 1
        if r == m:
            break
    rank = r
    pivots = np.array(pivot_cols, dtype=np.int64)
    free = np.setdiff1d(np.arange(n), pivots)
    if free.size < k:
        raise RuntimeError("not enough free columns for the requested dimension")
    info_pos = free[:k].astype(np.int64)
    gen = np.zeros((rank, k), dtype=np.uint8)
    for j, col in enumerate(info_pos):
        w, b = col // 64, np.uint64(1) << np.uint64(col % 64)
        gen[:, j] = ((rows[:rank, w] & b) != 0).astype(np.uint8)
    return info_pos, pivots, gen


@lru_cache(maxsize=4)
def make_code(n: int = 2048, k: int = 1536, column_weight: int = 3, seed: int = 2024) -> LdpcCode:
    if (n - k) <= 0 or (n * column_weight) % (n - k) != 0:
        raise ValueError("n, k, column_weight must give an integer row weight")
    m = n - k
    row_cap = n * column_weight // m
    check_to_var = _construct_graph(n, m, column_weight, row_cap, seed)
    info_pos, parity_pos, gen = _derive_encoder(check_to_var, n, k)
    edge_var = check_to_var.ravel()
    vm_order = np.argsort(edge_var, kind="stable").astype(np.int64)
    return LdpcCode(
        n=n, k=k, check_to_var=check_to_var, vm_order=vm_order,
        info_pos=info_pos, parity_pos=parity_pos, gen=gen, seed=seed,
    )


def block_count(n_info_bits: int, code: LdpcCode) -> int:
    return -(-n_info_bits // code.k)


def ldpc_encode(info: BitBuffer, code: LdpcCode) -> BitBuffer:
    """Encode, zero-padding the info bits up to a whole number of blocks."""
    bits = info.bits()
    nb = block_count(bits.size, code)
    u = np.zeros(nb * code.k, dtype=np.uint8)
    u[: bits.size] = bits
    u = u.reshape(nb, code.k).T  # (k, nb)
    par = (code.gen.astype(np.float32) @ u.astype(np.float32)) % 2
    cw = np.zeros((code.n, nb), dtype=np.uint8)
    cw[code.info_pos] = u
    cw[code.parity_pos] = par.astype(np.uint8)
    return BitBuffer.from_bits(cw.T.ravel())


def syndrome_weight(codeword_bits: np.ndarray, code: LdpcCode) -> int:
    b = np.asarray(codeword_bits, dtype=np.uint8).reshape(-1, code.n)
    syn = b[:, code.check_to_var.ravel()].reshape(b.shape[0], code.m, code.row_weight)
    return int(np.count_nonzero(syn.sum(axis=2) % 2))


def _bp_decode_batch(llrs: np.ndarray, code: LdpcCode, max_iters: int):
    nb, n = llrs.shape
    m, rw = code.m, code.row_weight
    e = m * rw
    edge_var = code.check_to_var.ravel()
    vm = code.vm_order
    cw = llrs.shape[0]

    lq = llrs[:, edge_var].copy()                 # var->check, check-major
    post = llrs.copy()
    bits = np.zeros((nb, n), dtype=np.uint8)
    conv = np.zeros(nb, dtype=bool)
    for it in range(max_iters + 1):
        hard = (post < 0).astype(np.uint8)
        syn = hard[:, edge_var].reshape(nb, m, rw).sum(axis=2) % 2
        ok = ~conv & (syn.sum(axis=1) == 0)
        bits[ok] = hard[ok]
        conv |= ok
        if conv.all() or it == max_iters:
            break
        t = np.tanh(np.clip(lq, -_LLR_CLIP, _LLR_CLIP) / 2.0).reshape(nb, m, rw)
        sgn = np.where(t >= 0, 1.0, -1.0)
        mag = np.clip(np.abs(t), 1e-12, 1.0)
        logm = np.log(mag)
        excl = np.exp(logm.sum(axis=2, keepdims=True) - logm)
        esgn = sgn.prod(axis=2, keepdims=True) * sgn
        lr = 2.0 * np.arctanh(np.clip(esgn * excl, -1 + 1e-12, 1 - 1e-12))
        rv = lr.reshape(nb, e)[:, vm].reshape(nb, n, -1)
        post = llrs + rv.sum(axis=2)
        lq_vm = post.repeat(rv.shape[2]).reshape(nb, n, -1) - rv
        lq[:, vm] = lq_vm.reshape(nb, e)
    bits[~conv] = (post[~conv] < 0).astype(np.uint8)
    return bits, conv


def ldpc_decode(llrs, code: LdpcCode, max_iters: int = 50) -> tuple[BitBuffer, np.ndarray]:
    """Sum-product decoding with early stop on a zero syndrome.

    llrs follow the convention positive => bit 0; length must be a whole
    number of codewords.  Returns the recovered info bits (all blocks
    concatenated) and a per-block convergence flag.
    """
    arr = np.asarray(llrs, dtype=np.float64)
    if arr.size % code.n:
        raise ValueError("llr length must be a multiple of the block length")
    blocks = arr.reshape(-1, code.n)
    bits, conv = _bp_decode_batch(blocks, code, max_iters)
    info = bits[:, code.info_pos].ravel()
    return BitBuffer.from_bits(info), conv
