"""Small code constructors used by the tests, demos and acceptance runs.

These are fixtures, not code design tools: they build matrices with a
prescribed degree structure and make no attempt at girth or threshold
optimisation.

``PBRL_SURROGATE_PROTO`` is a 17x25 protomatrix (entries are edge
multiplicities) whose edge-perspective degree distribution equals the one
published for the k=1032 PBRL code, with 101 nonzero cells and 41 distinct
(check degree, variable degree) pairs. ``dvbs2_like`` builds an
IRA/staircase matrix with the (16200, 7200) DVB-S2 degree distribution.
"""
from __future__ import annotations

import numpy as np

from .codes import ParityCheckMatrix, ProtoMap

PBRL_SURROGATE_PROTO = np.array([
    [2, 2, 2, 2, 2, 2, 2, 2, 2, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
    [2, 2, 2, 2, 2, 2, 2, 2, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
    [2, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
    [1, 1, 0, 0, 1, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
    [2, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
    [2, 1, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
    [1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
    [2, 1, 0, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0],
    [2, 1, 0, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0],
    [1, 1, 1, 1, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0],
    [1, 1, 1, 0, 0, 0, 1, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0],
    [1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0],
    [1, 0, 1, 1, 1, 1, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0],
    [1, 0, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0],
    [2, 1, 1, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0],
    [2, 1, 1, 1, 0, 0, 0, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0],
    [2, 1, 1, 1, 1, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1],
], dtype=np.int64)


def hamming_7_4() -> ParityCheckMatrix:
    return ParityCheckMatrix.from_dense([[1, 1, 0, 1, 1, 0, 0],
                                         [1, 0, 1, 1, 0, 1, 0],
                                         [0, 1, 1, 1, 0, 0, 1]])


def tree_code() -> ParityCheckMatrix:
    """Cycle-free Tanner graph: three checks hanging off shared variables."""
    return ParityCheckMatrix.from_dense([[1, 1, 1, 0, 0, 0, 0, 0],
                                         [0, 0, 1, 1, 1, 0, 0, 0],
                                         [0, 0, 0, 0, 1, 1, 1, 1]])


def regular_code(n: int, dv: int, dc: int, seed: int = 0) -> ParityCheckMatrix:
    """Gallager-style (dv, dc)-regular matrix: dv stacked column-permuted bands."""
    if n % dc:
        raise ValueError("n must be a multiple of dc")
    rng = np.random.default_rng(seed)
    rows_per_band = n // dc
    band = [tuple(range(r * dc, (r + 1) * dc)) for r in range(rows_per_band)]
    rows = list(band)
    for _ in range(dv - 1):
        perm = rng.permutation(n)
        rows += [tuple(sorted(perm[list(r)].tolist())) for r in band]
    return ParityCheckMatrix(n, tuple(rows))


def lift_protomatrix(B, lift: int, seed: int = 0) -> tuple[ParityCheckMatrix, ProtoMap]:
    """Circulant lifting; a cell of multiplicity w gets w distinct shifts."""
    B = np.asarray(B, dtype=np.int64)
    if B.max() > lift:
        raise ValueError("cell multiplicity exceeds the lifting factor")
    rng = np.random.default_rng(seed)
    rb, cb = B.shape
    rows: list[list[int]] = [[] for _ in range(rb * lift)]
    for i in range(rb):
        for j in range(cb):
            if B[i, j] == 0:
                continue
            shifts = rng.choice(lift, size=B[i, j], replace=False)
            for s in shifts:
                for r in range(lift):
                    rows[i * lift + r].append(j * lift + (r + s) % lift)
    H = ParityCheckMatrix(cb * lift, tuple(tuple(sorted(r)) for r in rows))
    return H, ProtoMap.from_lifting(H, lift)


def pbrl_surrogate(lift: int, rows: int = 17, seed: int = 0) -> tuple[ParityCheckMatrix, ProtoMap]:
    """Lifted PBRL-style code using the first ``rows`` protomatrix rows.

    ``rows=17`` is the lowest-rate (full) matrix; fewer rows give the
    higher-rate members of the rate-compatible family, which share the
    protomatrix cell coordinates of the full matrix.
    """
    if not 2 <= rows <= 17:
        raise ValueError("rows must be in 2..17")
    B = PBRL_SURROGATE_PROTO[:rows, :rows + 8]
    return lift_protomatrix(B, lift, seed)


def dvbs2_like(scale: float = 1.0, seed: int = 0) -> ParityCheckMatrix:
    """IRA (staircase) matrix with the DVB-S2 (16200, 7200) degree distribution.

    Full scale: 1800 information bits of degree 8, 5400 of degree 3, a
    staircase over 9000 parity bits (the last one has degree 1) and
    1441/3239/3600/720 checks of degree 4/5/6/7.
    """
    rng = np.random.default_rng(seed)
    n8, n3, m = (int(round(v * scale)) for v in (1800, 5400, 9000))
    counts = np.round(np.array([1441, 3239, 3600, 720]) * scale).astype(int)
    counts[2] += m - counts.sum()
    dc = np.repeat([4, 5, 6, 7], counts)
    rng.shuffle(dc)
    slots = dc - 2
    slots[0] += 1  # check 0 carries one staircase edge
    info_deg = np.repeat([8, 3], [n8, n3])
    excess = slots.sum() - info_deg.sum()
    # nudge check degrees (staying in 4..7) until the stub counts agree
    order = rng.permutation(m)
    k = 0
    while excess:
        c = order[k % m]
        if excess > 0 and dc[c] > 4:
            dc[c] -= 1; slots[c] -= 1; excess -= 1
        elif excess < 0 and dc[c] < 7:
            dc[c] += 1; slots[c] += 1; excess += 1
        k += 1
    ninfo = n8 + n3
    check_stubs = np.repeat(np.arange(m), slots)
    var_stubs = np.repeat(np.arange(ninfo), info_deg)
    for _ in range(200):
        rng.shuffle(check_stubs)
        pairs = check_stubs * ninfo + var_stubs
        _, first = np.unique(pairs, return_index=True)
        dup = np.setdiff1d(np.arange(len(pairs)), first)
        for d in dup:  # swap duplicates with random partners
            for _try in range(100):
                o = rng.integers(len(pairs))
                a, b = check_stubs[d], check_stubs[o]
                if a == b:
                    continue
                if not np.any((check_stubs == b) & (var_stubs == var_stubs[d])) and \
                        not np.any((check_stubs == a) & (var_stubs == var_stubs[o])):
                    check_stubs[d], check_stubs[o] = b, a
                    break
        if len(np.unique(check_stubs * ninfo + var_stubs)) == len(pairs):
            break
    else:
        raise RuntimeError("could not place information edges without repeats")
    rows: list[list[int]] = [[] for _ in range(m)]
    for c, v in zip(check_stubs.tolist(), var_stubs.tolist()):
        rows[c].append(v)
    for c in range(m):
        rows[c].append(ninfo + c)
        if c:
            rows[c].append(ninfo + c - 1)
    return ParityCheckMatrix(ninfo + m, tuple(tuple(sorted(r)) for r in rows))
