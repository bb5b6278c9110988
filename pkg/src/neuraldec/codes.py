"""Parity-check matrices, Tanner graphs and layer plans.

Indices are 0-based everywhere inside the package; the alist reader and
writer convert from/to the 1-based file convention.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np


class AlistError(ValueError):
    """Malformed alist input; ``line`` is the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class ParityCheckMatrix:
    n: int
    rows: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if self.n <= 0:
            raise ValueError("n must be positive")
        rows = tuple(tuple(int(v) for v in r) for r in self.rows)
        for i, r in enumerate(rows):
            if not r:
                raise ValueError(f"row {i} is empty")
            if any(b <= a for a, b in zip(r, r[1:])):
                raise ValueError(f"row {i} is not strictly increasing")
            if r[0] < 0 or r[-1] >= self.n:
                raise ValueError(f"row {i} has a variable index outside [0, {self.n})")
        object.__setattr__(self, "rows", rows)

    @property
    def m(self) -> int:
        return len(self.rows)

    @property
    def k(self) -> int:
        return self.n - self.m

    @property
    def rate(self) -> float:
        return self.k / self.n

    @classmethod
    def from_dense(cls, H) -> "ParityCheckMatrix":
        H = np.asarray(H)
        if H.ndim != 2:
            raise ValueError("H must be two dimensional")
        return cls(H.shape[1], tuple(tuple(np.flatnonzero(row)) for row in H))

    def to_dense(self) -> np.ndarray:
        H = np.zeros((self.m, self.n), dtype=np.uint8)
        for i, r in enumerate(self.rows):
            H[i, list(r)] = 1
        return H

    def columns(self) -> list[list[int]]:
        cols: list[list[int]] = [[] for _ in range(self.n)]
        for i, r in enumerate(self.rows):
            for j in r:
                cols[j].append(i)
        return cols


def gf2_rank(H: ParityCheckMatrix) -> int:
    """Rank over GF(2). Diagnostic only; O(m^2 n / 64)."""
    words = (H.n + 63) // 64
    mat = np.zeros((H.m, words), dtype=np.uint64)
    for i, r in enumerate(H.rows):
        for j in r:
            mat[i, j // 64] |= np.uint64(1) << np.uint64(j % 64)
    rank = 0
    for col in range(H.n):
        w, b = divmod(col, 64)
        bit = np.uint64(1) << np.uint64(b)
        hits = np.flatnonzero(mat[rank:, w] & bit)
        if hits.size == 0:
            continue
        p = rank + hits[0]
        if p != rank:
            mat[[rank, p]] = mat[[p, rank]]
        others = np.flatnonzero(mat[:, w] & bit)
        others = others[others != rank]
        mat[others] ^= mat[rank]
        rank += 1
        if rank == H.m:
            break
    return rank


# ---------------------------------------------------------------- alist I/O

def _int_line(tokens: list[str], lineno: int) -> list[int]:
    try:
        return [int(t) for t in tokens]
    except ValueError:
        raise AlistError(f"non-integer token in {tokens!r}", lineno) from None


def parse_alist(text: str) -> ParityCheckMatrix:
    lines = [(no + 1, ln.split()) for no, ln in enumerate(text.splitlines())]
    lines = [(no, toks) for no, toks in lines if toks]
    if len(lines) < 4:
        raise AlistError("file too short")
    it = iter(lines)

    def take(count: int | None = None) -> tuple[int, list[int]]:
        try:
            no, toks = next(it)
        except StopIteration:
            raise AlistError("unexpected end of file") from None
        vals = _int_line(toks, no)
        if count is not None and len(vals) != count:
            raise AlistError(f"expected {count} values, found {len(vals)}", no)
        return no, vals

    no, (n, m) = take(2)
    if n <= 0 or m <= 0:
        raise AlistError("dimensions must be positive", no)
    take(2)  # max degrees, validated implicitly below
    no_cd, col_deg = take(n)
    no_rd, row_deg = take(m)

    cols: list[list[int]] = []
    for j in range(n):
        no, vals = take()
        nz = [v for v in vals if v != 0]
        if len(nz) != col_deg[j]:
            raise AlistError(f"column {j + 1} lists {len(nz)} checks, degree says {col_deg[j]}", no)
        for v in nz:
            if not 1 <= v <= m:
                raise AlistError(f"check index {v} out of range 1..{m}", no)
        cols.append(sorted(v - 1 for v in nz))
    rows: list[list[int]] = []
    row_lines: list[int] = []
    for i in range(m):
        no, vals = take()
        nz = [v for v in vals if v != 0]
        if len(nz) != row_deg[i]:
            raise AlistError(f"row {i + 1} lists {len(nz)} variables, degree says {row_deg[i]}", no)
        for v in nz:
            if not 1 <= v <= n:
                raise AlistError(f"variable index {v} out of range 1..{n}", no)
        if len(set(nz)) != len(nz):
            raise AlistError(f"duplicate variable index in row {i + 1}", no)
        rows.append(sorted(v - 1 for v in nz))
        row_lines.append(no)

    from_rows: list[list[int]] = [[] for _ in range(n)]
    for i, r in enumerate(rows):
        for j in r:
            from_rows[j].append(i)
    for j in range(n):
        if from_rows[j] != cols[j]:
            bad = sorted(set(from_rows[j]) ^ set(cols[j]))[0]
            raise AlistError(f"column {j + 1} and row {bad + 1} disagree", row_lines[bad])
    try:
        return ParityCheckMatrix(n, tuple(tuple(r) for r in rows))
    except ValueError as exc:
        raise AlistError(str(exc)) from None


def write_alist(H: ParityCheckMatrix, pad: bool = False) -> str:
    cols = H.columns()
    max_dv = max((len(c) for c in cols), default=0)
    max_dc = max(len(r) for r in H.rows)

    def fmt(idx: Sequence[int], width: int) -> str:
        vals = [i + 1 for i in idx]
        if pad:
            vals += [0] * (width - len(vals))
        return " ".join(map(str, vals))

    out = [f"{H.n} {H.m}", f"{max_dv} {max_dc}",
           " ".join(str(len(c)) for c in cols),
           " ".join(str(len(r)) for r in H.rows)]
    out += [fmt(c, max_dv) for c in cols]
    out += [fmt(r, max_dc) for r in H.rows]
    return "\n".join(out) + "\n"


def load_alist(path) -> ParityCheckMatrix:
    with open(path) as fh:
        return parse_alist(fh.read())


def save_alist(H: ParityCheckMatrix, path, pad: bool = False) -> None:
    with open(path, "w") as fh:
        fh.write(write_alist(H, pad=pad))


def check_syndrome(H: ParityCheckMatrix, hard_bits) -> bool:
    bits = np.asarray(hard_bits)
    if bits.shape != (H.n,):
        raise ValueError(f"expected {H.n} bits, got shape {bits.shape}")
    bits = bits.astype(bool)
    return all(not np.logical_xor.reduce(bits[list(r)]) for r in H.rows)


# ------------------------------------------------------------- Tanner graph

@dataclass(frozen=True, eq=False)
class ProtoMap:
    """Edge -> protomatrix cell map read from the sidecar file."""
    lift: int
    rows: int
    cols: int
    cell: np.ndarray  # (E, 2) int, (proto_row, proto_col) per edge id

    @classmethod
    def from_lifting(cls, H: ParityCheckMatrix, lift: int) -> "ProtoMap":
        G = build_tanner_graph(H)
        cell = np.stack([G.edge_check // lift, G.edge_var // lift], axis=1)
        return cls(lift, -(-H.m // lift), -(-H.n // lift), cell)


def parse_protomap(text: str, num_edges: int | None = None) -> ProtoMap:
    lines = [ln.split() for ln in text.splitlines() if ln.strip()]
    if not lines or len(lines[0]) != 3:
        raise ValueError("sidecar header must be 'f rows cols'")
    f, rows, cols = (int(v) for v in lines[0])
    body = np.array([[int(v) for v in ln] for ln in lines[1:]], dtype=np.int64).reshape(-1, 3)
    order = np.argsort(body[:, 0], kind="stable")
    body = body[order]
    if not np.array_equal(body[:, 0], np.arange(len(body))):
        raise ValueError("sidecar edge ids must cover 0..E-1 exactly once")
    if num_edges is not None and len(body) != num_edges:
        raise ValueError(f"sidecar lists {len(body)} edges, graph has {num_edges}")
    if (body[:, 1] < 0).any() or (body[:, 1] >= rows).any() or (body[:, 2] < 0).any() or (body[:, 2] >= cols).any():
        raise ValueError("sidecar cell outside the declared protomatrix")
    return ProtoMap(f, rows, cols, body[:, 1:].copy())


def write_protomap(pm: ProtoMap) -> str:
    out = [f"{pm.lift} {pm.rows} {pm.cols}"]
    out += [f"{e} {r} {c}" for e, (r, c) in enumerate(pm.cell.tolist())]
    return "\n".join(out) + "\n"


@dataclass(frozen=True, eq=False)
class TannerGraph:
    """Edge-indexed adjacency; edge ids are assigned row-major."""
    H: ParityCheckMatrix
    proto: ProtoMap | None = None
    edge_check: np.ndarray = field(init=False)
    edge_var: np.ndarray = field(init=False)
    check_start: np.ndarray = field(init=False)

    def __post_init__(self):
        ec = np.concatenate([np.full(len(r), i) for i, r in enumerate(self.H.rows)]).astype(np.int64)
        ev = np.concatenate([np.asarray(r) for r in self.H.rows]).astype(np.int64)
        start = np.zeros(self.H.m + 1, dtype=np.int64)
        np.cumsum([len(r) for r in self.H.rows], out=start[1:])
        for name, arr in (("edge_check", ec), ("edge_var", ev), ("check_start", start)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.proto is not None and len(self.proto.cell) != len(ev):
            raise ValueError("protomatrix map does not match the edge count")

    @property
    def n(self) -> int:
        return self.H.n

    @property
    def m(self) -> int:
        return self.H.m

    @property
    def num_edges(self) -> int:
        return len(self.edge_var)

    @cached_property
    def check_degrees(self) -> np.ndarray:
        return np.diff(self.check_start)

    @cached_property
    def var_degrees(self) -> np.ndarray:
        return np.bincount(self.edge_var, minlength=self.n)

    @cached_property
    def var_edges_sorted(self) -> np.ndarray:
        """Edge ids ordered by variable (stable, so by check within a variable)."""
        return np.argsort(self.edge_var, kind="stable")

    @cached_property
    def var_start(self) -> np.ndarray:
        start = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(self.var_degrees, out=start[1:])
        return start

    def check_edges(self, i: int) -> np.ndarray:
        return np.arange(self.check_start[i], self.check_start[i + 1])

    def var_edges(self, j: int) -> np.ndarray:
        return self.var_edges_sorted[self.var_start[j]:self.var_start[j + 1]]

    def edge_of(self, check: int, var: int) -> int:
        lo, hi = self.check_start[check], self.check_start[check + 1]
        pos = lo + np.searchsorted(self.edge_var[lo:hi], var)
        if pos >= hi or self.edge_var[pos] != var:
            raise KeyError((check, var))
        return int(pos)

    @cached_property
    def edge_dc(self) -> np.ndarray:
        return self.check_degrees[self.edge_check]

    @cached_property
    def edge_dv(self) -> np.ndarray:
        return self.var_degrees[self.edge_var]

    @property
    def degree_sets(self) -> tuple[list[int], list[int]]:
        return sorted(set(self.check_degrees.tolist())), sorted(set(self.var_degrees[self.var_degrees > 0].tolist()))


def build_tanner_graph(H: ParityCheckMatrix, proto: ProtoMap | None = None) -> TannerGraph:
    return TannerGraph(H, proto)


def degree_profile(G: TannerGraph) -> tuple[dict[int, float], dict[int, float]]:
    """Edge-perspective (lambda, rho), keyed by node degree.

    A degree-d entry is the coefficient of x^(d-1) in the polynomial form.
    """
    E = G.num_edges
    lam_counts = np.bincount(G.edge_dv)
    rho_counts = np.bincount(G.edge_dc)
    lam = {d: c / E for d, c in enumerate(lam_counts.tolist()) if c}
    rho = {d: c / E for d, c in enumerate(rho_counts.tolist()) if c}
    return lam, rho


# --------------------------------------------------------------- layer plan

@dataclass(frozen=True)
class LayerPlan:
    layers: tuple[tuple[int, ...], ...]

    def __len__(self):
        return len(self.layers)

    def validate(self, m: int) -> None:
        seen: set[int] = set()
        for r, layer in enumerate(self.layers):
            if not layer:
                raise ValueError(f"layer {r} is empty")
            for c in layer:
                if not 0 <= c < m:
                    raise ValueError(f"check {c} out of range")
                if c in seen:
                    raise ValueError(f"check {c} appears in more than one layer")
                seen.add(c)
        if len(seen) != m:
            raise ValueError(f"layers cover {len(seen)} of {m} checks")


def default_layer_plan(G: TannerGraph, layers: int | Iterable[Iterable[int]] | None = None) -> LayerPlan:
    """Contiguous equal check blocks, or a validated explicit partition.

    With ``layers=None`` the protomatrix row blocks are used when a sidecar is
    attached, otherwise every check forms its own layer.
    """
    if layers is None:
        if G.proto is None:
            layers = G.m
        else:
            blocks = [tuple(np.unique(G.edge_check[G.proto.cell[:, 0] == r]).tolist())
                      for r in range(G.proto.rows)]
            plan = LayerPlan(tuple(b for b in blocks if b))
            plan.validate(G.m)
            return plan
    if isinstance(layers, (int, np.integer)):
        count = int(layers)
        if count <= 0 or G.m % count:
            raise ValueError(f"{count} layers do not divide {G.m} checks; pass an explicit partition")
        size = G.m // count
        return LayerPlan(tuple(tuple(range(r * size, (r + 1) * size)) for r in range(count)))
    plan = LayerPlan(tuple(tuple(int(c) for c in layer) for layer in layers))
    plan.validate(G.m)
    return plan
