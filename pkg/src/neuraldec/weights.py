"""Weight sets for neural MinSum decoders and the node-degree sharing schemes.

Sharing types (per iteration t):

====  ==========================  ======================
type  check-side weight beta      variable-side alpha
====  ==========================  ======================
0     one per edge                neutral
1     (deg c, deg v)              neutral
2     deg c                       deg v
3     deg c                       neutral
4     neutral                     deg v
5     protomatrix cell (i', j')   neutral
6     protomatrix row i'          neutral
7     neutral                     protomatrix column j'
8     one per iteration           neutral
====  ==========================  ======================

Neutral means 1 for the normalized (multiplicative) family and 0 for the
offset family. A hybrid set stores iterations 1..I' and reuses the
iteration-I' entry for every later iteration.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .codes import TannerGraph

FAMILIES = ("nms", "oms")
BETA_KIND = {0: "edge", 1: "dcdv", 2: "dc", 3: "dc", 4: None, 5: "cell", 6: "row", 7: None, 8: "all"}
ALPHA_KIND = {0: None, 1: None, 2: "dv", 3: None, 4: "dv", 5: None, 6: None, 7: "col", 8: None}
_KEY_NAMES = {"edge": ("e",), "dcdv": ("dc", "dv"), "dc": ("dc",), "dv": ("dv",),
              "cell": ("row", "col"), "row": ("row",), "col": ("col",), "all": ()}


def neutral(family: str) -> float:
    return 1.0 if family == "nms" else 0.0


def edge_keys(G: TannerGraph, kind: str | None) -> list[tuple[int, ...]] | None:
    """Key of every edge for one sharing dimension, or None when unshared."""
    if kind is None:
        return None
    if kind in ("cell", "row", "col") and G.proto is None:
        raise ValueError("protomatrix sharing needs a protomatrix sidecar")
    E = G.num_edges
    if kind == "edge":
        cols = [np.arange(E)]
    elif kind == "dcdv":
        cols = [G.edge_dc, G.edge_dv]
    elif kind == "dc":
        cols = [G.edge_dc]
    elif kind == "dv":
        cols = [G.edge_dv]
    elif kind == "cell":
        cols = [G.proto.cell[:, 0], G.proto.cell[:, 1]]
    elif kind == "row":
        cols = [G.proto.cell[:, 0]]
    elif kind == "col":
        cols = [G.proto.cell[:, 1]]
    else:
        return [()] * E
    return list(zip(*(c.tolist() for c in cols)))


def key_to_str(kind: str, key: tuple[int, ...]) -> str:
    if kind == "all":
        return "all"
    return ",".join(f"{name}={v}" for name, v in zip(_KEY_NAMES[kind], key))


def key_from_str(kind: str, text: str) -> tuple[int, ...]:
    if kind == "all":
        if text != "all":
            raise ValueError(f"bad key {text!r} for a single shared weight")
        return ()
    parts = dict(p.split("=") for p in text.split(","))
    return tuple(int(parts[name]) for name in _KEY_NAMES[kind])


@dataclass
class WeightSet:
    scheme: int
    family: str
    I_T: int
    I_prime: int
    beta_keys: list[tuple[int, ...]]
    alpha_keys: list[tuple[int, ...]]
    beta: np.ndarray   # (I_prime, len(beta_keys))
    alpha: np.ndarray  # (I_prime, len(alpha_keys))
    _index_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.scheme not in BETA_KIND:
            raise ValueError(f"unknown sharing type {self.scheme}")
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}")
        if not 1 <= self.I_prime <= self.I_T:
            raise ValueError("need 1 <= I_prime <= I_T")
        self.beta = np.asarray(self.beta, dtype=float).reshape(self.I_prime, len(self.beta_keys))
        self.alpha = np.asarray(self.alpha, dtype=float).reshape(self.I_prime, len(self.alpha_keys))

    # -- construction
    @classmethod
    def for_graphs(cls, graphs: TannerGraph | Iterable[TannerGraph], scheme: int, I_T: int,
                   family: str = "nms", I_prime: int | None = None, init: float | None = None) -> "WeightSet":
        """Initialised set whose key space is the union over ``graphs``."""
        if scheme not in BETA_KIND:
            raise ValueError(f"unknown sharing type {scheme}")
        if isinstance(graphs, TannerGraph):
            graphs = [graphs]
        graphs = list(graphs)
        I_prime = I_T if I_prime is None else I_prime
        init = neutral(family) if init is None else init
        bk: set = set()
        ak: set = set()
        for G in graphs:
            bk.update(edge_keys(G, BETA_KIND[scheme]) or [])
            ak.update(edge_keys(G, ALPHA_KIND[scheme]) or [])
        bk_l, ak_l = sorted(bk), sorted(ak)
        return cls(scheme, family, I_T, I_prime, bk_l, ak_l,
                   np.full((I_prime, len(bk_l)), float(init)), np.full((I_prime, len(ak_l)), float(init)))

    @classmethod
    def constant(cls, G: TannerGraph, value: float, I_T: int, family: str = "nms") -> "WeightSet":
        return cls.for_graphs(G, 8, I_T, family, I_prime=1, init=value)

    def copy(self) -> "WeightSet":
        return WeightSet(self.scheme, self.family, self.I_T, self.I_prime, list(self.beta_keys),
                         list(self.alpha_keys), self.beta.copy(), self.alpha.copy())

    def with_values(self, beta: np.ndarray, alpha: np.ndarray) -> "WeightSet":
        W = self.copy()
        W.beta = np.array(beta, dtype=float).reshape(W.beta.shape)
        W.alpha = np.array(alpha, dtype=float).reshape(W.alpha.shape)
        return W

    def with_iterations(self, I_T: int) -> "WeightSet":
        """Same parameters, different iteration budget (the hybrid clamp covers the tail)."""
        if I_T < self.I_prime:
            W = self.copy()
            W.beta, W.alpha = W.beta[:I_T].copy(), W.alpha[:I_T].copy()
            W.I_T = W.I_prime = I_T
            return W
        W = self.copy()
        W.I_T = I_T
        return W

    # -- lookups
    @property
    def neutral(self) -> float:
        return neutral(self.family)

    @property
    def params_per_iteration(self) -> int:
        return len(self.beta_keys) + len(self.alpha_keys)

    @property
    def hybrid(self) -> bool:
        return self.I_prime < self.I_T

    def row(self, t: int) -> int:
        """Storage row of iteration t (1-based); iterations past I' share row I'."""
        if not 1 <= t <= self.I_T:
            raise ValueError(f"iteration {t} outside 1..{self.I_T}")
        return min(t, self.I_prime) - 1

    def key_index(self, G: TannerGraph) -> tuple[np.ndarray | None, np.ndarray | None]:
        """Per-edge column index into ``beta`` / ``alpha`` (None when unshared)."""
        cached = self._index_cache.get(id(G))
        if cached is not None and cached[0] is G:
            return cached[1]
        out = []
        for kind, keys in ((BETA_KIND[self.scheme], self.beta_keys), (ALPHA_KIND[self.scheme], self.alpha_keys)):
            ek = edge_keys(G, kind)
            if ek is None:
                out.append(None)
                continue
            lookup = {k: i for i, k in enumerate(keys)}
            try:
                out.append(np.fromiter((lookup[k] for k in ek), dtype=np.int64, count=len(ek)))
            except KeyError as exc:
                raise KeyError(f"unresolvable weight key {exc.args[0]} for type {self.scheme}") from None
        self._index_cache[id(G)] = (G, tuple(out))
        return tuple(out)

    def edge_weights(self, G: TannerGraph, t: int) -> tuple[np.ndarray, np.ndarray]:
        """(beta, alpha) per edge for iteration t."""
        bi, ai = self.key_index(G)
        r = self.row(t)
        E = G.num_edges
        beta = self.beta[r, bi] if bi is not None else np.full(E, self.neutral)
        alpha = self.alpha[r, ai] if ai is not None else np.full(E, self.neutral)
        return beta, alpha

    def scatter(self, G: TannerGraph, t: int, g_beta_edge, g_alpha_edge, out: "WeightSet") -> None:
        """Accumulate per-edge gradients of iteration t into ``out``'s key space."""
        bi, ai = self.key_index(G)
        r = self.row(t)
        if bi is not None and g_beta_edge is not None:
            out.beta[r] += np.bincount(bi, weights=g_beta_edge, minlength=len(self.beta_keys))
        if ai is not None and g_alpha_edge is not None:
            out.alpha[r] += np.bincount(ai, weights=g_alpha_edge, minlength=len(self.alpha_keys))

    def zeros_like(self) -> "WeightSet":
        return self.with_values(np.zeros_like(self.beta), np.zeros_like(self.alpha))

    def flat(self) -> np.ndarray:
        return np.concatenate([self.beta.ravel(), self.alpha.ravel()])

    # -- serialization
    def to_dict(self) -> dict:
        bk, ak = BETA_KIND[self.scheme], ALPHA_KIND[self.scheme]
        entries = []
        for r in range(self.I_prime):
            for c, key in enumerate(self.beta_keys):
                entries.append({"t": r + 1, "key": key_to_str(bk, key), "beta": float(self.beta[r, c]), "alpha": None})
            for c, key in enumerate(self.alpha_keys):
                entries.append({"t": r + 1, "key": key_to_str(ak, key), "beta": None, "alpha": float(self.alpha[r, c])})
        return {"scheme": self.scheme, "I_T": self.I_T, "I_prime": self.I_prime,
                "family": self.family, "entries": entries}

    def dumps(self) -> str:
        # json writes floats with repr(), the shortest string that round-trips
        return json.dumps(self.to_dict(), indent=1) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "WeightSet":
        scheme, I_prime = int(d["scheme"]), int(d["I_prime"])
        bk, ak = BETA_KIND[scheme], ALPHA_KIND[scheme]
        bvals: dict = {}
        avals: dict = {}
        for e in d["entries"]:
            t = int(e["t"])
            if e.get("beta") is not None:
                bvals[(t, key_from_str(bk, e["key"]))] = float(e["beta"])
            if e.get("alpha") is not None:
                avals[(t, key_from_str(ak, e["key"]))] = float(e["alpha"])
        bkeys = sorted({k for _, k in bvals})
        akeys = sorted({k for _, k in avals})
        beta = np.empty((I_prime, len(bkeys)))
        alpha = np.empty((I_prime, len(akeys)))
        try:
            for r in range(I_prime):
                for c, k in enumerate(bkeys):
                    beta[r, c] = bvals[(r + 1, k)]
                for c, k in enumerate(akeys):
                    alpha[r, c] = avals[(r + 1, k)]
        except KeyError as exc:
            raise ValueError(f"weight file misses entry {exc.args[0]}") from None
        return cls(scheme, d["family"], int(d["I_T"]), I_prime, bkeys, akeys, beta, alpha)

    @classmethod
    def loads(cls, text: str) -> "WeightSet":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path) -> "WeightSet":
        with open(path) as fh:
            return cls.loads(fh.read())


def resolve_weight(W: WeightSet, t: int, edge: int, G: TannerGraph) -> tuple[float, float]:
    beta, alpha = W.edge_weights(G, t)
    return float(beta[edge]), float(alpha[edge])


def scheme_param_count(G: TannerGraph, scheme: int) -> int:
    """Parameters per iteration a sharing type needs on this graph."""
    if scheme not in BETA_KIND:
        raise ValueError(f"unknown sharing type {scheme}")
    count = 0
    for kind in (BETA_KIND[scheme], ALPHA_KIND[scheme]):
        keys = edge_keys(G, kind)
        if keys is not None:
            count += len(set(keys))
    return count
