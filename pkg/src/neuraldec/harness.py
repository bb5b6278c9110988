"""Monte-Carlo frame-error-rate sweeps over BPSK/AWGN.

Frame ``i`` of sweep point ``k`` always draws its noise from
``(master_seed, k, i)``, whichever worker decodes it. Workers decode chunks
of consecutive frames and the coordinator merges chunks in frame order,
cutting each point exactly at the frame where the error count reaches
E_min (or at F_max). The records therefore do not depend on the worker
count or on how far ahead the workers ran.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import signal
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy.stats import binomtest

from .channel import ebn0_grid, ebn0_to_sigma, llr_block
from .codes import TannerGraph, build_tanner_graph, load_alist, parse_protomap
from .decoders import Decoder
from .weights import WeightSet

WORKERS_ENV = "NEURALDEC_WORKERS"


@dataclass
class FerRecord:
    code_id: str
    decoder: str
    ebn0_db: float
    frames_sent: int
    frame_errors: int
    bit_errors: int
    fer: float
    ber: float
    wall_seconds: float
    master_seed: int

    def wilson(self, level: float = 0.95) -> tuple[float, float]:
        return wilson_interval(self.frame_errors, self.frames_sent, level)


def wilson_interval(errors: int, frames: int, level: float = 0.95) -> tuple[float, float]:
    if frames == 0:
        return 0.0, 1.0
    ci = binomtest(errors, frames).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


def ci_separated(a: FerRecord, b: FerRecord, level: float = 0.95) -> bool:
    """True when a's interval lies entirely below b's."""
    return a.wilson(level)[1] < b.wilson(level)[0]


# ------------------------------------------------------------------ config

@dataclass
class DecoderSpec:
    """What to decode with. ``family`` adds "wrcq" to the float families."""
    family: str = "minsum"
    schedule: str = "flooding"
    max_iter: int = 10
    factor: float | None = None        # scalar nms factor / oms offset
    weights: str | None = None         # WeightSet file
    quantizers: str | None = None      # quantizer list file (wrcq)
    b_v: int | None = None
    rcq_family: str = "oms"

    def describe(self) -> str:
        parts = [self.family, self.schedule, f"I={self.max_iter}"]
        if self.factor is not None:
            parts.append(f"w={self.factor!r}")
        if self.weights:
            parts.append(f"weights={Path(self.weights).name}")
        if self.quantizers:
            parts.append(f"q={Path(self.quantizers).name}")
        if self.b_v:
            parts.append(f"bv={self.b_v}")
        return "/".join(parts)


@dataclass
class SweepConfig:
    code: str
    proto: str | None = None
    code_id: str | None = None
    decoder: DecoderSpec = field(default_factory=DecoderSpec)
    ebn0_lo: float = 1.0
    ebn0_hi: float = 3.0
    ebn0_step: float = 0.5
    e_min: int = 100
    f_max: int = 10_000_000
    workers: int | None = None
    chunk: int = 500
    master_seed: int = 0
    out: str | None = None
    manifest: str | None = None
    timing_in_csv: bool = False

    def __post_init__(self):
        if isinstance(self.decoder, dict):
            self.decoder = DecoderSpec(**self.decoder)
        if self.e_min < 1:
            raise ValueError("e_min must be at least 1")
        if self.f_max < self.e_min:
            raise ValueError("f_max must be at least e_min")
        if self.chunk < 1:
            raise ValueError("chunk must be positive")

    @property
    def n_workers(self) -> int:
        if self.workers is not None:
            return max(1, int(self.workers))
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))

    def grid(self) -> np.ndarray:
        return ebn0_grid(self.ebn0_lo, self.ebn0_hi, self.ebn0_step)

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        """Hash of everything that determines the results (not workers or paths)."""
        d = self.to_dict()
        for k in ("workers", "out", "manifest", "timing_in_csv", "chunk"):
            d.pop(k)
        d["artifacts"] = {p: _file_hash(p) for p in self.artifact_paths()}
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()

    def artifact_paths(self) -> list[str]:
        paths = [self.code, self.proto, self.decoder.weights, self.decoder.quantizers]
        return [p for p in paths if p]

    @classmethod
    def from_dict(cls, d: dict) -> "SweepConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown sweep config keys: {sorted(unknown)}")
        return cls(**d)


def _file_hash(path: str) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def load_graph(code: str, proto: str | None = None) -> TannerGraph:
    H = load_alist(code)
    pm = None
    if proto:
        with open(proto) as fh:
            pm = parse_protomap(fh.read(), None)
    return build_tanner_graph(H, pm)


def build_decoder(G: TannerGraph, spec: DecoderSpec):
    if spec.family == "wrcq":
        from .rcq import FixedPointSpec, RCQDecoder, load_quantizers
        if not spec.quantizers:
            raise ValueError("wrcq decoding needs a quantizer list file")
        with open(spec.quantizers) as fh:
            qs, fx = load_quantizers(fh.read())
        if qs.I_T != spec.max_iter:
            from .rcq import QuantizerSchedule
            qs = QuantizerSchedule(qs.pairs, spec.max_iter)
        if fx is None:
            fx = FixedPointSpec.for_quantizers(qs, spec.b_v or 8)
        W = WeightSet.load(spec.weights) if spec.weights else None
        fam = W.family if W is not None else spec.rcq_family
        if W is None and spec.factor is not None:
            W = WeightSet.constant(G, spec.factor, spec.max_iter, fam)
        return RCQDecoder(G, qs, fx, W, fam, spec.max_iter)
    weights = WeightSet.load(spec.weights) if spec.weights else spec.factor
    return Decoder(G, spec.family, weights, spec.schedule, spec.max_iter)


# ------------------------------------------------------------------ workers

_STATE: dict = {}


def _worker_init(cfg_dict: dict) -> None:
    cfg = SweepConfig.from_dict(cfg_dict)
    G = load_graph(cfg.code, cfg.proto)
    _STATE.update(cfg=cfg, G=G, dec=build_decoder(G, cfg.decoder))


def _decode_chunk(point: int, sigma: float, start: int, count: int):
    cfg, G, dec = _STATE["cfg"], _STATE["G"], _STATE["dec"]
    llr = llr_block(G.n, sigma, cfg.master_seed, range(start, start + count), stream=point)
    res = dec.decode(llr)
    bit_err = res.hard_bits.sum(axis=1).astype(np.int64)  # all-zero codeword
    return start, bit_err


@dataclass
class SweepResult:
    records: list[FerRecord]
    truncated: bool
    digest: str


class _Stop:
    def __init__(self):
        self.flag = False

    def __call__(self, signum, frame):
        self.flag = True


def run_fer_sweep(cfg: SweepConfig, progress=None) -> SweepResult:
    """Simulate every grid point until E_min frame errors or F_max frames."""
    for p in cfg.artifact_paths():
        if not os.path.exists(p):
            raise FileNotFoundError(f"cannot load {p}")
    cfg_dict = cfg.to_dict()
    _worker_init(cfg_dict)
    G = _STATE["G"]
    code_id = cfg.code_id or Path(cfg.code).stem
    desc = cfg.decoder.describe()
    rate = G.H.rate
    stop = _Stop()
    old = signal.signal(signal.SIGTERM, stop) if _main_thread() else None
    pool = ProcessPoolExecutor(cfg.n_workers, initializer=_worker_init, initargs=(cfg_dict,)) \
        if cfg.n_workers > 1 else None
    records: list[FerRecord] = []
    truncated = False
    try:
        for k, ebn0 in enumerate(cfg.grid()):
            t0 = time.perf_counter()
            sigma = ebn0_to_sigma(float(ebn0), rate)
            sent = errs = bits = 0
            done = False
            next_start = 0
            pending = []
            depth = 2 * cfg.n_workers
            while not done:
                while len(pending) < depth and next_start < cfg.f_max:
                    count = min(cfg.chunk, cfg.f_max - next_start)
                    args = (k, sigma, next_start, count)
                    pending.append(pool.submit(_decode_chunk, *args) if pool else args)
                    next_start += count
                if not pending:
                    break
                head = pending.pop(0)
                start, bit_err = head.result() if pool else _decode_chunk(*head)
                fe = np.cumsum(bit_err > 0)
                need = cfg.e_min - errs
                hit = np.searchsorted(fe, need)  # first frame where the count reaches e_min
                take = len(bit_err) if hit >= len(bit_err) else hit + 1
                sent += take
                errs += int(fe[take - 1]) if take else 0
                bits += int(bit_err[:take].sum())
                done = errs >= cfg.e_min or sent >= cfg.f_max
                if stop.flag:
                    truncated = True
                    break
            for f in pending:
                if pool:
                    f.cancel()
            rec = FerRecord(code_id, desc, float(ebn0), int(sent), int(errs), int(bits),
                            errs / sent if sent else 0.0, bits / (sent * G.n) if sent else 0.0,
                            time.perf_counter() - t0, cfg.master_seed)
            records.append(rec)
            if progress:
                progress(rec)
            if truncated:
                break
    except KeyboardInterrupt:
        truncated = True
    finally:
        if pool:
            pool.shutdown(cancel_futures=True)
        if old is not None:
            signal.signal(signal.SIGTERM, old)
    result = SweepResult(records, truncated, cfg.digest())
    if cfg.out:
        write_csv(records, cfg.out, cfg.timing_in_csv)
    if cfg.manifest or cfg.out:
        write_manifest(cfg, result, cfg.manifest or str(Path(cfg.out).with_suffix(".manifest.json")))
    return result


def measure_fer(dec, G: TannerGraph, ebn0_db: float, e_min: int = 100, f_max: int = 100_000,
                master_seed: int = 0, stream: int = 0, chunk: int = 2000, code_id: str = "",
                desc: str = "") -> FerRecord:
    """One in-process sweep point with the same stop rule and noise streams as run_fer_sweep."""
    sigma = ebn0_to_sigma(float(ebn0_db), G.H.rate)
    t0 = time.perf_counter()
    sent = errs = bits = 0
    while sent < f_max and errs < e_min:
        count = min(chunk, f_max - sent)
        bit_err = dec.decode(llr_block(G.n, sigma, master_seed, range(sent, sent + count), stream)).hard_bits.sum(1)
        fe = np.cumsum(bit_err > 0)
        hit = np.searchsorted(fe, e_min - errs)
        take = count if hit >= count else int(hit) + 1
        errs += int(fe[take - 1])
        bits += int(bit_err[:take].sum())
        sent += take
    return FerRecord(code_id, desc, float(ebn0_db), sent, errs, bits, errs / sent, bits / (sent * G.n),
                     time.perf_counter() - t0, master_seed)


def _main_thread() -> bool:
    import threading
    return threading.current_thread() is threading.main_thread()


# -------------------------------------------------------------------- I/O

CSV_COLUMNS = [f.name for f in fields(FerRecord)]


def records_to_csv(records, timing: bool = False) -> str:
    """CSV text; wall_seconds is left empty unless ``timing`` so reruns match byte for byte."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        row = asdict(r)
        row["wall_seconds"] = repr(r.wall_seconds) if timing else ""
        for k in ("ebn0_db", "fer", "ber"):
            row[k] = repr(float(row[k]))
        w.writerow([row[c] for c in CSV_COLUMNS])
    return buf.getvalue()


def write_csv(records, path, timing: bool = False) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(records_to_csv(records, timing))


def read_csv(path) -> list[FerRecord]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(FerRecord(row["code_id"], row["decoder"], float(row["ebn0_db"]), int(row["frames_sent"]),
                                 int(row["frame_errors"]), int(row["bit_errors"]), float(row["fer"]),
                                 float(row["ber"]), float(row["wall_seconds"] or "nan"), int(row["master_seed"])))
    return out


def write_manifest(cfg: SweepConfig, result: SweepResult, path) -> None:
    from . import __version__
    d = {"config": cfg.to_dict(), "config_sha256": result.digest, "truncated": result.truncated,
         "package_version": __version__,
         "points": [{"ebn0_db": r.ebn0_db, "wall_seconds": r.wall_seconds, "wilson95": list(r.wilson())}
                    for r in result.records]}
    with open(path, "w") as fh:
        json.dump(d, fh, indent=1)
        fh.write("\n")
