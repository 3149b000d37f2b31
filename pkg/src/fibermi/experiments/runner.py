"""Sweep execution: channel generation and estimation per operating point."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import multiprocessing as mp
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass, fields
from pathlib import Path

from fibermi import channels
from fibermi.estimators import estimate
from fibermi.experiments.spec import ExperimentSpec
from fibermi.numerics import RandomStream, awgn_capacity, db_to_lin, dbm_to_watt, half_gaussian_bound, lin_to_db

log = logging.getLogger(__name__)

_STREAM_STRIDE = 1 << 20  # stream id = input index * stride + point index


@dataclass
class ResultRow:
    """One (operating point, input, estimator) result. Field order is the CSV schema."""

    experiment: str
    preset: str
    input: str
    variable: str
    point: float
    power_dbm: float
    snr_db: float
    estimator: str
    method: str
    k: int | None
    p: int | None
    m: int | None
    block: int
    mi_bits: float
    stderr: float
    awgn_capacity: float
    half_gaussian_bound: float
    n: int
    n_used: int | None
    seed: int
    wall_time: float | None
    status: str
    diagnostics: str


CSV_COLUMNS = tuple(f.name for f in fields(ResultRow))
_INT_COLUMNS = {"k", "p", "m", "block", "n", "n_used", "seed"}
_FLOAT_COLUMNS = {"point", "power_dbm", "snr_db", "mi_bits", "stderr", "awgn_capacity",
                  "half_gaussian_bound", "wall_time"}


def _references(snr: float, streams: int):
    cap = streams * float(awgn_capacity(snr))
    hg = streams * float(half_gaussian_bound(snr)) if snr > 0 else float("nan")
    return cap, hg


def _channel_run(spec: ExperimentSpec, inp, point: float, stream: RandomStream):
    """Returns {block: ChannelRun}, the power in dBm and the number of complex streams."""
    ch, prm, n = spec.channel, spec.params, spec.n
    if ch == "awgn":
        return {1: channels.awgn_channel(inp, db_to_lin(point), n, stream)}, float("nan"), 1
    if ch == "mimo2x2":
        run = channels.mimo2x2_channel(inp, db_to_lin(prm["snr_db"]), point, n, stream)
        return {1: run}, float("nan"), 2
    if ch == "zero-dispersion":
        p = inp.with_power(dbm_to_watt(point))
        return {1: channels.zero_dispersion_link(p, spec.link, n, stream)}, point, 1
    if ch == "dispersive":
        p = inp.with_power(dbm_to_watt(prm["power_dbm"]))
        link = spec.link.with_spans(int(point))
        runs = channels.dispersive_link(p, link, n, spec.block_sizes, stream,
                                        int(prm["oversampling"]), float(prm["rolloff"]))
        return {r.meta["block"]: r for r in runs}, float(prm["power_dbm"]), 1
    p = inp.with_power(dbm_to_watt(point))
    run = channels.realistic_link(p, spec.link, n, stream, int(prm["oversampling"]), float(prm["rolloff"]),
                                  float(prm["step_km"]), prm.get("dbp_step_km"))
    return {1: run}, point, 1


def _diag_text(d: dict) -> str:
    return json.dumps(d, sort_keys=True, separators=(",", ":"), default=float)


def run_point(spec: ExperimentSpec, input_index: int, point_index: int) -> list:
    """All estimator rows for one (input, sweep point)."""
    inp = spec.inputs[input_index]
    point = spec.sweep.values[point_index]
    stream = RandomStream(spec.seed, input_index * _STREAM_STRIDE + point_index)
    rows = []
    try:
        runs, power_dbm, streams = _channel_run(spec, inp, point, stream)
        first = next(iter(runs.values()))
        snr = first.snr_reference
        channel_error = None
    except Exception as exc:  # recorded per row, the sweep goes on
        log.warning("%s: channel failed at %s=%g: %s", spec.name, spec.sweep.variable, point, exc)
        runs, power_dbm, streams, snr = {}, float("nan"), 1, float("nan")
        channel_error = f"error: {type(exc).__name__}: {exc}"
    cap, hg = _references(snr, streams) if math.isfinite(snr) else (float("nan"), float("nan"))
    snr_db = lin_to_db(snr) if math.isfinite(snr) and snr > 0 else float("nan")
    for cfg in spec.estimators:
        t0 = time.perf_counter()
        value = se = float("nan")
        n_used = None
        diag = {}
        status = channel_error or "ok"
        if channel_error is None:
            run = runs[cfg.block]
            try:
                res = estimate(cfg, run.x, run.y, labels=run.labels, constellation=run.constellation)
                value, se, n_used, diag = res.value, res.stderr, res.n_used, res.diagnostics
            except Exception as exc:
                log.warning("%s: %s failed at %s=%g: %s", spec.name, cfg.label, spec.sweep.variable, point, exc)
                status = f"error: {type(exc).__name__}: {exc}"
        knn = cfg.method != "glb"
        lg = cfg.method == "local-gaussian"
        n_eff = spec.n - (cfg.block - 1)
        rows.append(ResultRow(
            experiment=spec.name, preset=spec.preset, input=inp.label,
            variable=spec.sweep.variable, point=float(point), power_dbm=float(power_dbm),
            snr_db=float(snr_db), estimator=cfg.label, method=cfg.method,
            k=cfg.k if knn else None, p=cfg.resolved_p(n_eff) if lg else None,
            m=cfg.integration_samples if lg else None, block=cfg.block,
            mi_bits=float(value), stderr=float(se), awgn_capacity=cap, half_gaussian_bound=hg,
            n=n_eff, n_used=n_used, seed=spec.seed,
            wall_time=(time.perf_counter() - t0) if spec.record_wall_time else None,
            status=status, diagnostics=_diag_text(diag)))
    return rows


def _task(args):
    spec, i, j = args
    return run_point(spec, i, j)


def default_workers() -> int:
    try:
        return max(1, len(os.sched_getaffinity(0)))
    except AttributeError:  # pragma: no cover
        return max(1, os.cpu_count() or 1)


def sort_key(spec: ExperimentSpec):
    est_order = {e.label: i for i, e in enumerate(spec.estimators)}
    in_order = {inp.label: i for i, inp in enumerate(spec.inputs)}
    return lambda r: (r.point, in_order[r.input], est_order[r.estimator])


def run(spec: ExperimentSpec, workers: int | None = None) -> list:
    """Execute every sweep point; rows come back sorted by (point, input, estimator)."""
    workers = default_workers() if workers is None else int(workers)
    if workers < 1:
        raise ValueError("workers must be >= 1")
    tasks = [(spec, i, j) for i in range(len(spec.inputs)) for j in range(len(spec.sweep.values))]
    rows = []
    if workers == 1 or len(tasks) == 1:
        for t in tasks:
            rows.extend(_task(t))
    else:
        ctx = mp.get_context("spawn")
        with ProcessPoolExecutor(max_workers=min(workers, len(tasks)), mp_context=ctx) as pool:
            for part in pool.map(_task, tasks):
                rows.extend(part)
    rows.sort(key=sort_key(spec))
    return rows


# ------------------------------------------------------------------ CSV I/O

def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([_cell(v) for v in astuple(r)])
    return buf.getvalue()


def atomic_write(path, data, mode="w"):
    """Write to a temporary sibling, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, mode, **({"encoding": "utf-8", "newline": ""} if "b" not in mode else {})) as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(rows, path):
    atomic_write(path, rows_to_csv(rows))


def _parse_cell(name, text):
    if name in _INT_COLUMNS:
        return None if text == "" else int(text)
    if name in _FLOAT_COLUMNS:
        return None if text == "" else float(text)
    return text


def read_csv(path) -> list:
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or tuple(header) != CSV_COLUMNS:
            raise ValueError(f"{path}: not a results file (unexpected header)")
        return [ResultRow(*(_parse_cell(c, t) for c, t in zip(CSV_COLUMNS, rec))) for rec in reader]
