"""Factorial experiment runner producing a flat CSV ledger.

A plan is a JSON document mirroring the generator parameters::

    {
      "n": [10],
      "k": 3,
      "m1": [9, 21],
      "m": {"start": 1, "stop": 40},
      "instances_per_cell": 30,
      "master_seed": 1,
      "solvers": ["bnb", "rots"],
      "workers": 1
    }

Integer axes accept a list or an inclusive ``{"start", "stop", "step"}``
range.  Optional keys: ``ledger``, ``instance_dir`` (also write every
instance), ``node_cap``, ``record_timing``, ``rots`` (``runs``,
``max_iterations``, ``seed``).

The ledger is append-only while running and keyed by
(n, m1, m, replicate); rerunning skips rows already present.  On
completion it is rewritten sorted by key, so its bytes do not depend on the
worker count or completion order.  ``bnb_seconds`` is only filled when
``record_timing`` is set, since timings break byte reproducibility.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import multiprocessing as mp
import os
from dataclasses import dataclass, field
from pathlib import Path

from .core import is_satisfied
from .errors import ContractError
from .exact import branch_and_bound, enumerate_min
from .generator import GeneratorConfig, cell_seed, generate, instance_stem
from .rots import RotsConfig, rots_runs, summarize

log = logging.getLogger(__name__)

LEDGER_FIELDS = [
    "n", "k", "m", "m1", "replicate", "seed",
    "minimum", "global_lower_bound", "satisfied", "proven",
    "exact_method", "bnb_nodes", "bnb_lap_calls", "bnb_seconds",
    "rots_success_rate", "rots_mean_iterations", "error",
]
KEY = ("n", "m1", "m", "replicate")
SOLVERS = {"bnb", "enum", "rots"}


def _axis(value, name):
    if isinstance(value, dict):
        try:
            start, stop = int(value["start"]), int(value["stop"])
        except KeyError as exc:
            raise ContractError(f"range for {name} needs start and stop") from exc
        step = int(value.get("step", 1))
        if step <= 0:
            raise ContractError(f"step for {name} must be positive")
        return list(range(start, stop + 1, step))
    if isinstance(value, int):
        return [value]
    return [int(v) for v in value]


@dataclass
class ExperimentPlan:
    n: list
    m1: list
    m: list
    instances_per_cell: int = 1
    master_seed: int = 0
    k: int = 3
    solvers: list = field(default_factory=lambda: ["bnb"])
    workers: int = 1
    ledger: Path | None = None
    instance_dir: Path | None = None
    node_cap: int | None = None
    record_timing: bool = False
    rots_runs: int = 30
    rots_max_iterations: int = 1000
    rots_seed: int = 0

    def __post_init__(self):
        self.n, self.m1, self.m = (_axis(self.n, "n"), _axis(self.m1, "m1"), _axis(self.m, "m"))
        if not (self.n and self.m1 and self.m):
            raise ContractError("plan grid is empty")
        if self.instances_per_cell < 1:
            raise ContractError("instances_per_cell must be >= 1")
        unknown = set(self.solvers) - SOLVERS
        if unknown:
            raise ContractError(f"unknown solvers {sorted(unknown)}")
        if "bnb" in self.solvers and "enum" in self.solvers:
            raise ContractError("choose one exact solver: bnb or enum")
        if self.workers < 1:
            raise ContractError("workers must be >= 1")
        if self.ledger is not None:
            self.ledger = Path(self.ledger)
        if self.instance_dir is not None:
            self.instance_dir = Path(self.instance_dir)

    @property
    def exact_method(self) -> str:
        return "enum" if "enum" in self.solvers else "bnb"

    def cells(self):
        return [(n, m1, m) for n in self.n for m1 in self.m1 for m in self.m]

    def tasks(self):
        for n, m1, m in self.cells():
            for rep in range(self.instances_per_cell):
                yield {"n": n, "k": self.k, "m1": m1, "m": m, "replicate": rep,
                       "seed": cell_seed(self.master_seed, n, m1, m, rep)}

    @classmethod
    def from_dict(cls, doc: dict, base_dir=None) -> "ExperimentPlan":
        doc = dict(doc)
        rots = doc.pop("rots", {}) or {}
        kwargs = {key: doc[key] for key in (
            "n", "m1", "m", "instances_per_cell", "master_seed", "k", "solvers", "workers",
            "node_cap", "record_timing") if key in doc}
        for key in ("ledger", "instance_dir"):
            if doc.get(key) is not None:
                p = Path(doc[key])
                kwargs[key] = p if p.is_absolute() or base_dir is None else Path(base_dir) / p
        for src, dst in (("runs", "rots_runs"), ("max_iterations", "rots_max_iterations"),
                         ("seed", "rots_seed")):
            if src in rots:
                kwargs[dst] = int(rots[src])
        extra = set(doc) - set(kwargs) - {"ledger", "instance_dir"}
        if extra:
            raise ContractError(f"unknown plan keys {sorted(extra)}")
        missing = {"n", "m1", "m"} - set(kwargs)
        if missing:
            raise ContractError(f"plan lacks {sorted(missing)}")
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "ExperimentPlan":
        path = Path(path)
        with open(path, encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ContractError(f"{path}: invalid plan JSON: {exc}") from None
        return cls.from_dict(doc, base_dir=path.parent)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(round(v, 6))
    return str(v)


def solve_task(task: dict, plan: ExperimentPlan) -> dict:
    """Generate, solve and (optionally) tabu-search one instance; never raises."""
    row = {key: "" for key in LEDGER_FIELDS}
    row.update({key: task[key] for key in ("n", "k", "m", "m1", "replicate", "seed")})
    row["exact_method"] = plan.exact_method
    try:
        qs = generate(GeneratorConfig(n=task["n"], m=task["m"], m1=task["m1"],
                                      seed=task["seed"], k=task["k"]))
        if plan.instance_dir is not None:
            from .instance_io import InstanceFilePair, write_instance

            stem = instance_stem(task["n"], task["m1"], task["m"], task["replicate"])
            write_instance(qs, InstanceFilePair(plan.instance_dir / f"{stem}.dat",
                                                plan.instance_dir / f"{stem}.json"))
        row["global_lower_bound"] = qs.global_lower_bound
        if plan.exact_method == "enum":
            out = enumerate_min(qs, cap=max(qs.n, 11))
        else:
            out = branch_and_bound(qs, node_cap=plan.node_cap)
        row["minimum"] = out.minimum
        row["proven"] = out.proven
        row["bnb_nodes"] = out.nodes_expanded
        row["bnb_lap_calls"] = out.lap_calls
        if plan.record_timing:
            row["bnb_seconds"] = out.elapsed
        if out.proven:
            row["satisfied"] = is_satisfied(qs, out.minimum)
            if "rots" in plan.solvers:
                cfg = RotsConfig(max_iterations=plan.rots_max_iterations, runs=plan.rots_runs,
                                 seed=cell_seed(plan.rots_seed, task["n"], task["m1"], task["m"],
                                                task["replicate"]))
                rate, iters = summarize(rots_runs(qs, out.minimum, cfg), cfg.max_iterations)
                row["rots_success_rate"] = rate
                row["rots_mean_iterations"] = iters
    except Exception as exc:  # recorded in the ledger, the sweep continues
        log.warning("instance %s failed: %s", task, exc)
        row["error"] = f"{type(exc).__name__}: {exc}".replace("\n", " ")
    return {key: _fmt(v) for key, v in row.items()}


def _row_key(row: dict):
    return tuple(int(row[k]) for k in KEY)


def read_ledger(path) -> list[dict]:
    """Rows of a ledger file; a torn final line (no newline) is ignored."""
    path = Path(path)
    if not path.exists():
        return []
    text = path.read_text(encoding="utf-8")
    if text and not text.endswith("\n"):
        text = text[: text.rfind("\n") + 1]
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is not None and reader.fieldnames != LEDGER_FIELDS:
        raise ContractError(f"{path}: unexpected ledger header {reader.fieldnames}")
    return list(reader)


def _line(row: dict) -> str:
    buf = io.StringIO()
    csv.DictWriter(buf, LEDGER_FIELDS, lineterminator="\n").writerow(row)
    return buf.getvalue()


def write_ledger(path, rows):
    """Atomically write rows sorted by key."""
    path = Path(path)
    rows = sorted(rows, key=_row_key)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(LEDGER_FIELDS) + "\n")
        for row in rows:
            fh.write(_line(row))
    os.replace(tmp, path)


def _worker(args):
    task, plan = args
    return solve_task(task, plan)


def run_experiment(plan: ExperimentPlan, ledger=None) -> Path:
    """Run every pending (cell, replicate) of ``plan`` and return the ledger path."""
    ledger = Path(ledger or plan.ledger or "ledger.csv")
    ledger.parent.mkdir(parents=True, exist_ok=True)
    existing = read_ledger(ledger)
    done = {_row_key(r) for r in existing}
    # drop a torn tail before appending
    write_ledger(ledger, existing)
    pending = [t for t in plan.tasks() if _row_key(t) not in done]
    total = len(pending) + len(done)
    log.info("%d instances planned, %d already in %s", total, len(done), ledger)
    if pending:
        with open(ledger, "a", encoding="utf-8", newline="") as fh:
            if plan.workers == 1:
                results = (solve_task(t, plan) for t in pending)
                pool = None
            else:
                pool = mp.get_context("spawn").Pool(plan.workers)
                results = pool.imap_unordered(_worker, [(t, plan) for t in pending], chunksize=4)
            try:
                for count, row in enumerate(results, start=1):
                    fh.write(_line(row))
                    fh.flush()
                    if count % 100 == 0 or count == len(pending):
                        log.info("%d/%d instances solved", count, len(pending))
            finally:
                if pool is not None:
                    pool.close()
                    pool.join()
    write_ledger(ledger, read_ledger(ledger))
    return ledger


def configure_logging():
    level = os.environ.get("QAPSAT_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
