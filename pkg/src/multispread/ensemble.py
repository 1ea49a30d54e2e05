"""Many independent runs of one model, optionally across worker processes.

Run ``r`` always uses random stream ``(seed, r)``, so results do not depend on
the worker count or on scheduling order.
"""
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .engine import Simulation
from .observables import counts_on_grid, write_log
from .oracle import OracleSimulation

ENGINES = {"fast": Simulation, "oracle": OracleSimulation}


@dataclass
class RunResult:
    run: int
    events: int
    final_counts: list
    final_time: float
    stop_reason: str
    wall_seconds: float
    loop_seconds: float
    digest: str
    series: object = None
    log: object = None

    @property
    def events_per_second(self):
        return self.events / self.loop_seconds if self.loop_seconds > 0 else float("nan")

    def summary(self):
        return {
            "run": self.run,
            "events": self.events,
            "final_counts": self.final_counts,
            "final_time": self.final_time,
            "stop_reason": self.stop_reason,
            "absorbed": self.stop_reason == "absorption",
            "wall_seconds": self.wall_seconds,
            "events_per_second": self.events_per_second,
            "log_digest": self.digest,
        }


def run_one(model, config, run, engine="fast", grid=None, log_dir=None, keep_log=False):
    t0 = time.perf_counter()
    sim = ENGINES[engine](model, config, run)
    t1 = time.perf_counter()
    log = sim.run()
    t2 = time.perf_counter()
    loop = getattr(sim, "loop_seconds", t2 - t1)
    if log_dir is not None:
        write_log(log, os.path.join(log_dir, f"run_{run:05d}.csv"))
    series = counts_on_grid(log, grid) if grid is not None else None
    return RunResult(
        run, len(log), log.final_counts().tolist(), log.final_time, log.stop_reason,
        t2 - t0, loop, log.digest(), series, log if keep_log else None,
    )


_WORKER = {}


def _init_worker(model, config, engine, grid, log_dir, keep_log):
    _WORKER.update(model=model, config=config, engine=engine, grid=grid, log_dir=log_dir, keep_log=keep_log)


def _work(run):
    w = _WORKER
    return run_one(w["model"], w["config"], run, w["engine"], w["grid"], w["log_dir"], w["keep_log"])


def run_ensemble(model, config, runs, *, engine="fast", jobs=1, grid=None, log_dir=None, keep_log=False,
                 first_run=0):
    """Execute runs ``first_run .. first_run + runs - 1``; results come back in run order."""
    if runs < 1:
        raise ValueError("runs must be at least 1")
    if engine not in ENGINES:
        raise ValueError(f"engine must be one of {sorted(ENGINES)}")
    if grid is not None:
        grid = np.asarray(grid, dtype=np.float64)
    indices = range(first_run, first_run + runs)
    if jobs <= 1 or runs == 1:
        return [run_one(model, config, r, engine, grid, log_dir, keep_log) for r in indices]
    with ProcessPoolExecutor(
        max_workers=jobs, initializer=_init_worker, initargs=(model, config, engine, grid, log_dir, keep_log)
    ) as pool:
        return list(pool.map(_work, indices, chunksize=max(1, runs // (4 * jobs))))
