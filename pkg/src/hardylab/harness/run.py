"""Suite orchestration: plan, execute (cached, optionally in a process pool), judge, write."""

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import hardylab
from hardylab import kernels
from hardylab.harness import suites
from hardylab.harness.cache import Cache, content_hash
from hardylab.harness.config import config_hash
from hardylab.harness.report import Report, canonical, timestamp

log = logging.getLogger(__name__)


def task_key(task):
    return content_hash({"task": task, "version": hardylab.__version__})


def _work(args):
    task, root = args
    suites.set_cache_root(root)
    rec, entries = suites.execute(task)
    return canonical(rec), entries


def _init(root):
    suites.set_cache_root(root)


def run(cfg, cache=None, write=True):
    """Execute the suite named in a resolved config; returns the Report.

    Finished tasks are stored in the cache as they complete, so an
    interrupted run resumes where it stopped. Records are canonical JSON and
    sorted by task id, which makes them identical across cold and warm runs.
    """
    cache = cache if cache is not None else Cache()
    root = str(cache.root) if cache.enabled else None
    suites.set_cache_root(root)
    tasks = suites.plan(cfg)
    results = {}
    todo = []
    for t in tasks:
        hit = cache.get_task(task_key(t))
        if hit is not None:
            results[t["id"]] = hit["record"]
            for e in hit["entries"]:
                cache.note(e)
        else:
            todo.append(t)
    log.info("%s: %d task(s), %d cached", cfg["suite"], len(tasks), len(tasks) - len(todo))

    def done(t, rec, entries):
        results[t["id"]] = rec
        for e in entries:
            cache.note(e)
        cache.put_task(task_key(t), {"record": rec, "entries": entries})

    workers = int(cfg.get("workers", 1))
    if workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=workers, initializer=_init, initargs=(root,)) as pool:
            for t, (rec, entries) in zip(todo, pool.map(_work, [(t, root) for t in todo])):
                done(t, rec, entries)
    else:
        for t in todo:
            log.info("running %s", t["id"])
            done(t, *_work((t, root)))

    records = [results[t["id"]] for t in tasks]
    tol = cfg["tolerances"]
    chash = config_hash(cfg)
    report = Report(
        report_id=f"{cfg['suite']}-{chash[:12]}",
        suite=cfg["suite"],
        records=records,
        verdicts=suites.judge(cfg["suite"], records, tol),
        tolerances=tol,
        provenance={
            "config_hash": chash,
            "config": canonical(cfg),
            "cache_entries": sorted(cache.used),
            "version": hardylab.__version__,
            "backend": kernels.BACKEND,
            "timestamp": timestamp(),
            "pid": os.getpid(),
        },
    )
    if write:
        out = Path(cfg["out"]) / cfg["suite"]
        report.write(out)
        cache.write_refs(report.report_id)
    return report
