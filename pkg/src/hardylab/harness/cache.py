"""Content-addressed on-disk cache.

Layout under the root: ``tasks/<hash>.json`` for task results,
``clouds/<hash>.bin`` for point clouds, ``whitney/<hash>.bin`` for
decompositions and ``refs/<report id>.json`` listing the entries a written
report depends on.
"""

import hashlib
import json
import logging
import os
from pathlib import Path

log = logging.getLogger(__name__)

KINDS = ("tasks", "clouds", "whitney")


def default_root():
    env = os.environ.get("HARDYLAB_CACHE")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "hardylab"


def content_hash(obj):
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


class Cache:
    def __init__(self, root=None, enabled=True):
        self.root = Path(root) if root is not None else default_root()
        self.enabled = enabled
        self.used = set()

    def _path(self, kind, key):
        return self.root / kind / f"{key}.json"

    def get_task(self, key):
        if not self.enabled:
            return None
        p = self._path("tasks", key)
        if p.exists():
            self.used.add(f"tasks/{key}.json")
            return json.loads(p.read_text())
        return None

    def put_task(self, key, result):
        if not self.enabled:
            return
        p = self._path("tasks", key)
        p.parent.mkdir(parents=True, exist_ok=True)
        tmp = p.with_suffix(".tmp")
        tmp.write_text(json.dumps(result, sort_keys=True))
        tmp.replace(p)
        self.used.add(f"tasks/{key}.json")

    def note(self, relpath):
        self.used.add(str(relpath))

    def write_refs(self, report_id):
        if not self.enabled:
            return
        p = self.root / "refs" / f"{report_id}.json"
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(json.dumps(sorted(self.used), indent=1))


def _referenced(root, report_dirs=()):
    refs = set()
    for p in (Path(root) / "refs").glob("*.json"):
        refs.update(json.loads(p.read_text()))
    for d in report_dirs:
        for rep in Path(d).rglob("report.json"):
            prov = json.loads(rep.read_text()).get("provenance", {})
            refs.update(prov.get("cache_entries", []))
    return refs


def cache_gc(root=None, policy="unreferenced", report_dirs=()):
    """Delete cache entries and return the number of bytes freed.

    ``policy="unreferenced"`` removes entries no report refers to;
    ``policy="all"`` tries to remove everything but still keeps referenced
    entries, with a warning for each. Reports are found through the cache's
    own ``refs`` manifests and any ``report.json`` under ``report_dirs``.
    """
    if policy not in ("unreferenced", "all"):
        raise ValueError(f"unknown policy {policy!r}")
    root = Path(root) if root is not None else default_root()
    if not root.exists():
        return 0
    refs = _referenced(root, report_dirs)
    freed = 0
    for kind in KINDS:
        for p in sorted((root / kind).glob("*")):
            rel = f"{kind}/{p.name}"
            if rel in refs:
                if policy == "all":
                    log.warning("keeping %s: referenced by a report", rel)
                continue
            freed += p.stat().st_size
            p.unlink()
    return freed
