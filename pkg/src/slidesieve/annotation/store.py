"""SQLite-backed annotation store and task queue.

Single-file, WAL-enabled; sized for a one-annotator tool. All mutations
serialize through one writer lock, reads see committed snapshots.
Re-annotation is an upsert that bumps the revision; history is retained.
"""
from __future__ import annotations

import json
import sqlite3
import threading
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from ..labels import CATEGORY_NAMES, ImpurityLabelSet, N_CATEGORIES
from ..manifest import ManifestEntry

DEFAULT_LEASE_SECONDS = 300.0


class AnnotationError(Exception):
    pass


class UnknownImage(AnnotationError):
    pass


class EmptySubset(AnnotationError):
    pass


class EmptyLabels(AnnotationError):
    pass


@dataclass(frozen=True)
class AnnotationRecord:
    image_id: str
    flags: tuple[bool, ...]
    annotator: str
    timestamp: str  # ISO-8601 UTC
    revision: int


_SCHEMA = """
CREATE TABLE IF NOT EXISTS queue (
    image_id TEXT PRIMARY KEY,
    position INTEGER NOT NULL,
    image_path TEXT NOT NULL,
    leased_until REAL
);
CREATE TABLE IF NOT EXISTS annotations (
    image_id TEXT NOT NULL,
    revision INTEGER NOT NULL,
    flags TEXT NOT NULL,
    annotator TEXT NOT NULL,
    timestamp TEXT NOT NULL,
    PRIMARY KEY (image_id, revision)
);
"""


class AnnotationStore:
    def __init__(self, db_path: str | Path):
        self.db_path = str(db_path)
        self._lock = threading.Lock()
        self._conn = sqlite3.connect(self.db_path, check_same_thread=False)
        self._conn.execute("PRAGMA journal_mode=WAL")
        self._conn.executescript(_SCHEMA)
        self._conn.commit()

    def close(self) -> None:
        self._conn.close()

    # -- queue ---------------------------------------------------------------

    def create_queue(self, subset: list[ManifestEntry], seed: int) -> None:
        """Fill the queue with the subset ids in seeded-shuffle order."""
        if not subset:
            raise EmptySubset("annotation subset is empty")
        by_id = {e.image_id: e for e in subset}
        ordered = sorted(by_id)
        rng = np.random.Generator(np.random.Philox(key=seed))
        perm = rng.permutation(len(ordered))
        with self._lock:
            self._conn.execute("DELETE FROM queue")
            for pos, idx in enumerate(perm):
                image_id = ordered[idx]
                self._conn.execute(
                    "INSERT INTO queue (image_id, position, image_path) VALUES (?, ?, ?)",
                    (image_id, pos, by_id[image_id].image_path),
                )
            self._conn.commit()

    def next_task(self, lease_seconds: float = DEFAULT_LEASE_SECONDS) -> tuple[str, str] | None:
        """Lease the next pending image; concurrent callers get distinct ids."""
        now = time.time()
        with self._lock:
            row = self._conn.execute(
                """
                SELECT q.image_id, q.image_path FROM queue q
                WHERE q.image_id NOT IN (SELECT DISTINCT image_id FROM annotations)
                  AND (q.leased_until IS NULL OR q.leased_until < ?)
                ORDER BY q.position LIMIT 1
                """,
                (now,),
            ).fetchone()
            if row is None:
                return None
            self._conn.execute(
                "UPDATE queue SET leased_until = ? WHERE image_id = ?",
                (now + lease_seconds, row[0]),
            )
            self._conn.commit()
            return row[0], row[1]

    def image_path(self, image_id: str) -> str:
        row = self._conn.execute("SELECT image_path FROM queue WHERE image_id = ?", (image_id,)).fetchone()
        if row is None:
            raise UnknownImage(image_id)
        return row[0]

    def progress(self) -> tuple[int, int]:
        done = self._conn.execute(
            "SELECT COUNT(*) FROM queue WHERE image_id IN (SELECT DISTINCT image_id FROM annotations)"
        ).fetchone()[0]
        total = self._conn.execute("SELECT COUNT(*) FROM queue").fetchone()[0]
        return done, total

    # -- annotations ---------------------------------------------------------

    def record_annotation(self, image_id: str, flags: list[bool], annotator: str) -> AnnotationRecord:
        if len(flags) != N_CATEGORIES:
            raise AnnotationError(f"expected {N_CATEGORIES} flags, got {len(flags)}")
        with self._lock:
            known = self._conn.execute(
                "SELECT 1 FROM queue WHERE image_id = ?", (image_id,)
            ).fetchone()
            if known is None:
                raise UnknownImage(image_id)
            prev = self._conn.execute(
                "SELECT MAX(revision) FROM annotations WHERE image_id = ?", (image_id,)
            ).fetchone()[0]
            revision = (prev or 0) + 1
            timestamp = datetime.now(timezone.utc).isoformat()
            self._conn.execute(
                "INSERT INTO annotations (image_id, revision, flags, annotator, timestamp) VALUES (?, ?, ?, ?, ?)",
                (image_id, revision, json.dumps([bool(f) for f in flags]), annotator, timestamp),
            )
            self._conn.execute("UPDATE queue SET leased_until = NULL WHERE image_id = ?", (image_id,))
            self._conn.commit()
        return AnnotationRecord(image_id, tuple(bool(f) for f in flags), annotator, timestamp, revision)

    def current_records(self) -> list[AnnotationRecord]:
        rows = self._conn.execute(
            """
            SELECT a.image_id, a.flags, a.annotator, a.timestamp, a.revision FROM annotations a
            JOIN (SELECT image_id, MAX(revision) AS rev FROM annotations GROUP BY image_id) m
              ON a.image_id = m.image_id AND a.revision = m.rev
            ORDER BY a.image_id
            """
        ).fetchall()
        return [
            AnnotationRecord(r[0], tuple(json.loads(r[1])), r[2], r[3], r[4]) for r in rows
        ]

    def export_labels(self) -> str:
        """Labels JSONL, one line per current record, sorted by image_id."""
        lines = [
            json.dumps({"image_id": r.image_id, "flags": list(r.flags)})
            for r in self.current_records()
        ]
        return "".join(line + "\n" for line in lines)


def compute_prevalence(labels: dict[str, ImpurityLabelSet]) -> dict[str, float]:
    """Per-category prevalence plus the any-impurity fraction."""
    if not labels:
        raise EmptyLabels("no labels to summarize")
    n = len(labels)
    out = {}
    for i, name in enumerate(CATEGORY_NAMES):
        out[name] = sum(1 for ls in labels.values() if ls.flags[i]) / n
    out["any"] = sum(1 for ls in labels.values() if ls.any) / n
    return out
