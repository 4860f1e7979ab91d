"""Single-file sqlite store for the API server.

Three tables: `assessments` and `population` cache serialized response
bodies keyed by model hash, so stale entries die with the checkpoint
that produced them; `events` is the append-only interaction log.  All
writes go through one connection guarded by a lock; reads share it.
"""

from __future__ import annotations

import json
import sqlite3
import threading
from pathlib import Path

_SCHEMA = """
CREATE TABLE IF NOT EXISTS assessments (
    patient_id TEXT NOT NULL,
    model_hash TEXT NOT NULL,
    top_k INTEGER NOT NULL,
    body TEXT NOT NULL,
    PRIMARY KEY (patient_id, model_hash, top_k)
);
CREATE TABLE IF NOT EXISTS population (
    feature TEXT NOT NULL,
    n INTEGER NOT NULL,
    seed INTEGER NOT NULL,
    model_hash TEXT NOT NULL,
    body TEXT NOT NULL,
    PRIMARY KEY (feature, n, seed, model_hash)
);
CREATE TABLE IF NOT EXISTS events (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    session_id TEXT NOT NULL,
    timestamp REAL NOT NULL,
    kind TEXT NOT NULL,
    payload TEXT NOT NULL
);
"""


class ServingStore:
    """Thread-safe cache plus event log backed by one sqlite file."""

    def __init__(self, path: str | Path = ":memory:"):
        self.path = str(path)
        self._lock = threading.Lock()
        self._conn = sqlite3.connect(self.path, check_same_thread=False)
        with self._lock:
            self._conn.executescript(_SCHEMA)
            self._conn.commit()

    def close(self):
        self._conn.close()

    # -- assessment cache ---------------------------------------------
    def get_assessment(self, patient_id: str, model_hash: str,
                       top_k: int) -> str | None:
        with self._lock:
            row = self._conn.execute(
                "SELECT body FROM assessments WHERE patient_id=? "
                "AND model_hash=? AND top_k=?",
                (patient_id, model_hash, top_k)).fetchone()
        return row[0] if row else None

    def put_assessment(self, patient_id: str, model_hash: str,
                       top_k: int, body: str):
        with self._lock:
            self._conn.execute(
                "INSERT OR REPLACE INTO assessments VALUES (?,?,?,?)",
                (patient_id, model_hash, top_k, body))
            self._conn.commit()

    # -- population cache ---------------------------------------------
    def get_population(self, feature: str, n: int, seed: int,
                       model_hash: str) -> str | None:
        with self._lock:
            row = self._conn.execute(
                "SELECT body FROM population WHERE feature=? AND n=? "
                "AND seed=? AND model_hash=?",
                (feature, n, seed, model_hash)).fetchone()
        return row[0] if row else None

    def put_population(self, feature: str, n: int, seed: int,
                       model_hash: str, body: str):
        with self._lock:
            self._conn.execute(
                "INSERT OR REPLACE INTO population VALUES (?,?,?,?,?)",
                (feature, n, seed, model_hash, body))
            self._conn.commit()

    # -- event log ----------------------------------------------------
    def append_event(self, session_id: str, timestamp: float, kind: str,
                     payload: dict) -> int:
        with self._lock:
            cur = self._conn.execute(
                "INSERT INTO events (session_id, timestamp, kind, payload) "
                "VALUES (?,?,?,?)",
                (session_id, timestamp, kind, json.dumps(payload)))
            self._conn.commit()
            return int(cur.lastrowid)

    def event_count(self, session_id: str | None = None,
                    kind: str | None = None) -> int:
        query = "SELECT COUNT(*) FROM events WHERE 1=1"
        args: list = []
        if session_id is not None:
            query += " AND session_id=?"
            args.append(session_id)
        if kind is not None:
            query += " AND kind=?"
            args.append(kind)
        with self._lock:
            return int(self._conn.execute(query, args).fetchone()[0])

    def export_events(self, session_id: str | None = None) -> list[dict]:
        query = ("SELECT session_id, timestamp, kind, payload FROM events")
        args: list = []
        if session_id is not None:
            query += " WHERE session_id=?"
            args.append(session_id)
        query += " ORDER BY timestamp, id"
        with self._lock:
            rows = self._conn.execute(query, args).fetchall()
        return [{"session_id": s, "timestamp": t, "kind": k,
                 "payload": json.loads(p)} for s, t, k, p in rows]
