"""
SQLite run ledger for solve sweeps.

Stores one JSON payload per (config digest, seed, base) so `solve --resume`
can skip runs that were already computed under an identical configuration.
Runs are deterministic, so a stored payload is exactly what a rerun yields.
"""

import json
import logging
import sqlite3
import threading
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

logger = logging.getLogger(__name__)

_local = threading.local()
_init_lock = threading.Lock()
_initialised = set()


def _get_conn(db_path) -> sqlite3.Connection:
    """Return a thread-local SQLite connection for db_path (created lazily)."""
    conns = getattr(_local, "conns", None)
    if conns is None:
        conns = _local.conns = {}
    key = str(db_path)
    conn = conns.get(key)
    if conn is None:
        Path(key).parent.mkdir(parents=True, exist_ok=True)
        conn = sqlite3.connect(key, check_same_thread=False)
        conn.execute("PRAGMA journal_mode=WAL")
        conns[key] = conn
    return conn


def init_db(db_path):
    """Create the runs table if it doesn't exist."""
    key = str(db_path)
    with _init_lock:
        if key in _initialised and Path(key).exists():
            return
        conn = _get_conn(key)
        conn.execute("""
            CREATE TABLE IF NOT EXISTS runs (
                config_digest  TEXT    NOT NULL,
                seed           INTEGER NOT NULL,
                base           INTEGER NOT NULL,
                payload_json   TEXT    NOT NULL,
                updated_at     TEXT    NOT NULL,
                PRIMARY KEY (config_digest, seed, base)
            )
        """)
        conn.commit()
        _initialised.add(key)


def read_run(db_path, digest: str, seed: int, base: int) -> Optional[dict]:
    """Return the stored payload for one run, or None."""
    try:
        init_db(db_path)
        row = _get_conn(db_path).execute(
            "SELECT payload_json FROM runs WHERE config_digest = ? AND seed = ? AND base = ?",
            (digest, seed, base),
        ).fetchone()
        if row:
            return json.loads(row[0])
    except Exception as e:
        logger.error(f"Error reading run {digest}/{seed}/{base} from store: {e}")
    return None


def write_run(db_path, digest: str, seed: int, base: int, payload: dict) -> bool:
    """Upsert one run payload."""
    try:
        init_db(db_path)
        conn = _get_conn(db_path)
        now = datetime.now(timezone.utc).isoformat()
        conn.execute(
            """INSERT INTO runs (config_digest, seed, base, payload_json, updated_at)
               VALUES (?, ?, ?, ?, ?)
               ON CONFLICT(config_digest, seed, base) DO UPDATE SET
                   payload_json=excluded.payload_json,
                   updated_at=excluded.updated_at""",
            (digest, seed, base, json.dumps(payload), now),
        )
        conn.commit()
        return True
    except Exception as e:
        logger.error(f"Error writing run {digest}/{seed}/{base} to store: {e}")
        return False


def count_runs(db_path, digest: str) -> int:
    try:
        init_db(db_path)
        row = _get_conn(db_path).execute(
            "SELECT COUNT(*) FROM runs WHERE config_digest = ?", (digest,)
        ).fetchone()
        return int(row[0])
    except Exception:
        return 0
