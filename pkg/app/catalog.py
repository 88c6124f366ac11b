import json
import sqlite3
from datetime import datetime
from pathlib import Path
from typing import List, Optional


def init_catalog_db(catalog_db_path: str):
    """Initialize catalog database with runs table"""

    Path(catalog_db_path).parent.mkdir(parents=True, exist_ok=True)

    conn = sqlite3.connect(catalog_db_path)
    conn.execute("""
        CREATE TABLE IF NOT EXISTS runs (
            run_id INTEGER PRIMARY KEY AUTOINCREMENT,
            scenario VARCHAR(32) NOT NULL,
            filters VARCHAR(64) NOT NULL,
            seed INTEGER,
            status VARCHAR(16) NOT NULL,
            output_paths TEXT,  -- JSON array
            started_at TIMESTAMP,
            ended_at TIMESTAMP,
            duration_seconds REAL,
            error_message TEXT,
            created_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP
        )
    """)
    conn.commit()
    conn.close()


def record_run(catalog_db: str, scenario: str, filters: List[str], status: str,
               seed: Optional[int] = None,
               output_paths: Optional[List[str]] = None,
               started_at: Optional[datetime] = None,
               ended_at: Optional[datetime] = None,
               error_message: Optional[str] = None) -> int:
    """Record an experiment run in the catalog"""

    init_catalog_db(catalog_db)

    duration_seconds = None
    if started_at and ended_at:
        duration_seconds = (ended_at - started_at).total_seconds()

    conn = sqlite3.connect(catalog_db)
    cursor = conn.execute("""
        INSERT INTO runs (
            scenario, filters, seed, status, output_paths,
            started_at, ended_at, duration_seconds, error_message
        ) VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?)
    """, (
        scenario, ",".join(filters), seed, status, json.dumps(output_paths or []),
        started_at.isoformat() if started_at else None,
        ended_at.isoformat() if ended_at else None,
        duration_seconds, error_message,
    ))
    conn.commit()
    run_id = cursor.lastrowid
    conn.close()

    print(f"✓ Catalog updated - run_id: {run_id}, status: {status}")
    return run_id


def get_runs(catalog_db: str, scenario: Optional[str] = None, limit: int = 10) -> List[dict]:
    """Most recent runs, optionally for one scenario"""

    if not Path(catalog_db).exists():
        return []

    conn = sqlite3.connect(catalog_db)
    conn.row_factory = sqlite3.Row

    if scenario is None:
        cursor = conn.execute("SELECT * FROM runs ORDER BY run_id DESC LIMIT ?", (limit,))
    else:
        cursor = conn.execute(
            "SELECT * FROM runs WHERE scenario = ? ORDER BY run_id DESC LIMIT ?", (scenario, limit)
        )
    runs = [dict(row) for row in cursor.fetchall()]
    conn.close()

    for run in runs:
        run["output_paths"] = json.loads(run["output_paths"] or "[]")
        run["filters"] = run["filters"].split(",") if run["filters"] else []
    return runs
