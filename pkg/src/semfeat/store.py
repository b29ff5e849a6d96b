"""Crash-safe session persistence: append-only event logs plus snapshots.

Each session owns a directory holding ``events.jsonl`` (one event per line,
fsynced before the caller acknowledges the mutation) and an optional
``snapshot.json`` written every few events. Recovery loads the snapshot if
present and replays the event tail; a half-written final line (crash during
append) is ignored because it was never acknowledged.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

from .corpus import Corpus
from .errors import NotFoundError
from .teach import Event, TeachingSession


class SessionStore:
    def __init__(self, data_dir, snapshot_every: int = 25):
        self.data_dir = Path(data_dir)
        self.snapshot_every = snapshot_every
        (self.data_dir / "sessions").mkdir(parents=True, exist_ok=True)

    def _session_dir(self, session_id: str) -> Path:
        return self.data_dir / "sessions" / session_id

    def _events_path(self, session_id: str) -> Path:
        return self._session_dir(session_id) / "events.jsonl"

    def _snapshot_path(self, session_id: str) -> Path:
        return self._session_dir(session_id) / "snapshot.json"

    def list_ids(self) -> list[str]:
        root = self.data_dir / "sessions"
        return sorted(p.name for p in root.iterdir()
                      if (p / "events.jsonl").exists())

    def exists(self, session_id: str) -> bool:
        return self._events_path(session_id).exists()

    def append_event(self, session_id: str, event: Event) -> None:
        """Durably append one event; returns only after fsync."""
        path = self._events_path(session_id)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event.to_json(), ensure_ascii=False) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def write_snapshot(self, session: TeachingSession) -> None:
        path = self._snapshot_path(session.id)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".json.tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(session.snapshot(), fh, ensure_ascii=False)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)

    def maybe_snapshot(self, session: TeachingSession) -> None:
        if len(session.events) % self.snapshot_every == 0:
            self.write_snapshot(session)

    def read_events(self, session_id: str) -> list[Event]:
        path = self._events_path(session_id)
        if not path.exists():
            raise NotFoundError(f"unknown session {session_id!r}", code="unknown_session")
        events = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                try:
                    events.append(Event.from_json(json.loads(line)))
                except (json.JSONDecodeError, KeyError):
                    # torn tail write from a crash; the mutation was never
                    # acknowledged, so dropping it is correct
                    break
        return events

    def load(self, session_id: str, corpus: Corpus) -> TeachingSession:
        """Recover a session: snapshot plus event tail, or full replay."""
        events = self.read_events(session_id)
        snap_path = self._snapshot_path(session_id)
        if snap_path.exists():
            try:
                with open(snap_path, encoding="utf-8") as fh:
                    snap = json.load(fh)
                session = TeachingSession.from_snapshot(corpus, snap)
                last_seq = session.events[-1].seq
                for event in events:
                    if event.seq > last_seq:
                        session._apply(event)
                if not events or session.events[-1].seq >= events[-1].seq:
                    return session
            except (json.JSONDecodeError, KeyError):
                pass  # corrupt snapshot; fall back to full replay
        if not events:
            # the file exists but no event survived: the create was never
            # acknowledged, so the session effectively does not exist
            raise NotFoundError(f"unknown session {session_id!r}", code="unknown_session")
        return TeachingSession.replay(corpus, events)
