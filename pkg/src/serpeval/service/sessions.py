"""Judging sessions: per-user group cursor over a run.

Groups are ordered by (topic, query) with the engines shuffled once per
(user, run) — seeded from the ids, so a judge always sees the same order
— and the cursor only moves forward: a group left behind fully judged is
never offered again.
"""

from __future__ import annotations

import hashlib
import random
import threading
import time
import uuid
from dataclasses import dataclass, field

from ..corpus import RunManifest


@dataclass(frozen=True)
class GroupRef:
    index: int
    engine_id: str
    query_id: str
    topic_id: str

    @property
    def token(self) -> str:
        return f"g{self.index:03d}"


@dataclass
class Session:
    session_id: str
    user_id: str
    run_id: str
    cursor: int = 0
    opened_at: float = field(default_factory=time.time)
    closed_at: float | None = None


def group_order(manifest: RunManifest, user_id: str) -> list[GroupRef]:
    seed = int.from_bytes(
        hashlib.sha256(f"{user_id}:{manifest.run_id}".encode()).digest()[:8], "big"
    )
    engines = list(manifest.engines)
    random.Random(seed).shuffle(engines)
    refs = []
    index = 0
    for topic in manifest.topics:
        for query in manifest.queries_for_topic(topic.id):
            for engine_id in engines:
                refs.append(
                    GroupRef(index=index, engine_id=engine_id,
                             query_id=query.id, topic_id=topic.id)
                )
                index += 1
    return refs


class SessionManager:
    """One open session per (user, run); thread-safe cursor advancement."""

    def __init__(self) -> None:
        self._sessions: dict[tuple[str, str], Session] = {}
        self._lock = threading.Lock()

    def open(self, user_id: str, run_id: str) -> Session:
        with self._lock:
            key = (user_id, run_id)
            session = self._sessions.get(key)
            if session is None or session.closed_at is not None:
                session = Session(
                    session_id=uuid.uuid4().hex[:12], user_id=user_id, run_id=run_id
                )
                self._sessions[key] = session
            return session

    def current(self, user_id: str, run_id: str) -> Session | None:
        with self._lock:
            return self._sessions.get((user_id, run_id))

    def advance(
        self,
        session: Session,
        order: list[GroupRef],
        fully_judged: set[int],
    ) -> GroupRef | None:
        """Move to the first unjudged group at or after the cursor."""
        with self._lock:
            for ref in order[session.cursor:]:
                if ref.index not in fully_judged:
                    session.cursor = ref.index
                    return ref
            session.closed_at = time.time()
            return None
