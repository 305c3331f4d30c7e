"""User-context evaluation: profiles, 0-5 votes, R@k, rescoring.

Static context is the four-category profile captured at registration;
dynamic context is the user's append-only judgment history, replayed to
the current vote set (later votes on the same result overwrite earlier
ones). Votes feed the R@k aggregates and the judgment-driven rescoring
of formula weights.

Storage layout under ``<root>/contexts/``:

    <user_id>/static.json          profile record (salted password hash)
    <user_id>/judgments.ndjson     append-only vote log
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path


class JudgmentError(Exception):
    pass


class DuplicateEmailError(JudgmentError):
    pass


class WeakPasswordError(JudgmentError):
    pass


class UnknownUserError(JudgmentError):
    pass


class UnknownResultError(JudgmentError):
    pass


class VoteRangeError(JudgmentError):
    pass


MIN_PASSWORD_LENGTH = 8
_PBKDF2_ITERATIONS = 60_000


def hash_password(password: str, salt: bytes | None = None) -> str:
    salt = salt if salt is not None else os.urandom(16)
    digest = hashlib.pbkdf2_hmac("sha256", password.encode(), salt, _PBKDF2_ITERATIONS)
    return f"pbkdf2_sha256${_PBKDF2_ITERATIONS}${salt.hex()}${digest.hex()}"


def verify_password(password: str, stored: str) -> bool:
    try:
        _, iterations, salt_hex, digest_hex = stored.split("$")
        digest = hashlib.pbkdf2_hmac(
            "sha256", password.encode(), bytes.fromhex(salt_hex), int(iterations)
        )
        return digest.hex() == digest_hex
    except (ValueError, TypeError):
        return False


@dataclass
class StaticContext:
    """Four-category user profile; fields within a category may be empty."""

    user_id: str
    email: str
    password_hash: str
    name: str = ""
    country: str = ""
    language: str = ""
    domains: str = ""
    specialty: str = ""
    profession: str = ""
    study_level: str = ""
    created_at: float = field(default_factory=time.time)

    def to_json(self) -> dict:
        return {
            "user_id": self.user_id,
            "connection": {"email": self.email, "password_hash": self.password_hash},
            "personal": {"name": self.name, "country": self.country,
                         "language": self.language},
            "interests": {"domains": self.domains, "specialty": self.specialty},
            "competence": {"profession": self.profession,
                           "study_level": self.study_level},
            "created_at": self.created_at,
        }

    @classmethod
    def from_json(cls, data: dict) -> "StaticContext":
        return cls(
            user_id=data["user_id"],
            email=data["connection"]["email"],
            password_hash=data["connection"]["password_hash"],
            name=data["personal"].get("name", ""),
            country=data["personal"].get("country", ""),
            language=data["personal"].get("language", ""),
            domains=data["interests"].get("domains", ""),
            specialty=data["interests"].get("specialty", ""),
            profession=data["competence"].get("profession", ""),
            study_level=data["competence"].get("study_level", ""),
            created_at=data.get("created_at", 0.0),
        )


@dataclass(frozen=True)
class Judgment:
    user_id: str
    run_id: str
    engine_id: str
    query_id: str
    rank: int
    vote: int
    voted_at: float = field(default_factory=time.time)

    def __post_init__(self) -> None:
        if not isinstance(self.vote, int) or not 0 <= self.vote <= 5:
            raise VoteRangeError(f"vote must be an integer in [0, 5], got {self.vote!r}")

    def result_key(self) -> tuple[str, str, str, int]:
        return (self.run_id, self.engine_id, self.query_id, self.rank)


@dataclass
class DynamicContext:
    """One user's judgment history, oldest first, with its replayed state."""

    user_id: str
    history: list[Judgment] = field(default_factory=list)

    def current(self) -> dict[tuple[str, str, str, int], Judgment]:
        """Replay the history to the latest vote per result."""
        state: dict[tuple[str, str, str, int], Judgment] = {}
        for judgment in self.history:
            state[judgment.result_key()] = judgment
        return state

    def session_summaries(self) -> list[dict]:
        """Per-run activity summary, in order of first judgment."""
        summaries: dict[str, dict] = {}
        for judgment in self.history:
            summary = summaries.setdefault(
                judgment.run_id,
                {"run_id": judgment.run_id, "votes": 0,
                 "first_voted_at": judgment.voted_at, "last_voted_at": judgment.voted_at},
            )
            summary["votes"] += 1
            summary["last_voted_at"] = judgment.voted_at
        return list(summaries.values())


class ContextStore:
    """Persistent user-context base: static profiles + judgment logs."""

    def __init__(self, root: Path | str) -> None:
        self.root = Path(root) / "contexts"
        self._write_lock = threading.Lock()
        # Histories are append-only, so a loaded one stays valid as long
        # as appends go through this store instance.
        self._history_cache: dict[str, list[Judgment]] = {}

    def _user_dir(self, user_id: str) -> Path:
        return self.root / user_id

    # -- users -----------------------------------------------------------

    def register_user(
        self,
        email: str,
        password: str,
        name: str = "",
        country: str = "",
        language: str = "",
        domains: str = "",
        specialty: str = "",
        profession: str = "",
        study_level: str = "",
    ) -> str:
        """Create a user from the four-category registration form."""
        if not email:
            raise JudgmentError("email is required")
        if len(password) < MIN_PASSWORD_LENGTH:
            raise WeakPasswordError(
                f"password must be at least {MIN_PASSWORD_LENGTH} characters"
            )
        with self._write_lock:
            if self.find_by_email(email) is not None:
                raise DuplicateEmailError(f"email {email!r} already registered")
            user_id = "u" + uuid.uuid4().hex[:10]
            context = StaticContext(
                user_id=user_id,
                email=email,
                password_hash=hash_password(password),
                name=name,
                country=country,
                language=language,
                domains=domains,
                specialty=specialty,
                profession=profession,
                study_level=study_level,
            )
            user_dir = self._user_dir(user_id)
            user_dir.mkdir(parents=True, exist_ok=True)
            (user_dir / "static.json").write_text(
                json.dumps(context.to_json(), ensure_ascii=False, indent=2),
                encoding="utf-8",
            )
        return user_id

    def load_user(self, user_id: str) -> StaticContext:
        path = self._user_dir(user_id) / "static.json"
        if not path.exists():
            raise UnknownUserError(f"no user {user_id!r}")
        return StaticContext.from_json(json.loads(path.read_text(encoding="utf-8")))

    def find_by_email(self, email: str) -> StaticContext | None:
        if not self.root.exists():
            return None
        for static_path in self.root.glob("*/static.json"):
            context = StaticContext.from_json(
                json.loads(static_path.read_text(encoding="utf-8"))
            )
            if context.email == email:
                return context
        return None

    def authenticate(self, email: str, password: str) -> StaticContext | None:
        context = self.find_by_email(email)
        if context is None or not verify_password(password, context.password_hash):
            return None
        return context

    def list_users(self) -> list[str]:
        if not self.root.exists():
            return []
        return sorted(p.parent.name for p in self.root.glob("*/static.json"))

    # -- judgments ---------------------------------------------------------

    def record_judgment(
        self,
        judgment: Judgment,
        known_results: set[tuple[str, str, str, int]] | None = None,
    ) -> DynamicContext:
        """Append one vote to the user's log and return the updated context.

        ``known_results`` (keys of (run, engine, query, rank)) guards
        against votes on results that do not exist in the run.
        """
        self.load_user(judgment.user_id)
        if known_results is not None and judgment.result_key() not in known_results:
            raise UnknownResultError(f"no such result: {judgment.result_key()}")
        record = {
            "run_id": judgment.run_id,
            "engine_id": judgment.engine_id,
            "query_id": judgment.query_id,
            "rank": judgment.rank,
            "vote": judgment.vote,
            "voted_at": judgment.voted_at,
        }
        path = self._user_dir(judgment.user_id) / "judgments.ndjson"
        with self._write_lock:
            history = self._load_history(judgment.user_id)
            with open(path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(record, ensure_ascii=False) + "\n")
            history.append(judgment)
        return self.dynamic_context(judgment.user_id)

    def _load_history(self, user_id: str) -> list[Judgment]:
        history = self._history_cache.get(user_id)
        if history is not None:
            return history
        path = self._user_dir(user_id) / "judgments.ndjson"
        history = []
        if path.exists():
            with open(path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    data = json.loads(line)
                    history.append(
                        Judgment(
                            user_id=user_id,
                            run_id=data["run_id"],
                            engine_id=data["engine_id"],
                            query_id=data["query_id"],
                            rank=int(data["rank"]),
                            vote=int(data["vote"]),
                            voted_at=data.get("voted_at", 0.0),
                        )
                    )
        self._history_cache[user_id] = history
        return history

    def dynamic_context(self, user_id: str) -> DynamicContext:
        self.load_user(user_id)
        return DynamicContext(user_id=user_id, history=list(self._load_history(user_id)))

    def votes_by_result(
        self, run_id: str
    ) -> dict[tuple[str, str, int], dict[str, int]]:
        """Current votes per (engine, query, rank), keyed by user within."""
        votes: dict[tuple[str, str, int], dict[str, int]] = {}
        for user_id in self.list_users():
            for key, judgment in self.dynamic_context(user_id).current().items():
                if key[0] != run_id:
                    continue
                votes.setdefault((key[1], key[2], key[3]), {})[user_id] = judgment.vote
        return votes


@dataclass
class RAtK:
    k: int
    value: float | None
    covered: int

    @property
    def complete(self) -> bool:
        return self.covered >= self.k


def r_at_k(votes_by_rank: dict[int, float], k: int) -> RAtK:
    """Mean vote over ranks 1..k; absent ranks are excluded, not zeroed."""
    if k < 1:
        raise ValueError("k must be >= 1")
    values = [votes_by_rank[r] for r in range(1, k + 1) if r in votes_by_rank]
    if not values:
        return RAtK(k=k, value=None, covered=0)
    return RAtK(k=k, value=round(sum(values) / len(values), 2), covered=len(values))


@dataclass
class AdjustedScore:
    """Per-result value in [0, 1]: the users' verdict where votes exist,
    otherwise the formula weight rescaled into the same range."""

    url: str
    rank: int
    value: float
    judged: bool


def recompute_relevance(
    formula_weights: list[tuple[str, int, float]],
    votes: dict[int, list[int]],
) -> list[AdjustedScore]:
    """Judgment-adjusted scores for one (engine, query) group.

    ``formula_weights`` is (url, rank, weight) per result;``votes`` maps
    ranks to the current votes across users. A voted result's value is
    the mean vote / 5, overriding the formula; unvoted results carry the
    group-min-max-rescaled formula weight, flagged unjudged.
    """
    weights = [w for _, _, w in formula_weights]
    lo = min(weights, default=0.0)
    hi = max(weights, default=0.0)
    adjusted = []
    for url, rank, weight in formula_weights:
        rank_votes = votes.get(rank)
        if rank_votes:
            value = sum(rank_votes) / len(rank_votes) / 5.0
            adjusted.append(AdjustedScore(url=url, rank=rank, value=value, judged=True))
        else:
            scaled = 0.5 if hi == lo else (weight - lo) / (hi - lo)
            adjusted.append(AdjustedScore(url=url, rank=rank, value=scaled, judged=False))
    return adjusted
