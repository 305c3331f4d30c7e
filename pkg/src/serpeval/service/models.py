"""Request/response schemas for the judgment-session API."""

from __future__ import annotations

from pydantic import BaseModel, Field


class ConnectionCategory(BaseModel):
    email: str = Field(min_length=1)
    password: str


class PersonalCategory(BaseModel):
    name: str = ""
    country: str = ""
    language: str = ""


class InterestsCategory(BaseModel):
    domains: str = ""
    specialty: str = ""


class CompetenceCategory(BaseModel):
    profession: str = ""
    study_level: str = ""


class RegisterRequest(BaseModel):
    connection: ConnectionCategory
    personal: PersonalCategory
    interests: InterestsCategory
    competence: CompetenceCategory


class RegisterResponse(BaseModel):
    user_id: str


class LoginRequest(BaseModel):
    email: str
    password: str


class LoginResponse(BaseModel):
    token: str
    expires_at: float


class ResultPayload(BaseModel):
    rank: int
    title: str = ""
    url: str
    snippet: str = ""
    excerpt: str = ""
    my_vote: int | None = None  # the requesting user's current vote, if any


class Progress(BaseModel):
    judged: int
    total: int
    fraction: float


class OverallProgress(BaseModel):
    groups_done: int
    groups_total: int


class NextResponse(BaseModel):
    complete: bool
    group_token: str | None = None
    topic_label: str | None = None
    query_text: str | None = None
    engine_id: str | None = None  # present only when blind judging is off
    results: list[ResultPayload] = []
    progress: Progress | None = None
    overall: OverallProgress


class VoteRequest(BaseModel):
    group_token: str
    rank: int = Field(ge=1)
    vote: int = Field(ge=0, le=5)


class VoteResponse(BaseModel):
    ok: bool
    progress: Progress


class TablePayload(BaseModel):
    title: str
    corner: str
    rows: list[str]
    columns: list[str]
    cells: dict[str, dict[str, float | None]]
    flags: list[str] = []


class ReportsResponse(BaseModel):
    performance: TablePayload | None = None
    user_relevance: TablePayload | None = None
    query_relevance: TablePayload | None = None
    coupled: TablePayload | None = None
    flags: list[str] = []


class ErrorBody(BaseModel):
    code: str
    message: str
    field: str | None = None
