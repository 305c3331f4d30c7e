"""HTML-to-text extraction and tokenization.

Produces the token streams that parasite detection and the relevance
weighting operate on. Tokenization is deliberately minimal: case-folding
and edge-punctuation stripping only, no stemming and no stopword removal,
so that phrase frequencies stay faithful to the raw query words.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass
from html.parser import HTMLParser
from typing import Sequence


@dataclass(frozen=True)
class DocumentText:
    """Tokenized textual content of one fetched result page."""

    url: str
    tokens: tuple[str, ...]

    @property
    def length(self) -> int:
        return len(self.tokens)


# Tags whose character data never reaches the visible text stream.
_INVISIBLE_TAGS = {"script", "style", "template"}

# Block-level boundaries become whitespace so words from adjacent
# blocks do not run together.
_BLOCK_TAGS = {
    "address", "article", "aside", "blockquote", "br", "dd", "div", "dl",
    "dt", "fieldset", "figcaption", "figure", "footer", "form", "h1", "h2",
    "h3", "h4", "h5", "h6", "header", "hr", "li", "main", "nav", "ol", "p",
    "pre", "section", "table", "td", "th", "title", "tr", "ul",
}


class _TextExtractor(HTMLParser):
    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self._chunks: list[str] = []
        self._skip_depth = 0

    def handle_starttag(self, tag, attrs):
        if tag in _INVISIBLE_TAGS:
            self._skip_depth += 1
        if tag in _BLOCK_TAGS:
            self._chunks.append(" ")

    def handle_endtag(self, tag):
        if tag in _INVISIBLE_TAGS and self._skip_depth > 0:
            self._skip_depth -= 1
        if tag in _BLOCK_TAGS:
            self._chunks.append(" ")

    def handle_data(self, data):
        if self._skip_depth == 0:
            self._chunks.append(data)

    def text(self) -> str:
        return " ".join("".join(self._chunks).split())


def extract_text(raw_html: str | bytes) -> str:
    """Strip markup from a result page, keeping only its visible text.

    Script/style/comment content is dropped, block boundaries become
    whitespace, and entity references are decoded. Malformed HTML is
    parsed leniently; bytes are decoded as UTF-8 with replacement.
    """
    if isinstance(raw_html, bytes):
        raw_html = raw_html.decode("utf-8", errors="replace")
    parser = _TextExtractor()
    parser.feed(raw_html)
    parser.close()
    return parser.text()


def _is_edge_strippable(ch: str) -> bool:
    # Strip punctuation and symbols from token edges; keep letters,
    # digits, marks, and anything word-internal.
    return unicodedata.category(ch)[0] in ("P", "S")


def tokenize(text: str) -> list[str]:
    """Split text into case-folded word tokens.

    Splits on Unicode whitespace and strips leading/trailing punctuation
    only, so word-internal apostrophes and hyphens survive ("l'équipe"
    stays one token). No stemming.
    """
    tokens = []
    for raw in text.split():
        start, end = 0, len(raw)
        while start < end and _is_edge_strippable(raw[start]):
            start += 1
        while end > start and _is_edge_strippable(raw[end - 1]):
            end -= 1
        if end > start:
            tokens.append(raw[start:end].casefold())
    return tokens


def document_from_html(url: str, raw_html: str | bytes) -> DocumentText:
    return DocumentText(url=url, tokens=tuple(tokenize(extract_text(raw_html))))


def count_group(tokens: Sequence[str], group: Sequence[str]) -> int:
    """Count contiguous occurrences of a word group in a token stream.

    Multi-word groups match as phrases; overlapping occurrences count
    ([a,a,a] contains [a,a] twice).
    """
    n, m = len(tokens), len(group)
    if m == 0:
        raise ValueError("word group must contain at least one word")
    if m > n:
        return 0
    group = list(group)
    return sum(1 for i in range(n - m + 1) if list(tokens[i:i + m]) == group)
