"""Escaping and normalization helpers shared by the on-disk formats.

Raw user inputs may contain tabs and newlines; every TSV format that
carries them stores the escaped form. Triple components are normalized
text (whitespace collapsed) and never need escaping.
"""

from __future__ import annotations

import re
import unicodedata

_WS_RE = re.compile(r"\s+")

# Escape table: backslash first so unescape is unambiguous.
_ESCAPES = [("\\", "\\\\"), ("\t", "\\t"), ("\n", "\\n"), ("\r", "\\r")]


def escape_field(text: str) -> str:
    """Escape backslash, tab, newline and carriage return for TSV storage."""
    for raw, esc in _ESCAPES:
        text = text.replace(raw, esc)
    return text


def unescape_field(text: str) -> str:
    """Inverse of :func:`escape_field`."""
    out: list[str] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\\" and i + 1 < n:
            nxt = text[i + 1]
            if nxt == "\\":
                out.append("\\")
            elif nxt == "t":
                out.append("\t")
            elif nxt == "n":
                out.append("\n")
            elif nxt == "r":
                out.append("\r")
            else:
                out.append(ch)
                out.append(nxt)
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def normalize_text(text: str) -> str:
    """NFKC-normalize, trim, and collapse internal whitespace (case kept)."""
    return _WS_RE.sub(" ", unicodedata.normalize("NFKC", text)).strip()


def norm_key(text: str) -> str:
    """Case-folded form of :func:`normalize_text`, used for identity/matching."""
    return normalize_text(text).casefold()
