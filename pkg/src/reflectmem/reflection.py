"""Five-part web reflections: parsing LLM output and rendering it back."""

from __future__ import annotations

import re
from dataclasses import dataclass, field, fields

from .errors import UnparseableReflection

SECTION_TITLES = {
    "useful_subgoals": "Useful Subgoals",
    "backtracking_challenges": "Backtracking & Unexpected Challenges Faced",
    "limited_functionalities": "Limited Functionalities Learned",
    "shortcuts": "Shortcuts Suggestions",
    "other_feedback": "Other Feedback",
}

_SECTION_PATTERNS = {
    "useful_subgoals": r"useful\s+subgoals?",
    "backtracking_challenges": (
        r"backtracking(?:\s*(?:&|and|/)\s*(?:unexpected\s+)?challenges?(?:\s+faced)?)?"
        r"|unexpected\s+challenges?(?:\s+faced)?"
    ),
    "limited_functionalities": r"limited\s+functionalit(?:y|ies)(?:\s+learned)?",
    "shortcuts": r"shortcuts?(?:\s+suggestions?)?",
    "other_feedback": r"(?:other\s+)?feedback",
}

_HEADER_RE = re.compile(
    r"^\s*(?:#{1,6}\s*)?(?:\d+\s*[.)]\s*)?(?:\*\*|__)?\s*"
    r"(?P<name>" + "|".join(f"(?P<{k}>{p})" for k, p in _SECTION_PATTERNS.items()) + r")"
    r"\s*(?:\*\*|__)?\s*(?::\s*(?:\*\*|__)?\s*(?P<rest>.*?)\s*|)$",
    re.IGNORECASE,
)
_BULLET_RE = re.compile(r"^\s*(?:[-*•]|\d+[.)])\s+(?P<text>.*?)\s*$")


@dataclass(frozen=True)
class StructuredReflection:
    useful_subgoals: tuple[str, ...] = ()
    backtracking_challenges: tuple[str, ...] = ()
    limited_functionalities: tuple[str, ...] = ()
    shortcuts: tuple[str, ...] = ()
    other_feedback: tuple[str, ...] = field(default=())

    def is_empty(self) -> bool:
        return not any(getattr(self, f.name) for f in fields(self))


def _match_header(line: str) -> tuple[str, str] | None:
    m = _HEADER_RE.match(line)
    if m is None:
        return None
    for key in _SECTION_PATTERNS:
        if m.group(key) is not None:
            return key, (m.group("rest") or "")
    return None


def parse_reflection_sections(content: str) -> StructuredReflection:
    """Split reflection text on its five section headers.

    Headers may carry numbering, ``#`` prefixes or bold markers and are matched
    case-insensitively. Bullets become entries; non-bullet lines continue the
    previous entry. Text before the first header goes to ``other_feedback``.
    """
    if not content or not content.strip():
        raise UnparseableReflection("empty reflection")
    sections: dict[str, list[str]] = {k: [] for k in SECTION_TITLES}
    preamble: list[str] = []
    current: list[str] | None = None
    found = 0
    for line in content.splitlines():
        if not line.strip():
            continue
        header = _match_header(line)
        if header is not None:
            key, rest = header
            current = sections[key]
            found += 1
            if rest:
                current.append(rest)
            continue
        target = preamble if current is None else current
        bullet = _BULLET_RE.match(line)
        if bullet is not None:
            if bullet.group("text"):
                target.append(bullet.group("text"))
        elif target:
            target[-1] = f"{target[-1]} {line.strip()}"
        else:
            target.append(line.strip())
    if found == 0:
        raise UnparseableReflection("no reflection section headers found")
    sections["other_feedback"] = preamble + sections["other_feedback"]
    result = StructuredReflection(**{k: tuple(v) for k, v in sections.items()})
    if result.is_empty():
        raise UnparseableReflection("reflection headers present but every section is empty")
    return result


def render_reflection(reflection: StructuredReflection) -> str:
    lines = []
    for i, (key, title) in enumerate(SECTION_TITLES.items(), start=1):
        lines.append(f"{i}. {title}:")
        lines.extend(f"- {item}" for item in getattr(reflection, key))
    return "\n".join(lines) + "\n"
