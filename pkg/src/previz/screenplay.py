"""Plain-text dialogue script parsing, validation, and serialization.

The input format has two required sections plus an optional heading:

    SCENE: <free-text location/time>        (optional, one line)
    CHARACTERS:
    <Name>: <gender>, <age>, <description>  (gender/age/description optional)
    DIALOGUE:
    <Name>: <utterance>                     (wraps until the next Name: line)

Speaker names are matched case-insensitively against the declared cast.
Unknown gender or age tokens fall through into the description instead of
erroring, so loosely written scripts still parse.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import PrevizError

GENDERS = ("male", "female", "unspecified")

MAX_AGE = 150

# A speaker prefix: a short name followed by a colon. Lines inside the
# DIALOGUE block that do not match are treated as utterance continuations.
_NAME_PREFIX = re.compile(r"^([A-Za-z][A-Za-z0-9 .'\-]{0,40}?)\s*:\s*(.*)$")

_SECTION_SCENE = re.compile(r"^scene\s*:\s*(.*)$", re.IGNORECASE)
_SECTION_CHARACTERS = re.compile(r"^characters\s*:\s*$", re.IGNORECASE)
_SECTION_DIALOGUE = re.compile(r"^dialogue\s*:\s*$", re.IGNORECASE)


class ParseError(PrevizError):
    """Raised when script text cannot be parsed; carries the 1-based line number."""

    def __init__(self, line_no: int, reason: str):
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"line {line_no}: {reason}")


@dataclass(frozen=True)
class CharacterDecl:
    name: str
    gender: str = "unspecified"
    age: int | None = None
    description: str = ""


@dataclass(frozen=True)
class DialogueLine:
    index: int
    speaker: str
    text: str


@dataclass(frozen=True)
class Script:
    characters: tuple[CharacterDecl, ...]
    lines: tuple[DialogueLine, ...]
    heading: str | None = None

    def character(self, name: str) -> CharacterDecl | None:
        lowered = name.lower()
        for decl in self.characters:
            if decl.name.lower() == lowered:
                return decl
        return None


@dataclass(frozen=True)
class ValidationIssue:
    severity: str  # "error" or "warning"
    message: str
    locus: str


def _normalize_ws(text: str) -> str:
    return " ".join(text.split())


def _parse_character_decl(name: str, rest: str, line_no: int) -> CharacterDecl:
    if not name:
        raise ParseError(line_no, "character declaration has an empty name")
    gender = "unspecified"
    age: int | None = None
    tokens = [t.strip() for t in rest.split(",")] if rest.strip() else []
    consumed = 0
    if tokens and tokens[0].lower() in ("male", "female"):
        gender = tokens[0].lower()
        consumed = 1
    elif tokens and tokens[0].lower() == "unspecified":
        consumed = 1
    if consumed < len(tokens):
        candidate = tokens[consumed]
        if re.fullmatch(r"\d+", candidate) and 0 <= int(candidate) <= MAX_AGE:
            age = int(candidate)
            consumed += 1
    description = ", ".join(tokens[consumed:])
    return CharacterDecl(name=name, gender=gender, age=age, description=description)


def parse_script(text: str) -> Script:
    """Parse plain-text script into a Script.

    Raises ParseError on undeclared speakers, empty dialogue text, or
    malformed character declarations. Parsing is deterministic.
    """
    if not text.strip():
        raise ParseError(1, "script text is empty")

    heading: str | None = None
    characters: list[CharacterDecl] = []
    lines: list[DialogueLine] = []
    seen_names: dict[str, int] = {}

    section = None  # None -> "characters" -> "dialogue"
    pending_speaker: str | None = None
    pending_text: list[str] = []
    pending_line_no = 0

    def flush_pending() -> None:
        nonlocal pending_speaker, pending_text
        if pending_speaker is None:
            return
        utterance = _normalize_ws(" ".join(pending_text))
        if not utterance:
            raise ParseError(pending_line_no, f"empty dialogue text for '{pending_speaker}'")
        lines.append(DialogueLine(index=len(lines), speaker=pending_speaker, text=utterance))
        pending_speaker = None
        pending_text = []

    for line_no, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped:
            continue

        if section is None:
            m = _SECTION_SCENE.match(stripped)
            if m and heading is None:
                heading = _normalize_ws(m.group(1)) or None
                continue
            if _SECTION_CHARACTERS.match(stripped):
                section = "characters"
                continue
            raise ParseError(line_no, "expected CHARACTERS: section")

        if section == "characters":
            if _SECTION_DIALOGUE.match(stripped):
                section = "dialogue"
                continue
            m = _NAME_PREFIX.match(stripped)
            if not m:
                raise ParseError(line_no, f"malformed character declaration: {stripped!r}")
            name = _normalize_ws(m.group(1))
            if name.lower() in seen_names:
                raise ParseError(
                    line_no,
                    f"duplicate character name '{name}' (first declared on line {seen_names[name.lower()]})",
                )
            decl = _parse_character_decl(name, m.group(2), line_no)
            seen_names[name.lower()] = line_no
            characters.append(decl)
            continue

        # dialogue section
        m = _NAME_PREFIX.match(stripped)
        if m:
            candidate = _normalize_ws(m.group(1))
            if candidate.lower() in seen_names:
                flush_pending()
                # store the canonical declared spelling
                pending_speaker = next(
                    c.name for c in characters if c.name.lower() == candidate.lower()
                )
                pending_text = [m.group(2)]
                pending_line_no = line_no
                continue
            raise ParseError(line_no, f"undeclared speaker '{candidate}'")
        if pending_speaker is None:
            raise ParseError(line_no, f"dialogue line without a speaker: {stripped!r}")
        pending_text.append(stripped)

    if section is None:
        raise ParseError(1, "expected CHARACTERS: section")
    if section == "characters":
        raise ParseError(len(text.splitlines()), "expected DIALOGUE: section")
    flush_pending()
    if not characters:
        raise ParseError(1, "no characters declared")
    if not lines:
        raise ParseError(len(text.splitlines()), "no dialogue lines")

    return Script(characters=tuple(characters), lines=tuple(lines), heading=heading)


def validate_script(script: Script) -> list[ValidationIssue]:
    """Check Script invariants. Returns issues instead of raising."""
    issues: list[ValidationIssue] = []
    if not script.characters:
        issues.append(ValidationIssue("error", "no characters declared", "characters"))
    if not script.lines:
        issues.append(ValidationIssue("error", "no dialogue lines", "lines"))

    seen: dict[str, int] = {}
    for i, decl in enumerate(script.characters):
        locus = f"characters[{i}]"
        if not decl.name.strip():
            issues.append(ValidationIssue("error", "empty character name", locus))
        key = decl.name.lower()
        if key in seen:
            issues.append(
                ValidationIssue(
                    "error",
                    f"duplicate character name '{decl.name}'",
                    f"characters[{seen[key]}], {locus}",
                )
            )
        else:
            seen[key] = i
        if decl.gender not in GENDERS:
            issues.append(ValidationIssue("error", f"unknown gender '{decl.gender}'", locus))
        if decl.age is not None and not 0 <= decl.age <= MAX_AGE:
            issues.append(ValidationIssue("error", f"age {decl.age} outside [0, {MAX_AGE}]", locus))

    declared = {c.name.lower() for c in script.characters}
    for i, line in enumerate(script.lines):
        locus = f"lines[{i}]"
        if line.index != i:
            issues.append(
                ValidationIssue("error", f"line index {line.index} != position {i}", locus)
            )
        if line.speaker.lower() not in declared:
            issues.append(ValidationIssue("error", f"undeclared speaker '{line.speaker}'", locus))
        if not line.text.strip():
            issues.append(ValidationIssue("error", "empty dialogue text", locus))
    return issues


def serialize_script(script: Script) -> str:
    """Canonical writer; parse_script(serialize_script(s)) == s for parsed models."""
    out: list[str] = []
    if script.heading:
        out.append(f"SCENE: {script.heading}")
    out.append("CHARACTERS:")
    for decl in script.characters:
        parts = [decl.gender]
        if decl.age is not None:
            parts.append(str(decl.age))
        if decl.description:
            parts.append(decl.description)
        out.append(f"{decl.name}: {', '.join(parts)}")
    out.append("DIALOGUE:")
    for line in script.lines:
        out.append(f"{line.speaker}: {line.text}")
    return "\n".join(out) + "\n"


def script_to_dict(script: Script) -> dict:
    return {
        "heading": script.heading,
        "characters": [
            {
                "name": c.name,
                "gender": c.gender,
                "age": c.age,
                "description": c.description,
            }
            for c in script.characters
        ],
        "lines": [
            {"index": l.index, "speaker": l.speaker, "text": l.text} for l in script.lines
        ],
    }


def script_from_dict(data: dict) -> Script:
    return Script(
        heading=data.get("heading"),
        characters=tuple(
            CharacterDecl(
                name=c["name"],
                gender=c.get("gender", "unspecified"),
                age=c.get("age"),
                description=c.get("description", ""),
            )
            for c in data["characters"]
        ),
        lines=tuple(
            DialogueLine(index=l["index"], speaker=l["speaker"], text=l["text"])
            for l in data["lines"]
        ),
    )
