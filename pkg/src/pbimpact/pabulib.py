"""Reader, writer and corpus scanner for the .pb election file format.

The format is UTF-8 text with LF or CRLF line endings and three sections,
each introduced by a line holding only its name::

    META
    key;value
    budget;100000
    ...
    PROJECTS
    project_id;cost;category;target;name
    ...
    VOTES
    voter_id;vote
    ...

Fields are separated by ``;`` and multi-valued cells (``category``,
``target``, ``vote``, ``points``) by ``,``. Required META keys are
``budget``, ``vote_type``, ``num_projects`` and ``num_votes``; unknown META
keys and columns are preserved in :class:`RawPbFile` and, for META, carried
through to :attr:`Instance.meta`.

Parsing is pure and reentrant; files may be parsed concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Optional

from .errors import (
    DirectoryUnreadable,
    DuplicateVoterId,
    MalformedNumber,
    MissingKey,
    MissingSection,
    ParseError,
    PbImpactError,
    UnknownProjectRef,
    UnsupportedVoteType,
)
from .model import Ballot, Beneficiary, ImpactArea, Instance, Project, VoteType, popularity_by_project
from .rationals import format_rational, parse_rational

__all__ = [
    "RawPbFile",
    "ScanEntry",
    "parse_raw",
    "parse_instance",
    "serialize_instance",
    "scan_corpus",
]

SECTION_NAMES = ("META", "PROJECTS", "VOTES")
REQUIRED_META_KEYS = ("budget", "vote_type", "num_projects", "num_votes")

# Category/target vocabularies seen in the wild, normalized to lowercase with
# single spaces. Unmapped strings land in the OTHER bucket with a warning.
AREA_ALIASES: dict[str, ImpactArea] = {
    "education": ImpactArea.EDUCATION,
    "health": ImpactArea.HEALTH,
    "welfare": ImpactArea.WELFARE,
    "culture": ImpactArea.CULTURE,
    "public transit": ImpactArea.PUBLIC_TRANSIT,
    "public transit and roads": ImpactArea.PUBLIC_TRANSIT,
    "public transport": ImpactArea.PUBLIC_TRANSIT,
    "roads": ImpactArea.PUBLIC_TRANSIT,
    "public space": ImpactArea.PUBLIC_SPACE,
    "public spaces": ImpactArea.PUBLIC_SPACE,
    "urban greenery": ImpactArea.URBAN_GREENERY,
    "greenery": ImpactArea.URBAN_GREENERY,
    "environmental protection": ImpactArea.ENVIRONMENTAL_PROTECTION,
    "environment": ImpactArea.ENVIRONMENTAL_PROTECTION,
    "sport": ImpactArea.SPORT,
    "sports": ImpactArea.SPORT,
    "other": ImpactArea.OTHER,
}
BENEFICIARY_ALIASES: dict[str, Beneficiary] = {
    "families with children": Beneficiary.FAMILIES_WITH_CHILDREN,
    "families": Beneficiary.FAMILIES_WITH_CHILDREN,
    "students": Beneficiary.STUDENTS,
    "disabled people": Beneficiary.DISABLED_PEOPLE,
    "disabled": Beneficiary.DISABLED_PEOPLE,
    "people with disabilities": Beneficiary.DISABLED_PEOPLE,
    "children": Beneficiary.CHILDREN,
    "adults": Beneficiary.ADULTS,
    "animals": Beneficiary.ANIMALS,
    "youth": Beneficiary.YOUTH,
    "elderly": Beneficiary.ELDERLY,
    "seniors": Beneficiary.ELDERLY,
    "other": Beneficiary.OTHER,
}


@dataclass(frozen=True)
class RawPbFile:
    """A structurally split .pb file before semantic validation.

    Rows are ordered column-to-string maps; unknown columns are preserved
    verbatim and simply ignored by :class:`Instance` construction.
    """

    meta: dict[str, str]
    project_rows: list[dict[str, str]]
    vote_rows: list[dict[str, str]]
    source_name: str = "<string>"


def _normalize_token(token: str) -> str:
    return " ".join(token.strip().lower().replace("_", " ").split())


def parse_raw(text: str, source_name: str = "<string>") -> RawPbFile:
    """Split .pb text into sections, header rows and data rows.

    Only structural problems are raised here (:class:`MissingSection`);
    semantic validation happens in :func:`parse_instance`.
    """
    if not text.strip():
        raise MissingSection(f"{source_name}: empty file")
    lines = text.replace("\r\n", "\n").split("\n")
    sections: dict[str, list[str]] = {}
    current: Optional[list[str]] = None
    for line in lines:
        name = line.strip()
        if name in SECTION_NAMES:
            if name in sections:
                raise ParseError(f"{source_name}: duplicate section {name}")
            current = sections.setdefault(name, [])
            continue
        if current is not None and line.strip():
            current.append(line)
    for name in SECTION_NAMES:
        if name not in sections:
            raise MissingSection(f"{source_name}: no {name} section")

    meta: dict[str, str] = {}
    meta_lines = sections["META"]
    # First META line is the conventional "key;value" header row.
    for line in meta_lines[1:] if meta_lines else []:
        key, _, value = line.partition(";")
        meta[key.strip().lower()] = value.strip()

    def table(name: str) -> list[dict[str, str]]:
        body = sections[name]
        if not body:
            return []
        header = [c.strip().lower() for c in body[0].split(";")]
        rows = []
        for line in body[1:]:
            cells = [c.strip() for c in line.split(";")]
            cells += [""] * (len(header) - len(cells))
            rows.append(dict(zip(header, cells)))
        return rows

    return RawPbFile(meta, table("PROJECTS"), table("VOTES"), source_name)


def _parse_labels(cell, aliases, bucket, what, row_id, warnings):
    labels = set()
    for token in cell.split(","):
        if not token.strip():
            continue
        normalized = _normalize_token(token)
        label = aliases.get(normalized)
        if label is None:
            warnings.append(f"{row_id}: unknown {what} {token.strip()!r} mapped to 'other'")
            label = bucket
        labels.add(label)
    return frozenset(labels)


def _strictness(mode: str) -> bool:
    if mode not in ("strict", "lenient"):
        raise ValueError(f"unknown parse mode {mode!r}")
    return mode == "strict"


def parse_instance(
    text: str,
    mode: str = "strict",
    *,
    source_name: str = "<string>",
    warnings: Optional[list[str]] = None,
) -> Instance:
    """Parse .pb text into a validated :class:`Instance`.

    ``mode`` is ``"strict"`` or ``"lenient"``. Strict mode rejects votes for
    undeclared projects and count mismatches; lenient mode drops the offending
    entries instead and records a warning. Duplicate voter ids are rejected in
    both modes. Non-fatal findings are appended to ``warnings`` when a list is
    passed. The returned instance always satisfies the model invariants.
    """
    strict = _strictness(mode)
    if warnings is None:
        warnings = []
    raw = parse_raw(text, source_name)
    src = raw.source_name

    for key in ("budget", "vote_type"):
        if key not in raw.meta:
            raise MissingKey(f"{src}: META lacks required key {key!r}")
    for key in ("num_projects", "num_votes"):
        if key not in raw.meta:
            if strict:
                raise MissingKey(f"{src}: META lacks required key {key!r}")
            warnings.append(f"{src}: META lacks key {key!r}")

    budget_text = raw.meta["budget"]
    if "," in budget_text:
        raise UnsupportedVoteType(f"{src}: per-district multi-budget files are not supported")
    try:
        budget = parse_rational(budget_text)
    except ValueError as exc:
        raise MalformedNumber(f"{src}: budget {budget_text!r}: {exc}") from exc
    try:
        vote_type = VoteType(raw.meta["vote_type"].strip().lower())
    except ValueError:
        raise UnsupportedVoteType(
            f"{src}: vote type {raw.meta['vote_type']!r} is not one of "
            "approval/cumulative/scoring/ordinal"
        ) from None

    def check_count(key: str, actual: int, what: str) -> None:
        declared_text = raw.meta.get(key)
        if declared_text is None:
            return
        try:
            declared = int(declared_text)
        except ValueError as exc:
            raise MalformedNumber(f"{src}: {key} {declared_text!r} is not an integer") from exc
        if declared != actual:
            message = f"{src}: META declares {declared} {what}, file has {actual}"
            if strict:
                raise ParseError(message)
            warnings.append(message)

    # PROJECTS
    if raw.project_rows and not {"project_id", "cost"} <= set(raw.project_rows[0]):
        raise MissingKey(f"{src}: PROJECTS section needs project_id and cost columns")
    projects: dict[str, Project] = {}
    declared_votes: dict[str, Fraction] = {}
    for row in raw.project_rows:
        pid = row.get("project_id", "")
        if not pid:
            raise ParseError(f"{src}: PROJECTS row without project_id")
        if pid in projects:
            if strict:
                raise ParseError(f"{src}: duplicate project id {pid!r}")
            warnings.append(f"{src}: duplicate project id {pid!r}, later row dropped")
            continue
        try:
            cost = parse_rational(row.get("cost", ""))
        except ValueError as exc:
            raise MalformedNumber(f"{src}: project {pid!r} cost: {exc}") from exc
        if cost <= 0:
            if strict:
                raise MalformedNumber(f"{src}: project {pid!r} cost must be positive")
            warnings.append(f"{src}: project {pid!r} has non-positive cost, dropped")
            continue
        areas = _parse_labels(
            row.get("category", ""), AREA_ALIASES, ImpactArea.OTHER, "category",
            f"{src}: project {pid!r}", warnings,
        )
        beneficiaries = _parse_labels(
            row.get("target", ""), BENEFICIARY_ALIASES, Beneficiary.OTHER, "target",
            f"{src}: project {pid!r}", warnings,
        )
        projects[pid] = Project(pid, cost, areas, beneficiaries, row.get("name", ""))
        if row.get("votes", ""):
            try:
                declared_votes[pid] = parse_rational(row["votes"])
            except ValueError:
                warnings.append(f"{src}: project {pid!r} votes column is not numeric, ignored")
    check_count("num_projects", len(projects), "projects")

    # VOTES
    if raw.vote_rows and not {"voter_id", "vote"} <= set(raw.vote_rows[0]):
        raise MissingKey(f"{src}: VOTES section needs voter_id and vote columns")
    wants_points = vote_type in (VoteType.CUMULATIVE, VoteType.SCORING)
    ballots: list[Ballot] = []
    seen_voters: set[str] = set()
    for row in raw.vote_rows:
        voter = row.get("voter_id", "")
        if not voter:
            raise ParseError(f"{src}: VOTES row without voter_id")
        if voter in seen_voters:
            raise DuplicateVoterId(f"{src}: duplicate voter id {voter!r}")
        seen_voters.add(voter)
        vote_ids = [token.strip() for token in row.get("vote", "").split(",") if token.strip()]
        scores: Optional[dict[str, Fraction]] = None
        if wants_points:
            point_cells = [t.strip() for t in row.get("points", "").split(",") if t.strip()]
            if len(point_cells) != len(vote_ids):
                raise MalformedNumber(
                    f"{src}: voter {voter!r}: {len(point_cells)} points for {len(vote_ids)} votes"
                )
            try:
                points = [parse_rational(cell) for cell in point_cells]
            except ValueError as exc:
                raise MalformedNumber(f"{src}: voter {voter!r} points: {exc}") from exc
            if any(p < 0 for p in points):
                raise MalformedNumber(f"{src}: voter {voter!r}: negative points")
            scores = {}
            for pid, point in zip(vote_ids, points):
                if pid in scores:
                    warnings.append(f"{src}: voter {voter!r} lists {pid!r} twice, points summed")
                scores[pid] = scores.get(pid, Fraction(0)) + point
            vote_ids = list(scores)
        else:
            deduped = list(dict.fromkeys(vote_ids))
            if len(deduped) != len(vote_ids):
                warnings.append(f"{src}: voter {voter!r} lists duplicate projects, deduplicated")
            vote_ids = deduped

        unknown = [pid for pid in vote_ids if pid not in projects]
        if unknown:
            if strict:
                raise UnknownProjectRef(
                    f"{src}: voter {voter!r} votes for unknown projects {unknown}"
                )
            warnings.append(f"{src}: voter {voter!r}: unknown project refs {unknown} dropped")
            vote_ids = [pid for pid in vote_ids if pid in projects]
            if scores is not None:
                scores = {pid: scores[pid] for pid in vote_ids}
        if not vote_ids:
            warnings.append(f"{src}: voter {voter!r} has an empty vote, row dropped")
            continue
        ballots.append(Ballot(voter, frozenset(vote_ids), scores))
    check_count("num_votes", len(ballots), "votes")

    extra_meta = {k: v for k, v in raw.meta.items() if k not in REQUIRED_META_KEYS}
    instance = Instance(budget, tuple(projects.values()), tuple(ballots), vote_type, extra_meta)

    if declared_votes and vote_type is not VoteType.ORDINAL:
        pops = popularity_by_project(instance)
        for pid, declared in declared_votes.items():
            if pops.get(pid) != declared:
                warnings.append(
                    f"{src}: project {pid!r}: votes column says {format_rational(declared)}, "
                    f"ballots give {format_rational(pops.get(pid, Fraction(0)))}; ballots win"
                )
    return instance


def _canonical_ids(ballot: Ballot) -> list[str]:
    return sorted(ballot.approved)


def serialize_instance(instance: Instance) -> str:
    """Render an :class:`Instance` as canonical .pb text.

    Sections come in META/PROJECTS/VOTES order with LF line endings; the four
    required META keys are recomputed from the typed fields, extra meta keys
    follow in stored order. Multi-valued cells are comma-joined in a fixed
    order, and every rational renders exactly via :func:`format_rational`,
    so ``parse_instance(serialize_instance(i)) == i`` for every valid
    instance and serialization is idempotent on its own output.
    """
    lines = ["META", "key;value"]
    lines.append(f"budget;{format_rational(instance.budget)}")
    lines.append(f"vote_type;{instance.vote_type.value}")
    lines.append(f"num_projects;{len(instance.projects)}")
    lines.append(f"num_votes;{len(instance.ballots)}")
    for key, value in instance.meta.items():
        lines.append(f"{key};{value}")

    lines.append("PROJECTS")
    lines.append("project_id;cost;category;target;name")
    area_order = {area: i for i, area in enumerate(ImpactArea)}
    ben_order = {ben: i for i, ben in enumerate(Beneficiary)}
    for p in instance.projects:
        category = ",".join(a.value for a in sorted(p.areas, key=area_order.__getitem__))
        target = ",".join(b.value for b in sorted(p.beneficiaries, key=ben_order.__getitem__))
        lines.append(f"{p.id};{format_rational(p.cost)};{category};{target};{p.name}")

    lines.append("VOTES")
    with_points = any(b.scores is not None for b in instance.ballots)
    lines.append("voter_id;vote;points" if with_points else "voter_id;vote")
    for ballot in instance.ballots:
        ids = _canonical_ids(ballot)
        row = f"{ballot.voter_id};{','.join(ids)}"
        if with_points:
            scores = ballot.scores or {}
            row += ";" + ",".join(format_rational(scores.get(pid, Fraction(0))) for pid in ids)
        lines.append(row)
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ScanEntry:
    """One corpus file: either a parsed instance or an error record."""

    path: Path
    instance: Optional[Instance] = None
    error: Optional[str] = None
    warnings: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return self.instance is not None


def scan_corpus(directory, mode: str = "strict") -> list[ScanEntry]:
    """Parse every ``.pb`` file under ``directory`` (recursively).

    Files are visited in deterministic lexicographic path order. Per-file
    failures become error entries and never abort the scan.
    """
    _strictness(mode)
    root = Path(directory)
    if not root.is_dir():
        raise DirectoryUnreadable(f"{root}: not a readable directory")
    entries: list[ScanEntry] = []
    for path in sorted(root.rglob("*.pb"), key=lambda p: p.as_posix()):
        warnings: list[str] = []
        try:
            text = path.read_text(encoding="utf-8")
            instance = parse_instance(
                text, mode, source_name=path.as_posix(), warnings=warnings
            )
            entries.append(ScanEntry(path, instance, None, tuple(warnings)))
        except (PbImpactError, OSError, UnicodeDecodeError) as exc:
            entries.append(
                ScanEntry(path, None, f"{type(exc).__name__}: {exc}", tuple(warnings))
            )
    return entries
