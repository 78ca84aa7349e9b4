"""Interaction-to-command mappings as data.

A rulebook file is line-oriented:

    #! cubedeck-rulebook v1
    name default
    description "..."
    tap -> recolor
    pinch.edge -> rescale
    neighbored -> combine{mode=neighbored}

A pattern is ``kind[.qualifier][@subject_kind]``; qualifiers narrow pinch
(site), rotate (axis), and swipe (travel axis).  ``@cube`` / ``@component``
restrict the subject.  Validation enforces the one-to-one discipline: no
two rules may match the same event.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from typing import List, Optional, Protocol, Tuple

from .errors import RulebookError
from .model import CommandKind, InteractionEvent, InteractionKind, VisualizationCommand

RULEBOOK_HEADER = "#! cubedeck-rulebook v1"

# Qualifier domain per event kind; kinds absent here take no qualifier.
_QUALIFIER_DOMAIN = {
    InteractionKind.PINCH: ("edge", "surface"),
    InteractionKind.ROTATE: ("x", "y", "z"),
    InteractionKind.SWIPE: ("u", "v"),
}

# Template verbs: every command kind token, plus the overview/detail toggle.
_VERBS = {kind.value: kind for kind in CommandKind}
TOGGLE_VERB = "overview_detail"

_TEMPLATE_PARAMS = {
    "rescale": ("granularity",),
    "combine": ("mode",),
    "flatten": ("axis",),
    "chop": ("axis", "parts"),
    "adjust_range": ("axis",),
    "sort": ("key",),
    "switch_vis_type": ("vis",),
    "zoom": ("factor",),
    "pan": ("delta",),
}

_COMBINE_MODES = ("neighbored", "stacked", "small_multiples", "auto")


@dataclass(frozen=True)
class EventPattern:
    kind: InteractionKind
    qualifier: Optional[str] = None
    subject_kind: Optional[str] = None  # "cube" | "component"

    def token(self) -> str:
        out = self.kind.value
        if self.qualifier:
            out += f".{self.qualifier}"
        if self.subject_kind:
            out += f"@{self.subject_kind}"
        return out

    def overlaps(self, other: "EventPattern") -> bool:
        if self.kind is not other.kind:
            return False
        if self.qualifier and other.qualifier and self.qualifier != other.qualifier:
            return False
        if self.subject_kind and other.subject_kind and self.subject_kind != other.subject_kind:
            return False
        return True

    def matches(self, event: InteractionEvent) -> bool:
        if event.kind is not self.kind:
            return False
        if self.qualifier is not None:
            if event.kind is InteractionKind.PINCH and event.get("site") != self.qualifier:
                return False
            if event.kind is InteractionKind.ROTATE and event.get("axis") != self.qualifier:
                return False
            if event.kind is InteractionKind.SWIPE and event.get("direction")[1] != self.qualifier:
                return False
        if self.subject_kind is not None:
            is_component = "+" in event.subject
            if self.subject_kind == "component" and not is_component:
                return False
            if self.subject_kind == "cube" and is_component:
                return False
        return True


@dataclass(frozen=True)
class Rule:
    pattern: EventPattern
    verb: str  # command kind token or "overview_detail"
    template_params: Tuple[Tuple[str, str], ...] = ()
    line: int = 0

    def token(self) -> str:
        params = ",".join(f"{k}={v}" for k, v in self.template_params)
        return f"{self.pattern.token()} -> {self.verb}" + (f"{{{params}}}" if params else "")


@dataclass(frozen=True)
class ConflictError:
    rule_a: Rule
    rule_b: Rule
    reason: str


@dataclass(frozen=True)
class RuleBook:
    name: str
    description: str
    rules: Tuple[Rule, ...]

    def find(self, event: InteractionEvent) -> Optional[Rule]:
        for rule in self.rules:
            if rule.pattern.matches(event):
                return rule
        return None

    def to_text(self) -> str:
        lines = [RULEBOOK_HEADER, f"name {self.name}", f'description "{self.description}"', ""]
        lines.extend(rule.token() for rule in self.rules)
        return "\n".join(lines) + "\n"


def _parse_pattern(token: str, lineno: int, col: int) -> EventPattern:
    subject_kind = None
    if "@" in token:
        token, _, subject_kind = token.partition("@")
        if subject_kind not in ("cube", "component"):
            raise RulebookError(f"unknown subject kind {subject_kind!r}", lineno, col)
    qualifier = None
    if "." in token:
        token, _, qualifier = token.partition(".")
    try:
        kind = InteractionKind(token)
    except ValueError:
        raise RulebookError(f"unknown event kind {token!r}", lineno, col) from None
    if qualifier is not None:
        domain = _QUALIFIER_DOMAIN.get(kind)
        if domain is None:
            raise RulebookError(f"event kind {kind.value!r} takes no qualifier", lineno, col)
        if qualifier not in domain:
            raise RulebookError(
                f"qualifier {qualifier!r} not in {list(domain)} for {kind.value}", lineno, col
            )
    return EventPattern(kind, qualifier, subject_kind)


def _parse_template(token: str, lineno: int, col: int) -> Tuple[str, Tuple[Tuple[str, str], ...]]:
    params: List[Tuple[str, str]] = []
    verb = token
    if "{" in token:
        if not token.endswith("}"):
            raise RulebookError("unterminated parameter block", lineno, col)
        verb, _, body = token[:-1].partition("{")
        for item in body.split(","):
            if not item:
                continue
            if "=" not in item:
                raise RulebookError(f"malformed parameter {item!r}", lineno, col)
            key, _, value = item.partition("=")
            params.append((key, value))
    if verb != TOGGLE_VERB and verb not in _VERBS:
        raise RulebookError(f"unknown command kind {verb!r}", lineno, col)
    allowed = _TEMPLATE_PARAMS.get(verb, ())
    for key, value in params:
        if key not in allowed:
            raise RulebookError(f"command {verb!r} takes no parameter {key!r}", lineno, col)
        if verb == "combine" and key == "mode" and value not in _COMBINE_MODES:
            raise RulebookError(f"unknown combine mode {value!r}", lineno, col)
    return verb, tuple(params)


def parse_rulebook(text: str) -> RuleBook:
    """Parse a rulebook document; raises RulebookError with line/column."""
    lines = text.splitlines()
    if not lines or lines[0].strip() != RULEBOOK_HEADER:
        raise RulebookError(f"missing header {RULEBOOK_HEADER!r}", 1, 1)
    name = "unnamed"
    description = ""
    rules: List[Rule] = []
    seen_patterns: dict[EventPattern, int] = {}
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("name "):
            name = line[5:].strip()
            continue
        if line.startswith("description "):
            description = line[12:].strip().strip('"')
            continue
        if "->" not in line:
            raise RulebookError("expected 'pattern -> command'", lineno, 1)
        left, _, right = line.partition("->")
        left, right = left.strip(), right.strip()
        if not left or not right:
            raise RulebookError("empty pattern or command", lineno, 1)
        if " " in left or " " in right:
            raise RulebookError("pattern and command must be single tokens", lineno, 1)
        pattern = _parse_pattern(left, lineno, raw.find(left) + 1)
        verb, params = _parse_template(right, lineno, raw.find(right) + 1)
        if pattern in seen_patterns:
            raise RulebookError(
                f"duplicate pattern {pattern.token()!r} (first on line {seen_patterns[pattern]})",
                lineno,
                raw.find(left) + 1,
            )
        seen_patterns[pattern] = lineno
        rules.append(Rule(pattern, verb, params, lineno))
    return RuleBook(name, description, tuple(rules))


def validate(rulebook: RuleBook) -> List[ConflictError]:
    """One-to-one discipline check: no two rules may match the same event."""
    conflicts: List[ConflictError] = []
    rules = rulebook.rules
    for i in range(len(rules)):
        for j in range(i + 1, len(rules)):
            if rules[i].pattern.overlaps(rules[j].pattern):
                conflicts.append(
                    ConflictError(
                        rules[i],
                        rules[j],
                        f"patterns {rules[i].pattern.token()!r} and "
                        f"{rules[j].pattern.token()!r} can match the same event",
                    )
                )
    return conflicts


def _load_builtin(name: str) -> RuleBook:
    text = resources.files("cubedeck.data.rulebooks").joinpath(f"{name}.rules").read_text()
    return parse_rulebook(text)


def default_rulebook() -> RuleBook:
    """The prototype subset: tap/combine/cover/shake plus show on uncover."""
    return _load_builtin("default")


def extended_rulebook() -> RuleBook:
    """The full curated one-to-one set."""
    return _load_builtin("extended")


def builtin_rulebook(name: str) -> RuleBook:
    return _load_builtin(name)


class DispatchContext(Protocol):
    """What dispatch needs to know about the session."""

    def is_bound(self, cube_id: str) -> bool: ...

    @property
    def detail_mode(self) -> bool: ...

    def rescale_granularity(self, direction: str) -> int: ...


@dataclass
class StaticContext:
    """Context with fixed answers; useful for tests and offline dispatch."""

    bound: frozenset = frozenset()
    all_bound: bool = False
    detail: bool = False
    coarsen: int = 30
    refine: int = 5

    def is_bound(self, cube_id: str) -> bool:
        return self.all_bound or cube_id in self.bound

    @property
    def detail_mode(self) -> bool:
        return self.detail

    def rescale_granularity(self, direction: str) -> int:
        return self.coarsen if direction == "coarsen" else self.refine


def _event_members(event: InteractionEvent) -> Tuple[str, ...]:
    kind = event.kind
    if kind is InteractionKind.NEIGHBORED:
        return (event.subject, event.get("other"))
    if kind is InteractionKind.STACKED:
        return tuple(event.get("below")) + (event.subject,)
    if kind in (InteractionKind.ASSEMBLED, InteractionKind.DISASSEMBLED):
        return tuple(event.get("members"))
    if kind is InteractionKind.COLLIDE:
        return (event.subject, event.get("other"))
    return (event.subject,)


# Events exempt from the bound-subject requirement.
_UNBOUND_OK = (InteractionKind.PICK_UP, InteractionKind.PUT_DOWN)


def dispatch(
    rulebook: RuleBook, event: InteractionEvent, ctx: DispatchContext
) -> Optional[VisualizationCommand]:
    """Map one event through the rulebook; None when no rule applies or the
    subject carries no data."""
    rule = rulebook.find(event)
    if rule is None:
        return None
    members = _event_members(event)
    if event.kind not in _UNBOUND_OK and not all(ctx.is_bound(m) for m in members):
        return None  # data must be extracted before exploration
    target = event.subject if len(members) == 1 else "+".join(sorted(members))
    params = dict(rule.template_params)
    verb = rule.verb

    if verb == TOGGLE_VERB:
        kind = CommandKind.OVERVIEW if ctx.detail_mode else CommandKind.DETAIL
        return VisualizationCommand.make(kind, target)
    kind = _VERBS[verb]

    if kind is CommandKind.COMBINE:
        mode = params.get("mode", "auto")
        if mode == "auto":
            mode = {
                InteractionKind.NEIGHBORED: "neighbored",
                InteractionKind.STACKED: "stacked",
                InteractionKind.ASSEMBLED: "small_multiples",
            }.get(event.kind, "neighbored")
        return VisualizationCommand.make(kind, target, mode=mode, members=sorted(members))
    if kind is CommandKind.RESCALE:
        if "granularity" in params:
            granularity = int(params["granularity"])
        else:
            ratio = event.get("scale_ratio") if event.kind is InteractionKind.PINCH else 1.0
            granularity = ctx.rescale_granularity("refine" if ratio > 1.0 else "coarsen")
        return VisualizationCommand.make(kind, target, granularity=granularity)
    if kind is CommandKind.ZOOM:
        factor = float(params["factor"]) if "factor" in params else (
            event.get("scale_ratio") if event.kind is InteractionKind.PINCH else 1.0
        )
        return VisualizationCommand.make(kind, target, factor=factor)
    if kind is CommandKind.FLATTEN:
        return VisualizationCommand.make(kind, target, axis=params.get("axis", "time"))
    if kind is CommandKind.CHOP:
        parts = int(params["parts"]) if "parts" in params else max(len(members), 2)
        return VisualizationCommand.make(kind, target, axis=params.get("axis", "time"), parts=parts)
    if kind is CommandKind.ADJUST_RANGE:
        axis = params.get("axis")
        direction = 1
        if event.kind is InteractionKind.SWIPE:
            sign, travel_axis = event.get("direction")[0], event.get("direction")[1]
            direction = 1 if sign == "+" else -1
            if axis is None:
                axis = "time" if travel_axis == "u" else "space"
        return VisualizationCommand.make(kind, target, axis=axis or "time", direction=direction)
    if kind is CommandKind.SORT:
        return VisualizationCommand.make(kind, target, key=params.get("key", "value_desc"))
    if kind is CommandKind.SWITCH_VIS_TYPE:
        return VisualizationCommand.make(kind, target, vis=params.get("vis", "cycle"))
    if kind is CommandKind.PAN:
        if "delta" in params:
            dx, dy = (float(c) for c in params["delta"].split("/"))
        elif event.kind is InteractionKind.SWIPE:
            sign, travel_axis = event.get("direction")[0], event.get("direction")[1]
            step = 0.1 if sign == "+" else -0.1
            dx, dy = (step, 0.0) if travel_axis == "u" else (0.0, step)
        else:
            dx, dy = 0.0, 0.0
        return VisualizationCommand.make(kind, target, delta=(dx, dy))
    return VisualizationCommand.make(kind, target)
