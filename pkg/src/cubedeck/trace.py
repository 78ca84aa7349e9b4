"""Trace files and deterministic replay.

Format (text, one sample per line after the header):

    #! cubedeck-trace v1
    #! dataset health
    #! rulebook default
    #! param recognizer tap_max_duration 0.25
    pose t=0.0 cube=A p=0.1,0.2,0.0165 q=1.0,0.0,0.0,0.0
    touch t=0.5 cube=A contact=c1 face=+Z uv=0.5,0.5 pressure=0.3 phase=down

Dataset and rulebook references resolve against the built-in catalog first
(`health`, `demographic`, `weather`; `default`, `extended`, ...), then as
filesystem paths.  ``param`` lines override individual recognizer or
spatial thresholds for the replay.
"""

from __future__ import annotations

import dataclasses
import io
import os
from dataclasses import dataclass
from importlib import resources
from typing import Callable, Dict, List, Optional, Tuple

from .datacube import SpaceTimeCube, load_dataset
from .errors import ResolutionError, TraceFormatError
from .model import InputSample, sample_from_line, sample_to_line
from .recognizer import RecognizerParams
from .rulebook import RuleBook, parse_rulebook
from .session import Session, SessionLayout, StepReport
from .spatial import SpatialParams

TRACE_HEADER = "#! cubedeck-trace v1"

BUILTIN_DATASETS = ("health", "demographic", "weather")
BUILTIN_RULEBOOKS = ("default", "extended", "demographic", "weather")


@dataclass(frozen=True)
class TraceHeader:
    dataset: str = "health"
    rulebook: str = "default"
    params: Tuple[Tuple[str, str, str], ...] = ()  # (group, name, value)


@dataclass(frozen=True)
class TraceFile:
    header: TraceHeader
    samples: Tuple[InputSample, ...]

    def to_text(self) -> str:
        lines = [TRACE_HEADER]
        lines.append(f"#! dataset {self.header.dataset}")
        lines.append(f"#! rulebook {self.header.rulebook}")
        for group, name, value in self.header.params:
            lines.append(f"#! param {group} {name} {value}")
        lines.extend(sample_to_line(s) for s in self.samples)
        return "\n".join(lines) + "\n"


def parse_trace(text: str) -> TraceFile:
    lines = text.splitlines()
    if not lines or lines[0].strip() != TRACE_HEADER:
        raise TraceFormatError(f"missing trace header {TRACE_HEADER!r}", 1)
    dataset = "health"
    rulebook = "default"
    params: List[Tuple[str, str, str]] = []
    samples: List[InputSample] = []
    prev_t = None
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#!"):
            tokens = line[2:].split()
            if not tokens:
                raise TraceFormatError("empty directive", lineno)
            if tokens[0] == "dataset" and len(tokens) == 2:
                dataset = tokens[1]
            elif tokens[0] == "rulebook" and len(tokens) == 2:
                rulebook = tokens[1]
            elif tokens[0] == "param" and len(tokens) == 4:
                params.append((tokens[1], tokens[2], tokens[3]))
            else:
                raise TraceFormatError(f"unknown directive {line!r}", lineno)
            continue
        if line.startswith("#"):
            continue
        try:
            sample = sample_from_line(line)
        except Exception as exc:
            raise TraceFormatError(str(exc), lineno) from exc
        if prev_t is not None and sample.t < prev_t:
            raise TraceFormatError(
                f"timestamp {sample.t} regresses below {prev_t}", lineno
            )
        prev_t = sample.t
        samples.append(sample)
    return TraceFile(TraceHeader(dataset, rulebook, tuple(params)), tuple(samples))


def resolve_dataset(ref: str, search_dir: Optional[str] = None) -> SpaceTimeCube:
    """Built-in name, a path, or a name found in ``search_dir``."""
    if ref in BUILTIN_DATASETS:
        text = resources.files("cubedeck.data.datasets").joinpath(f"{ref}.dataset").read_text()
        return load_dataset(text)
    candidates = [ref]
    if search_dir:
        candidates.append(os.path.join(search_dir, f"{ref}.dataset"))
    for path in candidates:
        if os.path.isfile(path):
            with open(path, "r") as fh:
                return load_dataset(fh.read())
    raise ResolutionError(f"cannot resolve dataset {ref!r}")


def resolve_rulebook(ref: str, search_dir: Optional[str] = None) -> RuleBook:
    if ref in BUILTIN_RULEBOOKS:
        text = resources.files("cubedeck.data.rulebooks").joinpath(f"{ref}.rules").read_text()
        return parse_rulebook(text)
    candidates = [ref]
    if search_dir:
        candidates.append(os.path.join(search_dir, f"{ref}.rules"))
    for path in candidates:
        if os.path.isfile(path):
            with open(path, "r") as fh:
                return parse_rulebook(fh.read())
    raise ResolutionError(f"cannot resolve rulebook {ref!r}")


def apply_param_overrides(
    rparams: RecognizerParams,
    sparams: SpatialParams,
    overrides: Tuple[Tuple[str, str, str], ...],
) -> Tuple[RecognizerParams, SpatialParams]:
    for group, name, value in overrides:
        if group == "recognizer":
            if not hasattr(rparams, name):
                raise TraceFormatError(f"unknown recognizer param {name!r}")
            current = getattr(rparams, name)
            cast = int(value) if isinstance(current, int) else float(value)
            rparams = dataclasses.replace(rparams, **{name: cast})
        elif group == "spatial":
            if not hasattr(sparams, name):
                raise TraceFormatError(f"unknown spatial param {name!r}")
            sparams = dataclasses.replace(sparams, **{name: float(value)})
        else:
            raise TraceFormatError(f"unknown param group {group!r}")
    return rparams, sparams


def session_for_trace(
    trace: TraceFile,
    dataset_ref: Optional[str] = None,
    rulebook_ref: Optional[str] = None,
    search_dir: Optional[str] = None,
) -> Session:
    dataset_name = dataset_ref or trace.header.dataset
    rulebook_name = rulebook_ref or trace.header.rulebook
    dataset = resolve_dataset(dataset_name, search_dir)
    rulebook = resolve_rulebook(rulebook_name, search_dir)
    rparams, sparams = apply_param_overrides(
        RecognizerParams(), SpatialParams(), trace.header.params
    )
    return Session(
        dataset,
        rulebook,
        SessionLayout(),
        rparams,
        sparams,
        dataset_name=dataset_name,
    )


@dataclass
class ReplayResult:
    log_lines: List[str]
    snapshot: str
    reports: List[StepReport]


def replay_trace(
    trace: TraceFile,
    dataset_ref: Optional[str] = None,
    rulebook_ref: Optional[str] = None,
    search_dir: Optional[str] = None,
    sink: Optional[Callable[[str], None]] = None,
) -> ReplayResult:
    """Feed every sample through a fresh session; single-threaded by
    contract so identical traces always produce identical logs."""
    session = session_for_trace(trace, dataset_ref, rulebook_ref, search_dir)
    log: List[str] = []
    reports: List[StepReport] = []

    def emit(line: str) -> None:
        log.append(line)
        if sink:
            sink(line)

    for sample in trace.samples:
        report = session.step(sample)
        reports.append(report)
        for line in report.lines():
            emit(line)
    t_end = trace.samples[-1].t if trace.samples else 0.0
    report = session.flush(t_end)
    reports.append(report)
    for line in report.lines():
        emit(line)
    return ReplayResult(log, session.snapshot(), reports)
