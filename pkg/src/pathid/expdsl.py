"""Line-oriented experiment description language (``.exp`` files).

One statement per line, ``#`` starts a comment::

    source P1 signal=1:H idler=3:V eps=0.1 phase=0
    rotator path=1
    phase mode=3:V value=0.0
    order 2
    gamma 1.0
    detect 1=one 2=one:V 3=one:V 4=one

Statement order is pipeline order.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

from .elements import (
    PERTURBATIVE_LIMIT,
    Element,
    PhaseSpec,
    RotatorSpec,
    SourceSpec,
    run_pipeline,
)
from .fockcore import KetExpansion, ModeLabel, Pol
from .postselect import Constraint, DetectionPattern, Kind, TwoQubitDensityMatrix, postselect_state

ACCURACY_WARN_EPS = 0.2
_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


class ParseError(ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.message = message
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}" + (f", col {column}" if column is not None else "") + ": "
        super().__init__(where + message)


class ValidationError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentSpec:
    elements: tuple[Element, ...]
    max_order: int = 2
    detection: DetectionPattern | None = None
    dephasing_gamma: float = 1.0
    name: str = field(default="", compare=False)

    @property
    def sources(self) -> list[SourceSpec]:
        return [e for e in self.elements if isinstance(e, SourceSpec)]

    @property
    def phases(self) -> list[PhaseSpec]:
        return [e for e in self.elements if isinstance(e, PhaseSpec)]

    def build_state(self, prune: float | None = None) -> KetExpansion:
        return run_pipeline(self.elements, self.max_order, prune=prune)

    def postselected(self) -> TwoQubitDensityMatrix:
        if self.detection is None:
            raise ValidationError("spec has no detect statement")
        return postselect_state(self.build_state(), self.detection, self.dephasing_gamma)

    def with_overrides(self, order: int | None = None, gamma: float | None = None) -> "ExperimentSpec":
        out = self
        if order is not None:
            if order < 0:
                raise ValidationError("order must be >= 0")
            out = replace(out, max_order=int(order))
        if gamma is not None:
            if not 0.0 <= gamma <= 1.0:
                raise ValidationError("gamma must lie in [0, 1]")
            out = replace(out, dephasing_gamma=float(gamma))
        return out

    def with_phase(self, value: float, index: int = 0) -> "ExperimentSpec":
        """Copy with the ``index``-th phase element set to ``value`` radians."""
        positions = [k for k, e in enumerate(self.elements) if isinstance(e, PhaseSpec)]
        if not positions:
            raise ValidationError("spec has no phase element to scan")
        k = positions[index]
        els = list(self.elements)
        els[k] = replace(els[k], phi=float(value))
        return replace(self, elements=tuple(els))


def _mode(text: str, line: int, col: int) -> ModeLabel:
    path, sep, pol = text.partition(":")
    try:
        if not sep:
            raise ValueError
        return ModeLabel.of(int(path), Pol.parse(pol))
    except ValueError:
        raise ParseError(f"bad mode {text!r} (expected <path>:<H|V>)", line, col) from None


def _float(text: str, key: str, line: int, col: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"{key}: not a number: {text!r}", line, col) from None
    if not math.isfinite(value):
        raise ParseError(f"{key}: must be finite", line, col)
    return value


def _int(text: str, key: str, line: int, col: int) -> int:
    try:
        return int(text)
    except ValueError:
        raise ParseError(f"{key}: not an integer: {text!r}", line, col) from None


def _tokens(raw: str) -> list[tuple[str, int]]:
    """Whitespace tokens with 1-based start columns."""
    return [(m.group(), m.start() + 1) for m in re.finditer(r"\S+", raw)]


def _kv(tokens, allowed: set[str], required: set[str], line: int) -> dict[str, tuple[str, int]]:
    out: dict[str, tuple[str, int]] = {}
    for tok, col in tokens:
        key, sep, value = tok.partition("=")
        if not sep or not value:
            raise ParseError(f"expected key=value, got {tok!r}", line, col)
        if key not in allowed:
            raise ParseError(f"unknown key {key!r}", line, col)
        if key in out:
            raise ParseError(f"duplicate key {key!r}", line, col)
        out[key] = (value, col + len(key) + 1)
    missing = sorted(required - out.keys())
    if missing:
        raise ParseError(f"missing {', '.join(missing)}", line)
    return out


def parse(text: str, name: str = "") -> ExperimentSpec:
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    elements: list[Element] = []
    order: int | None = None
    gamma: float | None = None
    clauses: dict[int, Constraint] = {}
    detect_seen = False
    source_names: dict[str, int] = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        raw = raw.split("#", 1)[0]
        toks = _tokens(raw)
        if not toks:
            continue
        (keyword, kcol), args = toks[0], toks[1:]
        if keyword == "source":
            if not args:
                raise ParseError("source needs a name", lineno, kcol)
            sname, ncol = args[0]
            if not _NAME.match(sname):
                raise ParseError(f"bad source name {sname!r}", lineno, ncol)
            kv = _kv(args[1:], {"signal", "idler", "eps", "phase"},
                     {"signal", "idler", "eps"}, lineno)
            signal = _mode(kv["signal"][0], lineno, kv["signal"][1])
            idler = _mode(kv["idler"][0], lineno, kv["idler"][1])
            eps = _float(kv["eps"][0], "eps", lineno, kv["eps"][1])
            pump = _float(kv["phase"][0], "phase", lineno, kv["phase"][1]) if "phase" in kv else 0.0
            if sname in source_names:
                raise ValidationError(
                    f"line {lineno}: duplicate source name {sname!r} "
                    f"(first defined on line {source_names[sname]})")
            source_names[sname] = lineno
            if abs(eps) >= PERTURBATIVE_LIMIT:
                raise ValidationError(
                    f"line {lineno}: source {sname}: |eps| = {abs(eps):g} must be < {PERTURBATIVE_LIMIT}")
            try:
                elements.append(SourceSpec(sname, signal, idler, eps, pump))
            except ValueError as exc:
                raise ValidationError(f"line {lineno}: {exc}") from None
        elif keyword == "rotator":
            kv = _kv(args, {"path"}, {"path"}, lineno)
            path = _int(kv["path"][0], "path", lineno, kv["path"][1])
            if path < 1:
                raise ParseError("path must be >= 1", lineno, kv["path"][1])
            elements.append(RotatorSpec(path))
        elif keyword == "phase":
            kv = _kv(args, {"mode", "value"}, {"mode", "value"}, lineno)
            elements.append(PhaseSpec(_mode(kv["mode"][0], lineno, kv["mode"][1]),
                                      _float(kv["value"][0], "value", lineno, kv["value"][1])))
        elif keyword in ("order", "gamma"):
            if len(args) != 1:
                raise ParseError(f"{keyword} takes exactly one value", lineno, kcol)
            if (order if keyword == "order" else gamma) is not None:
                raise ParseError(f"duplicate {keyword} statement", lineno, kcol)
            value, vcol = args[0]
            if keyword == "order":
                order = _int(value, "order", lineno, vcol)
                if order < 0:
                    raise ValidationError(f"line {lineno}: order must be >= 0")
            else:
                gamma = _float(value, "gamma", lineno, vcol)
                if not 0.0 <= gamma <= 1.0:
                    raise ValidationError(f"line {lineno}: gamma must lie in [0, 1]")
        elif keyword == "detect":
            detect_seen = True
            if not args:
                raise ParseError("detect needs at least one clause", lineno, kcol)
            for tok, col in args:
                path_txt, sep, cons = tok.partition("=")
                if not sep:
                    raise ParseError(f"expected <path>=<constraint>, got {tok!r}", lineno, col)
                path = _int(path_txt, "detect path", lineno, col)
                if path in clauses:
                    raise ParseError(f"path {path} listed twice in detect", lineno, col)
                try:
                    clauses[path] = Constraint.parse(cons)
                except ValueError as exc:
                    raise ParseError(str(exc), lineno, col + len(path_txt) + 1) from None
        else:
            raise ParseError(f"unknown keyword {keyword!r}", lineno, kcol)

    if not any(isinstance(e, SourceSpec) for e in elements):
        raise ParseError("no sources")

    detection = None
    if detect_seen:
        used = {p for e in elements for p in _element_paths(e)}
        for path in clauses:
            if path not in used:
                raise ValidationError(f"detect references path {path}, which no element uses")
        try:
            detection = DetectionPattern(clauses)
        except ValueError as exc:
            raise ValidationError(str(exc)) from None

    return ExperimentSpec(
        elements=tuple(elements),
        max_order=2 if order is None else order,
        detection=detection,
        dephasing_gamma=1.0 if gamma is None else gamma,
        name=name,
    )


def load(path: str | Path) -> ExperimentSpec:
    p = Path(path)
    return parse(p.read_bytes().decode("utf-8"), name=p.name)


def _element_paths(e: Element) -> Iterable[int]:
    if isinstance(e, SourceSpec):
        return (e.signal.path, e.idler.path)
    if isinstance(e, RotatorSpec):
        return (e.path,)
    return (e.mode.path,)


def _mode_text(m: ModeLabel) -> str:
    return f"{m.path}:{m.pol.name}"


def unparse(spec: ExperimentSpec) -> str:
    lines = []
    for e in spec.elements:
        if isinstance(e, SourceSpec):
            lines.append(f"source {e.name} signal={_mode_text(e.signal)} idler={_mode_text(e.idler)} "
                         f"eps={e.eps!r} phase={e.pump_phase!r}")
        elif isinstance(e, RotatorSpec):
            lines.append(f"rotator path={e.path}")
        else:
            lines.append(f"phase mode={_mode_text(e.mode)} value={e.phi!r}")
    lines.append(f"order {spec.max_order}")
    lines.append(f"gamma {spec.dephasing_gamma!r}")
    if spec.detection is not None:
        lines.append("detect " + " ".join(f"{p}={c}" for p, c in spec.detection.constraints.items()))
    return "\n".join(lines) + "\n"


def reachable_modes(elements: Iterable[Element]) -> set[ModeLabel]:
    """Modes that can carry a photon at the end of the pipeline."""
    reach: set[ModeLabel] = set()
    for e in elements:
        if isinstance(e, SourceSpec):
            reach |= {e.signal, e.idler}
        elif isinstance(e, RotatorSpec):
            reach = {ModeLabel(m.path, m.pol.flipped()) if m.path == e.path else m for m in reach}
    return reach


def validate(spec: ExperimentSpec) -> list[str]:
    warnings = []
    for src in spec.sources:
        if abs(src.eps) > ACCURACY_WARN_EPS:
            warnings.append(f"source {src.name}: |eps| = {abs(src.eps):g} > {ACCURACY_WARN_EPS}, "
                            "perturbative accuracy degraded")
    det = spec.detection
    if det is None:
        warnings.append("no detect statement; post-selection unavailable")
        return warnings
    reach = reachable_modes(spec.elements)
    for path, c in det.constraints.items():
        if c.kind is Kind.ANY:
            continue
        pols = (c.pol,) if c.pol is not None else (Pol.H, Pol.V)
        if not any(ModeLabel(path, p) in reach for p in pols):
            want = f"{c.pol.name} photons" if c.pol is not None else "photons"
            warnings.append(f"detect {path}={c}: no source feeds {want} into path {path}")
    for path in det.retained_paths:
        pols = [p.name for p in (Pol.H, Pol.V) if ModeLabel(path, p) in reach]
        if len(pols) == 1:
            warnings.append(f"retained path {path} only ever carries {pols[0]} photons; "
                            "no polarization degree of freedom")
    needed = math.ceil(det.min_photons / 2)
    if spec.max_order < needed:
        warnings.append(f"order {spec.max_order} is below the {needed} pairs the detect pattern needs")
    return warnings
