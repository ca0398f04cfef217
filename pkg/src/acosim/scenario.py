"""
Scenario files: INI text with [network], [thresholds] and [faults] sections.

Every key maps onto a field of :class:`SimulationConfig` or
:class:`Thresholds`; missing keys keep their defaults, so an empty file is
the default scenario. Faults are written one line per cell::

    [faults]
    0 = OvershootTilt
    7 = LimitedTilt:20
    14 = PowerHole, Rotated:30
"""
from __future__ import annotations

import configparser
import dataclasses
import logging
import re
import warnings
from dataclasses import dataclass

from .engine import Thresholds
from .sim import Fault, FaultKind, FaultSpec, SimulationConfig

log = logging.getLogger(__name__)

SECTIONS = ("network", "thresholds", "faults")
_NETWORK_FIELDS = {f.name: f for f in dataclasses.fields(SimulationConfig) if f.name != "thresholds"}
_THRESHOLD_FIELDS = {f.name: f for f in dataclasses.fields(Thresholds)}


class ScenarioError(ValueError):
    """Malformed or inconsistent scenario; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


class ScenarioWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Scenario:
    config: SimulationConfig
    faults: FaultSpec


def _key_lines(text: str) -> dict[tuple[str, str], int]:
    """Line number of each (section, key), mirroring configparser's grammar."""
    lines: dict[tuple[str, str], int] = {}
    section = None
    for no, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        if not s or s[0] in "#;":
            continue
        m = re.match(r"^\[(.+)\]$", s)
        if m:
            section = m.group(1).strip().lower()
        elif section is not None and not raw[0].isspace():
            key = re.split(r"[=:]", s, maxsplit=1)[0].strip().lower()
            lines.setdefault((section, key), no)
    return lines


def _section_lines(text: str) -> dict[str, int]:
    out = {}
    for no, raw in enumerate(text.splitlines(), start=1):
        m = re.match(r"^\s*\[(.+)\]\s*$", raw)
        if m:
            out.setdefault(m.group(1).strip().lower(), no)
    return out


def _convert(name: str, raw: str, default):
    raw = raw.strip()
    if isinstance(default, bool):
        low = raw.lower()
        if low in ("1", "yes", "true", "on"):
            return True
        if low in ("0", "no", "false", "off"):
            return False
        raise ValueError(f"{name} expects a boolean, got {raw!r}")
    if isinstance(default, int):
        try:
            return int(raw)
        except ValueError:
            raise ValueError(f"{name} expects an integer, got {raw!r}") from None
    if isinstance(default, float):
        try:
            return float(raw)
        except ValueError:
            raise ValueError(f"{name} expects a number, got {raw!r}") from None
    if isinstance(default, tuple):
        try:
            return tuple(int(p) for p in raw.replace(" ", "").split(",") if p)
        except ValueError:
            raise ValueError(f"{name} expects a comma-separated integer list, got {raw!r}") from None
    return raw


def _default(f: dataclasses.Field):
    return f.default_factory() if f.default is dataclasses.MISSING else f.default


def _parse_faults(items, key_line) -> FaultSpec:
    kinds = {k.value.lower(): k for k in FaultKind}
    faults = []
    for key, value in items:
        line = key_line("faults", key)
        try:
            cell = int(key)
        except ValueError:
            raise ScenarioError(f"fault key {key!r} is not a cell id", line) from None
        for part in value.split(","):
            part = part.strip()
            if not part:
                continue
            name, _, arg = part.partition(":")
            kind = kinds.get(name.strip().lower())
            if kind is None:
                raise ScenarioError(
                    f"unknown fault kind {name.strip()!r}; expected one of "
                    + ", ".join(k.value for k in FaultKind), line)
            try:
                val = float(arg) if arg.strip() else None
            except ValueError:
                raise ScenarioError(f"fault value {arg.strip()!r} is not a number", line) from None
            faults.append(Fault(cell, kind, val))
    return FaultSpec(tuple(faults))


def parse_scenario(text: str, strict: bool = True) -> Scenario:
    """Parse scenario text into a validated config and fault list.

    With ``strict`` unknown sections or keys raise; otherwise they are
    reported through :class:`ScenarioWarning` and ignored.
    """
    parser = configparser.ConfigParser(interpolation=None, strict=True,
                                       inline_comment_prefixes=("#", ";"))
    parser.optionxform = str.lower
    try:
        parser.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ScenarioError("content before the first [section] header", exc.lineno) from None
    except configparser.DuplicateSectionError as exc:
        raise ScenarioError(f"section [{exc.section}] appears twice", exc.lineno) from None
    except configparser.DuplicateOptionError as exc:
        raise ScenarioError(f"key {exc.option!r} repeated in [{exc.section}]", exc.lineno) from None
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ScenarioError("unparseable line (expected 'key = value')", line) from None

    lines = _key_lines(text)
    sec_lines = _section_lines(text)

    def key_line(section, key):
        return lines.get((section, key))

    def unknown(msg, line):
        if strict:
            raise ScenarioError(msg, line)
        warnings.warn(f"line {line}: {msg}" if line else msg, ScenarioWarning, stacklevel=3)

    for section in parser.sections():
        if section.lower() not in SECTIONS:
            unknown(f"unknown section [{section}]", sec_lines.get(section.lower()))

    def collect(section, fields):
        values = {}
        if not parser.has_section(section):
            return values
        for key, raw in parser.items(section):
            line = key_line(section, key)
            if key not in fields:
                unknown(f"unknown key {key!r} in [{section}]", line)
                continue
            try:
                values[key] = _convert(key, raw, _default(fields[key]))
            except ValueError as exc:
                raise ScenarioError(str(exc), line) from None
        return values

    net_values = collect("network", _NETWORK_FIELDS)
    th_values = collect("thresholds", _THRESHOLD_FIELDS)
    try:
        thresholds = Thresholds(**th_values)
        cfg = SimulationConfig(thresholds=thresholds, **net_values)
    except ValueError as exc:
        raise ScenarioError(f"invalid scenario: {exc}") from None

    faults = FaultSpec()
    if parser.has_section("faults"):
        faults = _parse_faults(parser.items("faults"), key_line)
        for f in faults:
            if not 0 <= f.cell_id < cfg.n_cells:
                raise ScenarioError(
                    f"fault targets cell {f.cell_id}, but cell ids run 0..{cfg.n_cells - 1}",
                    key_line("faults", str(f.cell_id)))
    return Scenario(cfg, faults)


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(str(v) for v in value)
    return str(value)


def serialize_scenario(cfg: SimulationConfig, faults: FaultSpec = FaultSpec()) -> str:
    """Scenario text that parses back to an equal (config, faults) pair."""
    out = ["[network]"]
    out += [f"{name} = {_format(getattr(cfg, name))}" for name in _NETWORK_FIELDS]
    out += ["", "[thresholds]"]
    out += [f"{name} = {_format(getattr(cfg.thresholds, name))}" for name in _THRESHOLD_FIELDS]
    out += ["", "[faults]"]
    by_cell: dict[int, list[str]] = {}
    for f in faults:
        tag = f.kind.value if f.value is None else f"{f.kind.value}:{f.value!r}"
        by_cell.setdefault(f.cell_id, []).append(tag)
    out += [f"{cell} = {', '.join(tags)}" for cell, tags in by_cell.items()]
    return "\n".join(out) + "\n"


def load_scenario(path, strict: bool = True) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read(), strict=strict)
