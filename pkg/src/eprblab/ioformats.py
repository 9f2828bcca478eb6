"""File formats: event streams (JSON Lines), pair files, tally tables,
sweep CSVs, source configs, feasibility table files, raw station logs,
and run manifests.

Writers are atomic (temp file in the same directory, then rename) and
deterministic: the same data produces the same bytes.  Readers validate
eagerly and raise FormatError with a 1-based line number wherever a line
is attributable.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

import numpy as np

from . import __version__ as _version
from .errors import ConfigParseError, FormatError
from .feasibility import PairwiseTables, _as_fraction
from .model import (
    CELL_FROM_NAME,
    CELL_NAMES,
    CELLS,
    ISLANDS,
    SETTING_LABELS,
    DetectionEvent,
    EventStream,
    PairRecord,
    Setting,
    TallyTable,
    WignerDomainDistribution,
    all_domain_keys,
    domain_key_from_string,
    domain_key_to_string,
)
from .sources import SourceConfig
from .stats import SweepRow

EVENT_KEYS = ("island", "t_ns", "setting", "outcome")
PAIR_KEYS = (
    "t_left_ns",
    "t_right_ns",
    "setting_left",
    "setting_right",
    "outcome_left",
    "outcome_right",
    "window_ns",
)
SWEEP_HEADER = "window_ns,pairs,statistic,stderr,violated"
EMPTY_CELL_MARKER = "EmptyCell"


def atomic_write_text(path: str, text: str) -> None:
    """Write text to path via a same-directory temp file and rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=os.path.basename(path) + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return "sha256:" + digest.hexdigest()


# ---------------------------------------------------------------------------
# event streams


def write_events(path: str, stream: EventStream) -> None:
    lines = []
    labels = stream.labels
    for t, si, oc in zip(stream.t_ns.tolist(), stream.setting_idx.tolist(), stream.outcome.tolist()):
        lines.append(
            json.dumps(
                {"island": stream.island, "t_ns": t, "setting": labels[si], "outcome": oc},
                separators=(",", ":"),
            )
        )
    atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))


def _format_error(path: str, line: int, message: str) -> FormatError:
    return FormatError(message, line=line, path=path)


def read_events(path: str) -> EventStream:
    """Parse one station's event file.

    Every line must be a JSON object with exactly the keys island, t_ns,
    setting, outcome; one island per file; t_ns a nonnegative integer,
    strictly increasing down the file.
    """
    islands: list[str] = []
    times: list[int] = []
    labels: list[str] = []
    outcomes: list[int] = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            text = raw.strip()
            if not text:
                continue
            try:
                obj = json.loads(text)
            except json.JSONDecodeError as exc:
                raise _format_error(path, lineno, f"invalid JSON: {exc.msg}")
            if not isinstance(obj, dict) or set(obj) != set(EVENT_KEYS):
                raise _format_error(path, lineno, f"event must have exactly the keys {list(EVENT_KEYS)}")
            island, t_ns, setting, outcome = (obj[k] for k in EVENT_KEYS)
            if island not in ISLANDS:
                raise _format_error(path, lineno, f"island must be 'T' or 'L', got {island!r}")
            if islands and island != islands[0]:
                raise _format_error(
                    path, lineno, f"mixed islands: file started with {islands[0]!r}, line has {island!r}"
                )
            if not isinstance(t_ns, int) or isinstance(t_ns, bool) or t_ns < 0:
                raise _format_error(path, lineno, f"t_ns must be a nonnegative integer, got {t_ns!r}")
            if times and t_ns <= times[-1]:
                raise _format_error(
                    path, lineno, f"timestamps must be strictly increasing, got {t_ns} after {times[-1]}"
                )
            if setting not in SETTING_LABELS:
                raise _format_error(path, lineno, f"setting must be one of {list(SETTING_LABELS)}, got {setting!r}")
            if outcome not in (1, -1):
                raise _format_error(path, lineno, f"outcome must be 1 or -1, got {outcome!r}")
            islands.append(island)
            times.append(t_ns)
            labels.append(setting)
            outcomes.append(outcome)
    if not islands:
        raise FormatError("event file is empty", path=path)
    menu = tuple(sorted(set(labels)))
    index = {lab: i for i, lab in enumerate(menu)}
    return EventStream(
        island=islands[0],
        labels=menu,
        t_ns=np.asarray(times, dtype=np.int64),
        setting_idx=np.asarray([index[lab] for lab in labels], dtype=np.int16),
        outcome=np.asarray(outcomes, dtype=np.int8),
    )


# ---------------------------------------------------------------------------
# pair files


def write_pairs_indexed(
    path: str,
    left: EventStream,
    right: EventStream,
    left_idx: np.ndarray,
    right_idx: np.ndarray,
    window_ns: int,
) -> None:
    lines = []
    lt = left.t_ns[left_idx].tolist()
    rt = right.t_ns[right_idx].tolist()
    ls = left.setting_idx[left_idx].tolist()
    rs = right.setting_idx[right_idx].tolist()
    lo = left.outcome[left_idx].tolist()
    ro = right.outcome[right_idx].tolist()
    for tl, tr, sl, sr, ol, orr in zip(lt, rt, ls, rs, lo, ro):
        lines.append(
            json.dumps(
                {
                    "t_left_ns": tl,
                    "t_right_ns": tr,
                    "setting_left": left.labels[sl],
                    "setting_right": right.labels[sr],
                    "outcome_left": ol,
                    "outcome_right": orr,
                    "window_ns": window_ns,
                },
                separators=(",", ":"),
            )
        )
    atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))


def write_pairs(path: str, pairs: Iterable[PairRecord]) -> None:
    lines = []
    for p in pairs:
        lines.append(
            json.dumps(
                {
                    "t_left_ns": p.left.time_ns,
                    "t_right_ns": p.right.time_ns,
                    "setting_left": p.left.setting_label,
                    "setting_right": p.right.setting_label,
                    "outcome_left": p.left.outcome,
                    "outcome_right": p.right.outcome,
                    "window_ns": p.window_ns,
                },
                separators=(",", ":"),
            )
        )
    atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))


def read_pairs(path: str) -> list[PairRecord]:
    out: list[PairRecord] = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            text = raw.strip()
            if not text:
                continue
            try:
                obj = json.loads(text)
            except json.JSONDecodeError as exc:
                raise _format_error(path, lineno, f"invalid JSON: {exc.msg}")
            if not isinstance(obj, dict) or set(obj) != set(PAIR_KEYS):
                raise _format_error(path, lineno, f"pair must have exactly the keys {list(PAIR_KEYS)}")
            try:
                left = DetectionEvent("T", obj["t_left_ns"], obj["setting_left"], obj["outcome_left"])
                right = DetectionEvent("L", obj["t_right_ns"], obj["setting_right"], obj["outcome_right"])
                out.append(PairRecord(left, right, obj["window_ns"]))
            except (ValueError, TypeError) as exc:
                raise _format_error(path, lineno, str(exc))
    return out


# ---------------------------------------------------------------------------
# tally files


def _pair_key_string(pair: tuple[str, str]) -> str:
    return f"{pair[0]};{pair[1]}"


def _parse_pair_key(text: str, path: str) -> tuple[str, str]:
    parts = text.split(";")
    if len(parts) != 2 or any(p not in SETTING_LABELS for p in parts):
        raise FormatError(f"bad setting-pair key {text!r}, expected 'x;y' with labels from {list(SETTING_LABELS)}", path=path)
    return (parts[0], parts[1])


def write_tally(path: str, tally: TallyTable) -> None:
    doc = {
        _pair_key_string(pair): {CELL_NAMES[c]: tally.counts[pair][c] for c in CELLS}
        for pair in sorted(tally.counts)
    }
    atomic_write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def read_tally(path: str) -> TallyTable:
    with open(path, "r", encoding="utf-8") as handle:
        try:
            doc = json.load(handle)
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid JSON: {exc.msg}", line=exc.lineno, path=path)
    if not isinstance(doc, dict):
        raise FormatError("tally file must be a JSON object keyed by 'x;y'", path=path)
    counts: dict[tuple[str, str], dict[tuple[int, int], int]] = {}
    for key, cells in doc.items():
        pair = _parse_pair_key(key, path)
        if not isinstance(cells, dict) or set(cells) != set(CELL_FROM_NAME):
            raise FormatError(f"table {key!r} must have exactly the cells {sorted(CELL_FROM_NAME)}", path=path)
        table = {}
        for name, value in cells.items():
            if not isinstance(value, int) or isinstance(value, bool) or value < 0:
                raise FormatError(f"table {key!r} cell {name!r} must be a nonnegative integer, got {value!r}", path=path)
            table[CELL_FROM_NAME[name]] = value
        counts[pair] = table
    return TallyTable(counts)


# ---------------------------------------------------------------------------
# sweep CSV


def write_sweep_csv(path: str, rows: Iterable[SweepRow]) -> None:
    lines = [SWEEP_HEADER]
    for row in rows:
        if row.statistic is None:
            lines.append(f"{row.window_ns},{row.pairs},{EMPTY_CELL_MARKER},{EMPTY_CELL_MARKER},{EMPTY_CELL_MARKER}")
        else:
            flag = "true" if row.violated else "false"
            lines.append(f"{row.window_ns},{row.pairs},{row.statistic!r},{row.stderr!r},{flag}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_sweep_csv(path: str) -> list[SweepRow]:
    rows: list[SweepRow] = []
    with open(path, "r", encoding="utf-8") as handle:
        lines = [ln.rstrip("\n") for ln in handle]
    if not lines or lines[0] != SWEEP_HEADER:
        raise FormatError(f"sweep file must start with the header {SWEEP_HEADER!r}", line=1, path=path)
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 5:
            raise _format_error(path, lineno, f"expected 5 comma-separated fields, got {len(parts)}")
        try:
            window = int(parts[0])
            pairs = int(parts[1])
            if parts[2] == EMPTY_CELL_MARKER:
                rows.append(SweepRow(window, pairs, None, None, None))
            else:
                rows.append(SweepRow(window, pairs, float(parts[2]), float(parts[3]), parts[4] == "true"))
        except ValueError as exc:
            raise _format_error(path, lineno, str(exc))
    return rows


# ---------------------------------------------------------------------------
# source configs

_CONFIG_KEYS = (
    "kind",
    "settings",
    "seed",
    "emission_period_ns",
    "jitter_ns",
    "total_pairs",
    "pairs_per_combination",
    "convention",
    "max_delay_ns",
    "delay_exponent",
    "domain_weights",
    "station_t_labels",
    "station_l_labels",
)


def _parse_domain_weights(obj, labels: list[str]) -> WignerDomainDistribution:
    if not isinstance(obj, dict) or not obj:
        raise ConfigParseError("domain_weights must be a nonempty object of 'sss;ttt' keys")
    try:
        keys = [domain_key_from_string(k) for k in obj]
    except ValueError as exc:
        raise ConfigParseError(f"domain_weights: {exc}")
    n = len(keys[0]) // 2
    if any(len(k) != 2 * n for k in keys):
        raise ConfigParseError("domain_weights keys must all describe the same number of settings")
    settings = SETTING_LABELS[:n]
    try:
        weights = {k: _as_fraction(v) for k, v in zip(keys, obj.values())}
        return WignerDomainDistribution.from_partial(weights, settings=settings)
    except ValueError as exc:
        raise ConfigParseError(f"domain_weights: {exc}")


def config_from_dict(doc: Mapping, seed_override: int | None = None) -> SourceConfig:
    if not isinstance(doc, Mapping):
        raise ConfigParseError("config must be a JSON object")
    unknown = sorted(set(doc) - set(_CONFIG_KEYS))
    if unknown:
        raise ConfigParseError(f"unknown config field(s): {unknown}")
    missing = [k for k in ("kind", "settings", "seed", "emission_period_ns") if k not in doc]
    if missing:
        raise ConfigParseError(f"missing required config field(s): {missing}")
    raw_settings = doc["settings"]
    if not isinstance(raw_settings, list) or not raw_settings:
        raise ConfigParseError("settings must be a nonempty list of {label, angle_deg} objects")
    settings = []
    for i, s in enumerate(raw_settings):
        if not isinstance(s, dict) or set(s) != {"label", "angle_deg"}:
            raise ConfigParseError(f"settings[{i}] must be an object with exactly label and angle_deg")
        try:
            settings.append(Setting(s["label"], float(s["angle_deg"])))
        except (ValueError, TypeError) as exc:
            raise ConfigParseError(f"settings[{i}]: {exc}")
    labels = [s.label for s in settings]

    weights = None
    if doc.get("domain_weights") is not None:
        weights = _parse_domain_weights(doc["domain_weights"], labels)

    def menu(key):
        v = doc.get(key)
        if v is None:
            return None
        if not isinstance(v, list) or not all(isinstance(x, str) for x in v):
            raise ConfigParseError(f"{key} must be a list of setting labels")
        return tuple(v)

    seed = doc["seed"] if seed_override is None else seed_override
    try:
        return SourceConfig(
            kind=doc["kind"],
            settings=tuple(settings),
            seed=seed,
            emission_period_ns=doc["emission_period_ns"],
            jitter_ns=doc.get("jitter_ns", 0),
            total_pairs=doc.get("total_pairs"),
            pairs_per_combination=doc.get("pairs_per_combination"),
            convention=doc.get("convention", "anti"),
            max_delay_ns=doc.get("max_delay_ns"),
            delay_exponent=doc.get("delay_exponent"),
            domain_weights=weights,
            station_t_labels=menu("station_t_labels"),
            station_l_labels=menu("station_l_labels"),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigParseError(str(exc))


def load_config(path: str, seed_override: int | None = None) -> SourceConfig:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            doc = json.load(handle)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(f"config {path}: invalid JSON at line {exc.lineno}: {exc.msg}")
    return config_from_dict(doc, seed_override)


def config_to_dict(config: SourceConfig) -> dict:
    doc: dict = {
        "kind": config.kind,
        "settings": [{"label": s.label, "angle_deg": s.angle_deg} for s in config.settings],
        "seed": int(config.seed),
        "emission_period_ns": config.emission_period_ns,
        "jitter_ns": config.jitter_ns,
        "convention": config.convention,
    }
    if config.total_pairs is not None:
        doc["total_pairs"] = config.total_pairs
    if config.pairs_per_combination is not None:
        doc["pairs_per_combination"] = config.pairs_per_combination
    if config.max_delay_ns is not None:
        doc["max_delay_ns"] = config.max_delay_ns
    if config.delay_exponent is not None:
        doc["delay_exponent"] = config.delay_exponent
    if config.domain_weights is not None:
        doc["domain_weights"] = {
            domain_key_to_string(k): str(w) for k, w in config.domain_weights.weights.items() if w != 0
        }
    if config.station_t_labels is not None:
        doc["station_t_labels"] = list(config.station_t_labels)
    if config.station_l_labels is not None:
        doc["station_l_labels"] = list(config.station_l_labels)
    return doc


def save_config(path: str, config: SourceConfig) -> None:
    atomic_write_text(path, json.dumps(config_to_dict(config), indent=2) + "\n")


# ---------------------------------------------------------------------------
# feasibility table files


def read_tables(path: str) -> tuple[PairwiseTables, str | None]:
    """Read pairwise tables for the feasibility decision.

    Two layouts are accepted: a tally file (integer counts, normalized
    here), or exact probabilities given as 'p/q' strings, integers, or
    decimal numbers.  Either layout may be wrapped in an object
    {"convention": ..., "tables": {...}} to pin the reporting convention;
    the returned convention is None when the file does not state one.
    """
    with open(path, "r", encoding="utf-8") as handle:
        try:
            doc = json.load(handle)
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid JSON: {exc.msg}", line=exc.lineno, path=path)
    convention = None
    if isinstance(doc, dict) and "tables" in doc:
        extra = set(doc) - {"tables", "convention"}
        if extra:
            raise FormatError(f"unknown top-level key(s) {sorted(extra)}", path=path)
        if "convention" in doc:
            convention = doc["convention"]
            if convention not in ("equal", "anti"):
                raise FormatError(f"convention must be 'equal' or 'anti', got {convention!r}", path=path)
        doc = doc["tables"]
    if not isinstance(doc, dict) or not doc:
        raise FormatError("tables must be a nonempty JSON object keyed by 'x;y'", path=path)

    parsed: dict[tuple[str, str], dict] = {}
    all_int = True
    for key, cells in doc.items():
        pair = _parse_pair_key(key, path)
        if not isinstance(cells, dict) or set(cells) != set(CELL_FROM_NAME):
            raise FormatError(f"table {key!r} must have exactly the cells {sorted(CELL_FROM_NAME)}", path=path)
        table = {}
        for name, value in cells.items():
            if not isinstance(value, int) or isinstance(value, bool):
                all_int = False
            table[CELL_FROM_NAME[name]] = value
        parsed[pair] = table

    try:
        if all_int:
            counts = {}
            for pair, cells in parsed.items():
                for c, v in cells.items():
                    if v < 0:
                        raise ValueError(f"cell count {v} is negative")
                counts[pair] = cells
            tables = PairwiseTables.from_tally(TallyTable(counts))
        else:
            tables = PairwiseTables(
                {pair: {c: _as_fraction(v) for c, v in cells.items()} for pair, cells in parsed.items()}
            )
    except ValueError as exc:
        raise FormatError(str(exc), path=path)
    return tables, convention


# ---------------------------------------------------------------------------
# raw station logs


def read_raw_station(path: str, island: str) -> EventStream:
    """Parse a whitespace-separated raw log with lines 't_ns setting outcome'."""
    if island not in ISLANDS:
        raise ValueError(f"island must be 'T' or 'L', got {island!r}")
    times: list[int] = []
    labels: list[str] = []
    outcomes: list[int] = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            text = raw.strip()
            if not text or text.startswith("#"):
                continue
            parts = text.split()
            if len(parts) != 3:
                raise _format_error(path, lineno, f"expected 't_ns setting outcome', got {len(parts)} field(s)")
            t_text, setting, o_text = parts
            try:
                t_ns = int(t_text)
            except ValueError:
                raise _format_error(path, lineno, f"t_ns must be an integer, got {t_text!r}")
            if t_ns < 0:
                raise _format_error(path, lineno, f"t_ns must be nonnegative, got {t_ns}")
            if times and t_ns <= times[-1]:
                raise _format_error(
                    path, lineno, f"timestamps must be strictly increasing, got {t_ns} after {times[-1]}"
                )
            if setting not in SETTING_LABELS:
                raise _format_error(path, lineno, f"setting must be one of {list(SETTING_LABELS)}, got {setting!r}")
            if o_text in ("1", "+1"):
                outcome = 1
            elif o_text == "-1":
                outcome = -1
            else:
                raise _format_error(path, lineno, f"outcome must be +1, 1, or -1, got {o_text!r}")
            times.append(t_ns)
            labels.append(setting)
            outcomes.append(outcome)
    if not times:
        raise FormatError("raw station log is empty", path=path)
    menu = tuple(sorted(set(labels)))
    index = {lab: i for i, lab in enumerate(menu)}
    return EventStream(
        island=island,
        labels=menu,
        t_ns=np.asarray(times, dtype=np.int64),
        setting_idx=np.asarray([index[lab] for lab in labels], dtype=np.int16),
        outcome=np.asarray(outcomes, dtype=np.int8),
    )


# ---------------------------------------------------------------------------
# run manifests


@dataclass(frozen=True)
class RunManifest:
    """Provenance record written next to every file a command produces."""

    command: str
    seed: int | None = None
    config_digest: str | None = None
    inputs: Mapping[str, str] = field(default_factory=dict)
    outputs: Mapping[str, str] = field(default_factory=dict)
    parameters: Mapping[str, object] = field(default_factory=dict)
    tool_version: str = _version
    wall_time_s: float = 0.0

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "seed": self.seed,
            "config_digest": self.config_digest,
            "inputs": dict(sorted(self.inputs.items())),
            "outputs": dict(sorted(self.outputs.items())),
            "parameters": dict(sorted(self.parameters.items())),
            "tool_version": self.tool_version,
            "wall_time_s": self.wall_time_s,
        }


def write_manifest(path: str, manifest: RunManifest) -> None:
    atomic_write_text(path, json.dumps(manifest.to_dict(), indent=2) + "\n")


def read_manifest(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as handle:
        try:
            return json.load(handle)
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid JSON: {exc.msg}", line=exc.lineno, path=path)
