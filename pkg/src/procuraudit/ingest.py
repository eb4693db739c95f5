"""Parsing of contract CSV files and duplicate collapse.

Contract records follow a fixed 28-column layout.  Every column is bound to a
CSV header through :class:`SchemaConfig`; cells that fail to parse become
``None`` and produce a :class:`Diagnostic` instead of dropping the row.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import re
from dataclasses import dataclass, field
from datetime import date, datetime
from pathlib import Path
from typing import IO, Iterable, Sequence

from .errors import ParseError, SchemaError

logger = logging.getLogger(__name__)

TEXT_FIELDS = (
    "NIVEL",
    "ORDEN",
    "NIT_ENTIDAD",
    "NOMBRE_ENTIDAD",
    "TIPO_MODALIDAD",
    "NUMERO_CONSTANCIA",
    "ID_OBJETO_CONTRATO",
    "OBJETO_CONTRATO",
    "DETALLE_OBJETO",
    "TIPO_CONTRATO",
    "ESTADO_PROCESO",
    "NOMBRE_CONTRATISTA",
    "NIT_CONTRATISTA",
)
AMOUNT_FIELDS = (
    "CUANTIA",
    "VALOR_DEFINITIVO",
    "VALOR_CONTRATO",
    "VALOR_ADICIONES",
    "VALOR_TOTAL",
)
DATE_FIELDS = (
    "FECHACREACION",
    "FECHAESTADOBORRADOR",
    "FECHAESTADODESCARTADO",
    "FECHAESTADOCONVOCADO",
    "FECHAESTADOADJUDICADO",
    "FECHAESTADOTERMANORMALDESPCONV",
    "FECHAESTADOTERMANORMALDESPCONV_1",
    "FECHAESTADOTERMANORMALDESPCONV_2",
    "FECHAESTADOTERMANORMALDESPCONV_3",
    "FECHA_FIRMA_CONTRATO",
)

# Column order of the source extract.
FIELDS = (
    "NIVEL",
    "ORDEN",
    "NIT_ENTIDAD",
    "NOMBRE_ENTIDAD",
    "TIPO_MODALIDAD",
    "NUMERO_CONSTANCIA",
    "ID_OBJETO_CONTRATO",
    "OBJETO_CONTRATO",
    "DETALLE_OBJETO",
    "TIPO_CONTRATO",
    "CUANTIA",
    "VALOR_DEFINITIVO",
    "FECHACREACION",
    "FECHAESTADOBORRADOR",
    "FECHAESTADODESCARTADO",
    "FECHAESTADOCONVOCADO",
    "FECHAESTADOADJUDICADO",
    "FECHAESTADOTERMANORMALDESPCONV",
    "FECHAESTADOTERMANORMALDESPCONV_1",
    "FECHAESTADOTERMANORMALDESPCONV_2",
    "FECHAESTADOTERMANORMALDESPCONV_3",
    "ESTADO_PROCESO",
    "NOMBRE_CONTRATISTA",
    "NIT_CONTRATISTA",
    "FECHA_FIRMA_CONTRATO",
    "VALOR_CONTRATO",
    "VALOR_ADICIONES",
    "VALOR_TOTAL",
)
assert len(FIELDS) == 28 and set(FIELDS) == set(TEXT_FIELDS + AMOUNT_FIELDS + DATE_FIELDS)

REQUIRED_FIELDS = (
    "ID_OBJETO_CONTRATO",
    "FECHACREACION",
    "CUANTIA",
    "VALOR_DEFINITIVO",
    "DETALLE_OBJETO",
)

DEFAULT_HEADERS = {name: name for name in FIELDS}
DEFAULT_HEADERS["VALOR_TOTAL"] = "VALOR TOTAL"

DEFAULT_DATE_FORMATS = ("YYYY-MM-DD", "DD/MM/YYYY", "MM/DD/YYYY hh:mm:ss")

_PATTERN_TOKENS = {
    "YYYY": "%Y",
    "MM": "%m",
    "DD": "%d",
    "hh": "%H",
    "mm": "%M",
    "ss": "%S",
}
_PATTERN_RE = re.compile("|".join(_PATTERN_TOKENS))


def to_strptime(pattern: str) -> str:
    """Translate a ``YYYY-MM-DD`` style pattern into a strptime format.

    Patterns that already contain ``%`` directives are returned unchanged.
    """
    if "%" in pattern:
        return pattern
    return _PATTERN_RE.sub(lambda m: _PATTERN_TOKENS[m.group(0)], pattern)


@dataclass(frozen=True)
class SchemaConfig:
    column_map: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_HEADERS))
    date_formats: tuple[str, ...] = DEFAULT_DATE_FORMATS
    decimal_separator: str = "comma"

    def __post_init__(self):
        object.__setattr__(self, "date_formats", tuple(self.date_formats))
        unknown = set(self.column_map) - set(FIELDS)
        if unknown:
            raise SchemaError(f"unknown logical fields in column_map: {sorted(unknown)}")
        missing = [f for f in REQUIRED_FIELDS if f not in self.column_map]
        if missing:
            raise SchemaError(f"column_map must bind {missing}")
        headers = list(self.column_map.values())
        if len(set(headers)) != len(headers):
            dupes = sorted({h for h in headers if headers.count(h) > 1})
            raise SchemaError(f"CSV headers bound more than once: {dupes}")
        if not self.date_formats:
            raise SchemaError("date_formats must not be empty")
        if self.decimal_separator not in ("point", "comma"):
            raise SchemaError(
                f"decimal_separator must be 'point' or 'comma', got {self.decimal_separator!r}"
            )

    @classmethod
    def from_dict(cls, data: dict) -> SchemaConfig:
        kwargs = {}
        if "column_map" in data:
            kwargs["column_map"] = dict(data["column_map"])
        if "date_formats" in data:
            kwargs["date_formats"] = tuple(data["date_formats"])
        if "decimal_separator" in data:
            kwargs["decimal_separator"] = data["decimal_separator"]
        return cls(**kwargs)

    @classmethod
    def from_json(cls, path: str | Path) -> SchemaConfig:
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {
            "column_map": dict(self.column_map),
            "date_formats": list(self.date_formats),
            "decimal_separator": self.decimal_separator,
        }


@dataclass(frozen=True)
class RawContract:
    """One parsed contract row.  Attribute names are the lowercased field names."""

    row_index: int
    nivel: str | None = None
    orden: str | None = None
    nit_entidad: str | None = None
    nombre_entidad: str | None = None
    tipo_modalidad: str | None = None
    numero_constancia: str | None = None
    id_objeto_contrato: str | None = None
    objeto_contrato: str | None = None
    detalle_objeto: str | None = None
    tipo_contrato: str | None = None
    cuantia: float | None = None
    valor_definitivo: float | None = None
    fechacreacion: date | None = None
    fechaestadoborrador: date | None = None
    fechaestadodescartado: date | None = None
    fechaestadoconvocado: date | None = None
    fechaestadoadjudicado: date | None = None
    fechaestadotermanormaldespconv: date | None = None
    fechaestadotermanormaldespconv_1: date | None = None
    fechaestadotermanormaldespconv_2: date | None = None
    fechaestadotermanormaldespconv_3: date | None = None
    estado_proceso: str | None = None
    nombre_contratista: str | None = None
    nit_contratista: str | None = None
    fecha_firma_contrato: date | None = None
    valor_contrato: float | None = None
    valor_adiciones: float | None = None
    valor_total: float | None = None

    def get(self, name: str):
        """Value of a logical field by its schema name (e.g. ``"CUANTIA"``)."""
        return getattr(self, name.lower())

    @property
    def key(self) -> tuple[str | None, date | None]:
        return self.id_objeto_contrato, self.fechacreacion


@dataclass(frozen=True)
class Diagnostic:
    row: int
    column: str
    reason: str

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), ensure_ascii=False)


def parse_date(text: str | None, formats: Sequence[str] = DEFAULT_DATE_FORMATS) -> date | None:
    """Parse ``text`` with the first matching format; blank or unparseable gives None."""
    if text is None or not text.strip():
        return None
    text = text.strip()
    for fmt in formats:
        try:
            return datetime.strptime(text, to_strptime(fmt)).date()
        except ValueError:
            continue
    return None


def _amount(text: str | None, sep: str) -> tuple[float | None, str | None]:
    """Parse an amount, returning ``(value, failure_reason)``."""
    if text is None:
        return None, None
    s = text.strip().replace("$", "").replace(" ", "").replace(" ", "")
    if not s:
        return None, None
    if sep == "comma":
        s = s.replace(".", "").replace(",", ".")
    else:
        s = s.replace(",", "")
    try:
        value = float(s)
    except ValueError:
        return None, f"unparseable amount {text!r}"
    if value != value or value in (float("inf"), float("-inf")):
        return None, f"non-finite amount {text!r}"
    if value < 0:
        return None, f"negative amount {text!r}"
    return value, None


def parse_amount(text: str | None, sep: str = "comma") -> float | None:
    """Parse a peso amount; thousands separators are stripped, negatives rejected."""
    return _amount(text, sep)[0]


def parse_csv(
    stream: IO[bytes] | IO[str] | str | Path, cfg: SchemaConfig | None = None
) -> tuple[list[RawContract], list[Diagnostic]]:
    """Parse a contract CSV into records and per-cell diagnostics.

    Rows are never dropped.  ``row_index`` is the physical line on which the
    record ends (the header is line 1).

    Raises
    ------
    SchemaError
        If a header bound in ``cfg.column_map`` is absent.
    ParseError
        On structural problems (bad quoting, wrong field count).
    """
    cfg = cfg or SchemaConfig()
    if isinstance(stream, (str, Path)):
        with open(stream, "rb") as fh:
            return parse_csv(fh, cfg)
    if isinstance(stream, io.TextIOBase):
        text_stream = stream
    else:
        text_stream = io.TextIOWrapper(stream, encoding="utf-8", newline="")

    reader = csv.reader(text_stream, strict=True)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty file: header row required", line=1) from None
    except (csv.Error, UnicodeDecodeError) as exc:
        raise ParseError(str(exc), line=1) from exc
    header = [h.strip().lstrip("﻿") for h in header]
    positions = {}
    for name, col in cfg.column_map.items():
        if col not in header:
            raise SchemaError(f"header {col!r} (bound to {name}) not found in CSV")
        positions[name] = header.index(col)

    records: list[RawContract] = []
    diagnostics: list[Diagnostic] = []
    while True:
        try:
            row = next(reader)
        except StopIteration:
            break
        except (csv.Error, UnicodeDecodeError) as exc:
            raise ParseError(str(exc), line=reader.line_num) from exc
        line = reader.line_num
        if not row:
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, found {len(row)}", line=line)
        values = {"row_index": line}
        for name, pos in positions.items():
            cell = row[pos]
            attr = name.lower()
            if name in AMOUNT_FIELDS:
                value, reason = _amount(cell, cfg.decimal_separator)
                if reason:
                    diagnostics.append(Diagnostic(line, name, reason))
            elif name in DATE_FIELDS:
                value = parse_date(cell, cfg.date_formats)
                if value is None and cell.strip():
                    diagnostics.append(Diagnostic(line, name, f"unparseable date {cell!r}"))
            else:
                value = cell.strip() or None
            values[attr] = value
        records.append(RawContract(**values))
    logger.info("parsed %d rows with %d diagnostics", len(records), len(diagnostics))
    return records, diagnostics


def deduplicate(records: Iterable[RawContract]) -> tuple[list[RawContract], int]:
    """Collapse records sharing (contract id, creation date), keeping the first.

    The survivor of each key is the record with the smallest ``row_index``.
    Records whose id or creation date is null never merge.
    """
    records = list(records)
    first: dict[tuple, int] = {}
    for rec in records:
        if rec.id_objeto_contrato is None or rec.fechacreacion is None:
            continue
        k = rec.key
        if k not in first or rec.row_index < first[k]:
            first[k] = rec.row_index
    kept = [
        rec
        for rec in records
        if rec.id_objeto_contrato is None
        or rec.fechacreacion is None
        or first[rec.key] == rec.row_index
    ]
    return kept, len(records) - len(kept)


def format_amount(value: float | None, sep: str = "comma") -> str:
    if value is None:
        return ""
    text = repr(float(value))
    if text.endswith(".0"):
        text = text[:-2]
    return text.replace(".", ",") if sep == "comma" else text


def format_date(value: date | None, fmt: str) -> str:
    return "" if value is None else value.strftime(to_strptime(fmt))


def write_csv(records: Iterable[RawContract], out: IO[str], cfg: SchemaConfig | None = None) -> None:
    """Write records in canonical form: bound columns in source order.

    Amounts use the configured decimal separator without thousands grouping
    and dates use the first configured format, so the output re-parses to
    field-equal records under the same ``cfg``.
    """
    cfg = cfg or SchemaConfig()
    names = [f for f in FIELDS if f in cfg.column_map]
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow([cfg.column_map[f] for f in names])
    for rec in records:
        row = []
        for name in names:
            value = rec.get(name)
            if name in AMOUNT_FIELDS:
                row.append(format_amount(value, cfg.decimal_separator))
            elif name in DATE_FIELDS:
                row.append(format_date(value, cfg.date_formats[0]))
            else:
                row.append("" if value is None else value)
        writer.writerow(row)


def write_diagnostics(diagnostics: Iterable[Diagnostic], out: IO[str]) -> None:
    for d in diagnostics:
        out.write(d.to_json() + "\n")
