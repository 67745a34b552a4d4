"""Feasibility arithmetic for mechanical resonator platforms.

For a Duffing resonator of mass ``m``, frequency ``Omega_m = 2 pi f`` and
cubic stiffness ``beta`` the Kerr rate is ``g = 3 hbar beta / (8 m^2 Omega_m^2)``.
Squeezing by ``s`` boosts the nonlinear rate to ``g s^4`` and the thermal
decoherence rate to ``Gamma_d s^2``; they break even at ``s^2 = Gamma_d / g``.

The bundled device table lists ``g`` under a ``g/(2 pi)`` heading, but its
numbers are ``g`` in rad/s; the dB column is the plain ratio of the two
listed columns. :func:`required_squeezing_db` follows the table by default
and can additionally report the strict reading of the headings.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from importlib import resources
from math import floor, log10, pi
from pathlib import Path
from typing import Iterable, List, Optional, Union

from scipy.constants import hbar

from .errors import NonPositiveValue, SchemaError

REQUIRED_COLUMNS = ("name", "mass_kg", "freq_hz", "beta_n_per_m3", "damping_rate_hz")
OPTIONAL_COLUMNS = ("temperature_k", "gamma_m_hz", "citation")


@dataclass(frozen=True)
class PlatformRecord:
    name: str
    mass_kg: float
    freq_hz: float
    duffing_n_per_m3: float
    damping_rate_hz: float
    temperature_k: Optional[float] = None
    gamma_m_hz: Optional[float] = None
    citation: str = ""

    def __post_init__(self):
        for field_name in ("mass_kg", "freq_hz", "duffing_n_per_m3", "damping_rate_hz",
                           "temperature_k", "gamma_m_hz"):
            value = getattr(self, field_name)
            if value is None and field_name in ("temperature_k", "gamma_m_hz"):
                continue
            if not value > 0:
                raise NonPositiveValue(f"{self.name}: {field_name} must be positive, got {value!r}")


@dataclass(frozen=True)
class FeasibilityReport:
    name: str
    g_value: float
    squeezing_ratio: float
    squeezing_db: float
    # strict reading: g column is g/(2 pi) in Hz, so s^2 = Gamma_d/(2 pi) / (g/(2 pi))
    strict_g_hz: Optional[float] = None
    strict_squeezing_ratio: Optional[float] = None
    strict_squeezing_db: Optional[float] = None

    @property
    def rounded_db(self) -> float:
        return round_significant(self.squeezing_db, 2)


def round_significant(value: float, digits: int = 2) -> float:
    if value == 0:
        return 0.0
    return round(value, digits - 1 - int(floor(log10(abs(value)))))


def coupling_rate(m: float, freq_hz: float, beta: float) -> float:
    """Kerr rate ``3 hbar beta / (8 m^2 Omega_m^2)`` in rad/s, with ``Omega_m = 2 pi freq_hz``."""
    if not (m > 0 and freq_hz > 0):
        raise NonPositiveValue("mass and frequency must be positive")
    if beta < 0:
        raise NonPositiveValue("Duffing parameter must be non-negative")
    omega = 2 * pi * freq_hz
    return 3 * hbar * beta / (8 * m * m * omega * omega)


def required_squeezing_db(record: PlatformRecord, strict_si: bool = False) -> FeasibilityReport:
    """Squeezing ``s^2 = Gamma_d / g`` at which ``g s^4 = Gamma_d s^2``, in dB."""
    g = coupling_rate(record.mass_kg, record.freq_hz, record.duffing_n_per_m3)
    ratio = record.damping_rate_hz / g
    extra = {}
    if strict_si:
        g_hz = g / (2 * pi)
        strict_ratio = record.damping_rate_hz / g_hz
        extra = {
            "strict_g_hz": g_hz,
            "strict_squeezing_ratio": strict_ratio,
            "strict_squeezing_db": 10 * log10(strict_ratio),
        }
    return FeasibilityReport(record.name, g, ratio, 10 * log10(ratio), **extra)


def _parse_float(text: str, row: int, column: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise SchemaError(f"row {row}, column {column!r}: cannot parse {text!r} as a number") from None


def read_records(stream: Iterable[str], source: str = "<stream>") -> List[PlatformRecord]:
    reader = csv.DictReader(stream)
    header = reader.fieldnames or []
    missing = [c for c in REQUIRED_COLUMNS if c not in header]
    if missing:
        raise SchemaError(f"{source}: missing required column(s) {', '.join(missing)}")
    unknown = [c for c in header if c not in REQUIRED_COLUMNS + OPTIONAL_COLUMNS]
    if unknown:
        raise SchemaError(f"{source}: unknown column(s) {', '.join(unknown)}")
    records = []
    for i, row in enumerate(reader, start=2):  # header is line 1
        if None in row:
            raise SchemaError(f"{source}: row {i} has more fields than the header")
        values = {}
        for column in REQUIRED_COLUMNS[1:]:
            text = (row.get(column) or "").strip()
            if not text:
                raise SchemaError(f"{source}: row {i}, column {column!r} is empty")
            values[column] = _parse_float(text, i, column)
        optional = {}
        for column in ("temperature_k", "gamma_m_hz"):
            text = (row.get(column) or "").strip()
            optional[column] = _parse_float(text, i, column) if text else None
        try:
            records.append(
                PlatformRecord(
                    name=(row["name"] or "").strip(),
                    mass_kg=values["mass_kg"],
                    freq_hz=values["freq_hz"],
                    duffing_n_per_m3=values["beta_n_per_m3"],
                    damping_rate_hz=values["damping_rate_hz"],
                    citation=(row.get("citation") or "").strip(),
                    **optional,
                )
            )
        except NonPositiveValue as exc:
            raise NonPositiveValue(f"{source}: row {i}: {exc}") from None
    return records


def ingest_table(path: Union[str, Path, None] = None) -> List[PlatformRecord]:
    """Load device records from a CSV file, or the bundled table when ``path`` is None."""
    if path is None:
        text = resources.files("squeezekerr.data").joinpath("table1.csv").read_text("utf-8")
        return read_records(io.StringIO(text), "bundled table1.csv")
    with open(path, newline="", encoding="utf-8") as fh:
        return read_records(fh, str(path))


def listed_values() -> List[dict]:
    """The bundled table's own g, linear squeezing and dB columns, in row order."""
    text = resources.files("squeezekerr.data").joinpath("table1_listed.csv").read_text("utf-8")
    rows = list(csv.DictReader(io.StringIO(text)))
    return [
        {
            "name": r["name"],
            "g": float(r["g"]),
            "squeezing": float(r["squeezing"]),
            "squeezing_db": float(r["squeezing_db"]),
        }
        for r in rows
    ]


def sort_by_squeezing(reports: List[FeasibilityReport]) -> List[FeasibilityReport]:
    """Stable sort on the two-significant-figure dB, as the published table is ordered."""
    return sorted(reports, key=lambda r: r.rounded_db)


REPORT_COLUMNS = ("name", "g", "s_squared", "squeezing_db")
STRICT_COLUMNS = ("g_over_2pi_hz", "s_squared_strict", "squeezing_db_strict")


def _report_row(rep: FeasibilityReport, strict: bool) -> dict:
    row = {"name": rep.name, "g": rep.g_value, "s_squared": rep.squeezing_ratio,
           "squeezing_db": rep.squeezing_db}
    if strict:
        row.update({"g_over_2pi_hz": rep.strict_g_hz, "s_squared_strict": rep.strict_squeezing_ratio,
                    "squeezing_db_strict": rep.strict_squeezing_db})
    return row


def reports_to_csv(reports: List[FeasibilityReport], strict: bool = False) -> str:
    buf = io.StringIO()
    columns = REPORT_COLUMNS + (STRICT_COLUMNS if strict else ())
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for rep in reports:
        row = _report_row(rep, strict)
        writer.writerow([row[c] if c == "name" else "%.17g" % row[c] for c in columns])
    return buf.getvalue()


def reports_to_json(reports: List[FeasibilityReport], strict: bool = False) -> str:
    return json.dumps([_report_row(r, strict) for r in reports], indent=2)


__all__ = [
    "PlatformRecord",
    "FeasibilityReport",
    "coupling_rate",
    "required_squeezing_db",
    "ingest_table",
    "read_records",
    "listed_values",
    "sort_by_squeezing",
    "reports_to_csv",
    "reports_to_json",
    "round_significant",
]
