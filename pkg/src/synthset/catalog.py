"""Vehicle registration catalog: the label space that sampling draws from.

The catalog file is delimiter-separated UTF-8 text with a fixed header
(`brand,model,vehicle_class,build_years,registered_count`); build years are
`|`-separated integers. Loading filters to a brand whitelist and a minimum
build year, and reports how many rows each filter dropped.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

from .errors import CatalogParseError, ConfigError

DEFAULT_BRANDS = (
    "Volkswagen",
    "Ford",
    "BMW",
    "Audi",
    "Opel",
    "Mercedes",
    "Renault",
    "Skoda",
)
DEFAULT_MIN_YEAR = 1990

_HEADER = ["brand", "model", "vehicle_class", "build_years", "registered_count"]


@dataclass(frozen=True)
class ModelEntry:
    brand: str
    model: str
    vehicle_class: str
    build_years: tuple[int, ...]  # sorted ascending, non-empty
    registered_count: int


@dataclass(frozen=True)
class DropReport:
    brand_filtered: int
    year_filtered: int


@dataclass(frozen=True)
class VehicleCatalog:
    entries: tuple[ModelEntry, ...]
    brand_whitelist: tuple[str, ...]
    min_year: int

    @cached_property
    def _by_brand(self) -> dict[str, tuple[ModelEntry, ...]]:
        grouped: dict[str, list[ModelEntry]] = {b: [] for b in self.brand_whitelist}
        for entry in self.entries:
            grouped[entry.brand].append(entry)
        return {b: tuple(v) for b, v in grouped.items()}

    def models_for(self, brand: str) -> tuple[ModelEntry, ...]:
        return self._by_brand.get(brand, ())


def _parse_row(line_no: int, row: list[str], min_year: int) -> ModelEntry | None:
    if len(row) != len(_HEADER):
        raise CatalogParseError(f"line {line_no}: expected {len(_HEADER)} fields, got {len(row)}")
    brand, model, vehicle_class, years_text, count_text = (f.strip() for f in row)
    if not brand or not model:
        raise CatalogParseError(f"line {line_no}: brand and model must be non-empty")
    try:
        years = sorted({int(y) for y in years_text.split("|") if y.strip() != ""})
    except ValueError:
        raise CatalogParseError(f"line {line_no}: non-integer build year in {years_text!r}") from None
    if not years:
        raise CatalogParseError(f"line {line_no}: build_years is empty")
    try:
        count = int(count_text)
    except ValueError:
        raise CatalogParseError(f"line {line_no}: non-integer registered_count {count_text!r}") from None
    if count < 0:
        raise CatalogParseError(f"line {line_no}: registered_count must be >= 0")
    kept_years = tuple(y for y in years if y >= min_year)
    if not kept_years:
        return None  # entirely pre-cutoff; caller counts the drop
    return ModelEntry(brand, model, vehicle_class, kept_years, count)


def load_catalog(
    source: str | Path | io.TextIOBase,
    *,
    brands: tuple[str, ...] = DEFAULT_BRANDS,
    min_year: int = DEFAULT_MIN_YEAR,
) -> tuple[VehicleCatalog, DropReport]:
    """Read, filter and validate a catalog document.

    Returns the catalog together with a report of rows dropped by the brand
    whitelist and by the minimum-year filter. Duplicate (brand, model) pairs
    and malformed rows are hard errors.
    """
    if not brands:
        raise ConfigError("brand whitelist must be non-empty")
    if isinstance(source, (str, Path)):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = source.read()

    reader = csv.reader(io.StringIO(text))
    rows = list(reader)
    if not rows:
        raise CatalogParseError("line 1: missing header row")
    header = [c.strip() for c in rows[0]]
    if header != _HEADER:
        raise CatalogParseError(f"line 1: header must be {','.join(_HEADER)}")

    whitelist = set(brands)
    entries: list[ModelEntry] = []
    seen: dict[tuple[str, str], int] = {}
    brand_filtered = 0
    year_filtered = 0
    for idx, row in enumerate(rows[1:], start=2):
        if not row or (len(row) == 1 and row[0].strip() == ""):
            continue
        brand = row[0].strip()
        if brand not in whitelist:
            brand_filtered += 1
            continue
        entry = _parse_row(idx, row, min_year)
        key = (brand, row[1].strip())
        if key in seen:
            raise CatalogParseError(
                f"line {idx}: duplicate (brand, model) {key}, first seen on line {seen[key]}"
            )
        seen[key] = idx
        if entry is None:
            year_filtered += 1
            continue
        entries.append(entry)

    if not entries:
        raise ConfigError("catalog is empty after filtering")
    catalog = VehicleCatalog(tuple(entries), tuple(brands), min_year)
    return catalog, DropReport(brand_filtered, year_filtered)


def serialize_catalog(catalog: VehicleCatalog) -> str:
    """Render the catalog back into its file format (stable byte form)."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(_HEADER)
    for e in catalog.entries:
        writer.writerow(
            [e.brand, e.model, e.vehicle_class, "|".join(str(y) for y in e.build_years), e.registered_count]
        )
    return out.getvalue()


def catalog_summary(catalog: VehicleCatalog) -> list[dict]:
    """One row per whitelist brand: model count and build-year span."""
    rows = []
    for brand in catalog.brand_whitelist:
        models = catalog.models_for(brand)
        years = [y for m in models for y in m.build_years]
        rows.append(
            {
                "brand": brand,
                "models": len(models),
                "year_min": min(years) if years else None,
                "year_max": max(years) if years else None,
            }
        )
    return rows
