"""GeoNames-style gazetteer ingestion and the core location data model.

Parses the standard tab-separated dump plus the auxiliary admin1/admin2
code tables and country-info table, classifies rows into three
granularities (country, primary admin region, city), filters cities by
population, and produces canonical strings and name variants for every
entity.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import IO, Iterable, Mapping

from .textio import norm_key, normalize_text

# Field order of the GeoNames main dump (tab separated, >= 15 fields).
# 0 geonameid, 1 name, 2 asciiname, 3 alternatenames, 4 latitude,
# 5 longitude, 6 feature class, 7 feature code, 8 country code, 9 cc2,
# 10 admin1 code, 11 admin2 code, 12 admin3, 13 admin4, 14 population, ...
_MIN_FIELDS = 15

_COUNTRY_CODE_RE = re.compile(r"^[A-Z]{2}$")


class Granularity(str, Enum):
    COUNTRY = "country"
    ADMIN1 = "admin1"
    CITY = "city"


@dataclass(frozen=True)
class LocationTriple:
    """Normalized (city, admin1, country) identity; all-empty means Null.

    Components are NFKC-normalized with whitespace collapsed; case is
    preserved for display. Identity and matching use :meth:`key`, which
    additionally case-folds.
    """

    city: str = ""
    admin1: str = ""
    country: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "city", normalize_text(self.city))
        object.__setattr__(self, "admin1", normalize_text(self.admin1))
        object.__setattr__(self, "country", normalize_text(self.country))
        if self.city and not (self.admin1 and self.country):
            raise ValueError(f"city {self.city!r} requires admin1 and country")
        if self.admin1 and not self.country:
            raise ValueError(f"admin1 {self.admin1!r} requires country")

    def is_null(self) -> bool:
        return not (self.city or self.admin1 or self.country)

    def key(self) -> tuple[str, str, str]:
        """Case-folded identity tuple (city, admin1, country)."""
        return (self.city.casefold(), self.admin1.casefold(), self.country.casefold())

    def sort_key(self) -> tuple[str, str, str]:
        """Deterministic ordering key: (country, admin1, city), case-folded."""
        return (self.country.casefold(), self.admin1.casefold(), self.city.casefold())


NULL_TRIPLE = LocationTriple()


@dataclass(frozen=True)
class LocationEntity:
    """One gazetteer row after classification and code resolution."""

    entity_id: int
    name: str
    ascii_name: str
    latitude: float
    longitude: float
    granularity: Granularity
    country_code: str
    country_name: str
    admin1_code: str = ""
    admin1_name: str = ""
    admin2_name: str = ""
    population: int = 0

    def triple(self) -> LocationTriple:
        if self.granularity is Granularity.COUNTRY:
            return LocationTriple(country=self.country_name)
        if self.granularity is Granularity.ADMIN1:
            return LocationTriple(admin1=self.admin1_name, country=self.country_name)
        return LocationTriple(self.name, self.admin1_name, self.country_name)


@dataclass
class GazetteerConfig:
    """Population floor and feature-code classification rules.

    Defaults reproduce a three-level database from raw GeoNames: class A
    political codes become countries, ADM1 becomes primary admin regions,
    all of class P becomes cities; everything else is ignored.
    """

    min_population: int = 15_000
    country_feature_codes: frozenset[str] = frozenset(
        {"PCLI", "PCLD", "PCLF", "PCLS", "PCL", "TERR"}
    )
    admin1_feature_codes: frozenset[str] = frozenset({"ADM1"})
    city_feature_classes: frozenset[str] = frozenset({"P"})

    def __post_init__(self) -> None:
        if self.min_population < 0:
            raise ValueError("min_population must be >= 0")

    def classify(self, feature_class: str, feature_code: str) -> Granularity | None:
        if feature_class == "A":
            if feature_code in self.country_feature_codes:
                return Granularity.COUNTRY
            if feature_code in self.admin1_feature_codes:
                return Granularity.ADMIN1
            return None
        if feature_class in self.city_feature_classes:
            return Granularity.CITY
        return None


@dataclass
class ParseResult:
    """Entities plus the counters the parser is required to expose."""

    entities: list[LocationEntity] = field(default_factory=list)
    malformed: int = 0
    ignored: int = 0
    admin1_unresolved: int = 0
    country_unresolved: int = 0
    city_missing_admin1: int = 0

    @property
    def warnings(self) -> int:
        return self.admin1_unresolved + self.country_unresolved + self.city_missing_admin1


def load_admin_codes(stream: Iterable[str]) -> dict[str, str]:
    """Read an admin code table: "CC.A1<TAB>name<TAB>asciiname<TAB>id".

    The admin2 table uses the same layout with "CC.A1.A2" keys.
    """
    table: dict[str, str] = {}
    for line in stream:
        line = line.rstrip("\n")
        if not line or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) < 2:
            continue
        table[fields[0].strip()] = fields[1].strip()
    return table


def load_country_info(stream: Iterable[str]) -> dict[str, str]:
    """Read the country-info table, mapping ISO code to country name.

    Accepts the full GeoNames countryInfo.txt layout (name in column 5)
    or a minimal two-column "CC<TAB>name" table; '#' lines are comments.
    """
    table: dict[str, str] = {}
    for line in stream:
        line = line.rstrip("\n")
        if not line or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) < 2:
            continue
        name = fields[4] if len(fields) > 4 else fields[1]
        table[fields[0].strip()] = name.strip()
    return table


def parse_gazetteer(
    dump: Iterable[str],
    admin1_codes: Iterable[str],
    country_info: Iterable[str],
    config: GazetteerConfig | None = None,
    admin2_codes: Iterable[str] | None = None,
) -> ParseResult:
    """Parse a GeoNames-style dump into classified entities.

    Malformed lines (too few fields, unparseable numerics, out-of-range
    coordinates, bad country code, empty name) are skipped and counted.
    Rows whose feature code is outside the classification map are counted
    as ignored. Unresolvable admin1 codes keep the raw code as the name
    and count a warning; likewise for country codes missing from the
    country-info table.
    """
    config = config or GazetteerConfig()
    admin1_table = load_admin_codes(admin1_codes)
    admin2_table = load_admin_codes(admin2_codes) if admin2_codes is not None else {}
    country_table = load_country_info(country_info)

    result = ParseResult()
    for line in dump:
        line = line.rstrip("\n")
        if not line:
            continue
        fields = line.split("\t")
        if len(fields) < _MIN_FIELDS:
            result.malformed += 1
            continue

        granularity = config.classify(fields[6].strip(), fields[7].strip())
        if granularity is None:
            result.ignored += 1
            continue

        name = fields[1].strip()
        country_code = fields[8].strip()
        try:
            entity_id = int(fields[0])
            latitude = float(fields[4])
            longitude = float(fields[5])
            population = int(fields[14]) if fields[14].strip() else 0
        except ValueError:
            result.malformed += 1
            continue
        if (
            not name
            or not -90.0 <= latitude <= 90.0
            or not -180.0 <= longitude <= 180.0
            or population < 0
            or not _COUNTRY_CODE_RE.match(country_code)
        ):
            result.malformed += 1
            continue

        country_name = country_table.get(country_code)
        if country_name is None:
            country_name = country_code
            result.country_unresolved += 1

        admin1_code = fields[10].strip()
        admin1_name = ""
        admin2_name = ""
        if granularity is Granularity.CITY:
            if not admin1_code:
                result.city_missing_admin1 += 1
                continue
            admin1_name = admin1_table.get(f"{country_code}.{admin1_code}", "")
            if not admin1_name:
                admin1_name = admin1_code
                result.admin1_unresolved += 1
            admin2_code = fields[11].strip()
            if admin2_code:
                admin2_name = admin2_table.get(
                    f"{country_code}.{admin1_code}.{admin2_code}", ""
                )
        elif granularity is Granularity.ADMIN1:
            # Admin regions are self-naming; the code table only has to
            # keep city references aligned with them.
            admin1_name = admin1_table.get(f"{country_code}.{admin1_code}") or name

        result.entities.append(
            LocationEntity(
                entity_id=entity_id,
                name=name,
                ascii_name=fields[2].strip() or name,
                latitude=latitude,
                longitude=longitude,
                granularity=granularity,
                country_code=country_code,
                country_name=country_name,
                admin1_code=admin1_code,
                admin1_name=admin1_name,
                admin2_name=admin2_name,
                population=population,
            )
        )
    return result


def filter_entities(
    entities: Iterable[LocationEntity], config: GazetteerConfig | None = None
) -> list[LocationEntity]:
    """Drop cities below the population floor and deduplicate by triple.

    Countries and admin regions are kept regardless of population. Cities
    at exactly the floor are kept ("under" excludes strictly less). When
    two entities share a normalized triple, the higher-population one
    wins (lower entity_id on a population tie).
    """
    config = config or GazetteerConfig()
    chosen: dict[tuple[str, str, str], LocationEntity] = {}
    order: list[tuple[str, str, str]] = []
    for entity in entities:
        if (
            entity.granularity is Granularity.CITY
            and entity.population < config.min_population
        ):
            continue
        key = entity.triple().key()
        current = chosen.get(key)
        if current is None:
            chosen[key] = entity
            order.append(key)
        elif (entity.population, -entity.entity_id) > (
            current.population,
            -current.entity_id,
        ):
            chosen[key] = entity
    return [chosen[key] for key in order]


def canonical_string(entity: LocationEntity) -> str:
    """Comma-separated "city, admin2, admin1, country, code", skipping empties."""
    if entity.granularity is Granularity.COUNTRY:
        parts = [entity.country_name, entity.country_code]
    elif entity.granularity is Granularity.ADMIN1:
        parts = [entity.admin1_name, entity.country_name, entity.country_code]
    else:
        parts = [
            entity.name,
            entity.admin2_name,
            entity.admin1_name,
            entity.country_name,
            entity.country_code,
        ]
    return ", ".join(p for p in parts if p)


def _join(sep: str, parts: list[str]) -> str:
    return sep.join(p for p in parts if p)


def name_variants(entity: LocationEntity) -> list[str]:
    """Canonical string plus the per-granularity alternate templates.

    Empty slots collapse together with their separators; the result is
    deduplicated and never contains empty strings.
    """
    canonical = canonical_string(entity)
    if entity.granularity is Granularity.COUNTRY:
        raw = [canonical, entity.country_name]
    elif entity.granularity is Granularity.ADMIN1:
        raw = [
            canonical,
            entity.admin1_name,
            _join(" in ", [entity.admin1_name, entity.country_name]),
            _join(" / ", [entity.country_name, entity.admin1_name]),
        ]
    else:
        raw = [
            canonical,
            entity.name,
            _join(
                " in ",
                [entity.name, entity.admin2_name, entity.admin1_name, entity.country_name],
            ),
            _join(" / ", [entity.admin1_name, entity.name]),
            _join(" / ", [entity.country_name, entity.name]),
        ]
    seen: set[str] = set()
    variants: list[str] = []
    for text in raw:
        if text and text not in seen:
            seen.add(text)
            variants.append(text)
    return variants


DATABASE_HEADER = "city\tadmin1\tcountry\tcountry_code\tlat\tlon\tpopulation\tgranularity"


def write_database(entities: Iterable[LocationEntity], stream: IO[str]) -> int:
    """Write the filtered-database TSV export; returns the row count."""
    stream.write(DATABASE_HEADER + "\n")
    count = 0
    for entity in entities:
        triple = entity.triple()
        stream.write(
            "\t".join(
                [
                    triple.city,
                    triple.admin1,
                    triple.country,
                    entity.country_code,
                    repr(entity.latitude),
                    repr(entity.longitude),
                    str(entity.population),
                    entity.granularity.value,
                ]
            )
            + "\n"
        )
        count += 1
    return count


def read_database(stream: Iterable[str]) -> list[LocationEntity]:
    """Load a filtered-database TSV back into entities.

    The export schema carries no entity ids, ascii names or admin2, so
    ids are re-synthesized from row order and those fields stay empty.
    """
    lines = iter(stream)
    header = next(lines, None)
    if header is None or header.rstrip("\n") != DATABASE_HEADER:
        raise ValueError("missing or unexpected database header")
    entities: list[LocationEntity] = []
    for lineno, line in enumerate(lines, start=2):
        line = line.rstrip("\n")
        if not line:
            continue
        fields = line.split("\t")
        if len(fields) != 8:
            raise ValueError(f"database line {lineno}: expected 8 fields, got {len(fields)}")
        city, admin1, country, country_code, lat, lon, population, granularity = fields
        gran = Granularity(granularity)
        name = city if gran is Granularity.CITY else (admin1 if gran is Granularity.ADMIN1 else country)
        entities.append(
            LocationEntity(
                entity_id=len(entities),
                name=name,
                ascii_name=name,
                latitude=float(lat),
                longitude=float(lon),
                granularity=gran,
                country_code=country_code,
                country_name=country,
                admin1_name=admin1,
                population=int(population),
            )
        )
    return entities


def granularity_counts(entities: Iterable[LocationEntity]) -> dict[str, int]:
    counts = {g.value: 0 for g in Granularity}
    for entity in entities:
        counts[entity.granularity.value] += 1
    return counts
