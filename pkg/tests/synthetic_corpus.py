"""Seeded synthetic gazetteer + mention corpus for tests.

Generates a three-level location hierarchy with pseudo-word names, a
GeoNames-shaped dump for CLI runs, and a mention corpus built by
corrupting canonical names (casing, punctuation, affixes, typos,
partial forms), optionally mixed with off-topic noise mentions.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from geolinker import (
    Granularity,
    LabeledMention,
    LocationEntity,
    canonical_string,
)

_SYLLABLES = [
    "ka", "ri", "to", "mar", "vel", "ny", "os", "ban", "du", "lis",
    "gra", "nor", "pel", "sa", "qui", "ver", "mo", "tan", "ize", "bel",
    "ch", "ur", "ak", "in", "or", "ess", "al", "um", "eth", "ov",
]

_NOISE_WORDS = [
    "worldwide", "somewhere", "nowhere", "the moon", "everywhere",
    "hell", "online", "global", "404", "atlantis", "my couch",
    "your heart", "the internet", "earth", "space", "undisclosed",
]


def _word(rng: random.Random, used: set[str]) -> str:
    for _ in range(100):
        n = rng.randint(2, 4)
        word = "".join(rng.choice(_SYLLABLES) for _ in range(n)).capitalize()
        if word not in used:
            used.add(word)
            return word
    # Practically unreachable; suffix to force uniqueness.
    word = word + str(len(used))
    used.add(word)
    return word


@dataclass
class SyntheticCorpus:
    entities: list[LocationEntity]          # survives the population floor
    mentions: list[LabeledMention]
    dump_lines: list[str] = field(default_factory=list)
    admin1_lines: list[str] = field(default_factory=list)
    country_info_lines: list[str] = field(default_factory=list)


def _dump_line(e: LocationEntity, fclass: str, fcode: str, admin1_code: str) -> str:
    fields = [
        str(e.entity_id), e.name, e.ascii_name, "",
        repr(e.latitude), repr(e.longitude), fclass, fcode,
        e.country_code, "", admin1_code, "", "", "",
        str(e.population), "", "", "Etc/UTC", "2020-01-01",
    ]
    return "\t".join(fields)


def _make_entities(
    rng: random.Random,
    n_countries: int,
    admins_per_country: int,
    n_cities: int,
) -> tuple[list[LocationEntity], list[str], list[str], list[str]]:
    used: set[str] = set()
    entities: list[LocationEntity] = []
    dump: list[str] = []
    admin1_lines: list[str] = []
    country_lines = ["#ISO\tISO3\tISO-Numeric\tfips\tCountry"]
    next_id = 1000

    countries = []
    for i in range(n_countries):
        code = chr(ord("A") + i // 26) + chr(ord("A") + i % 26)
        name = _word(rng, used) + "ia"
        lat = rng.uniform(-60, 60)
        lon = rng.uniform(-170, 170)
        entity = LocationEntity(
            entity_id=next_id, name=name, ascii_name=name,
            latitude=lat, longitude=lon, granularity=Granularity.COUNTRY,
            country_code=code, country_name=name, population=rng.randint(10**6, 10**8),
        )
        next_id += 1
        countries.append(entity)
        entities.append(entity)
        dump.append(_dump_line(entity, "A", "PCLI", "00"))
        country_lines.append(f"{code}\t{code}X\t{i:03d}\t{code}\t{name}")

    admins = []
    for country in countries:
        for j in range(admins_per_country):
            code = f"A{j:02d}"
            name = _word(rng, used)
            entity = LocationEntity(
                entity_id=next_id, name=name, ascii_name=name,
                latitude=country.latitude + rng.uniform(-5, 5),
                longitude=country.longitude + rng.uniform(-5, 5),
                granularity=Granularity.ADMIN1,
                country_code=country.country_code, country_name=country.country_name,
                admin1_code=code, admin1_name=name, population=0,
            )
            next_id += 1
            admins.append(entity)
            entities.append(entity)
            dump.append(_dump_line(entity, "A", "ADM1", code))
            admin1_lines.append(
                f"{country.country_code}.{code}\t{name}\t{name}\t{entity.entity_id}"
            )

    for k in range(n_cities):
        admin = admins[k % len(admins)]
        name = _word(rng, used)
        entity = LocationEntity(
            entity_id=next_id, name=name, ascii_name=name,
            latitude=admin.latitude + rng.uniform(-2, 2),
            longitude=admin.longitude + rng.uniform(-2, 2),
            granularity=Granularity.CITY,
            country_code=admin.country_code, country_name=admin.country_name,
            admin1_code=admin.admin1_code, admin1_name=admin.admin1_name,
            population=rng.randint(15_000, 5_000_000),
        )
        next_id += 1
        entities.append(entity)
        dump.append(_dump_line(entity, "P", "PPL", admin.admin1_code))

    # Dump-only chaff the pipeline must drop: a hamlet below the
    # population floor, an ignored feature class, and a malformed line.
    small = LocationEntity(
        entity_id=next_id, name=_word(rng, used), ascii_name="x",
        latitude=0.0, longitude=0.0, granularity=Granularity.CITY,
        country_code=countries[0].country_code, country_name=countries[0].country_name,
        admin1_code="A00", admin1_name="", population=1_499,
    )
    dump.append(_dump_line(small, "P", "PPL", "A00"))
    dump.append(_dump_line(countries[0], "S", "AIRP", "00"))
    dump.append("garbled line with too few fields")
    return entities, dump, admin1_lines, country_lines


_PUNCTS = [" / ", " - ", " ", " | ", ","]
_PREFIXES = ["in ", "from ", "living in ", "somewhere in ", "~"]
_SUFFIXES = [" city", "!", " :)", " area", "..."]


def _corrupt(rng: random.Random, text: str) -> str:
    if rng.random() < 0.55:
        text = rng.choice([text.upper(), text.lower(), text.title(), text.swapcase()])
    if ", " in text and rng.random() < 0.5:
        text = text.replace(", ", rng.choice(_PUNCTS))
    if rng.random() < 0.3:
        text = rng.choice(_PREFIXES) + text if rng.random() < 0.5 else text + rng.choice(_SUFFIXES)
    if rng.random() < 0.25 and len(text) > 4:
        i = rng.randrange(1, len(text) - 2)
        ops = [
            text[:i] + text[i + 1] + text[i] + text[i + 2 :],
            text[:i] + text[i + 1 :],
            text[:i] + text[i] + text[i:],
        ]
        text = rng.choice(ops)
    return text


def _base_form(rng: random.Random, entity: LocationEntity) -> str:
    triple = entity.triple()
    if entity.granularity is Granularity.CITY:
        forms = [
            triple.city,
            f"{triple.city}, {triple.admin1}",
            f"{triple.city}, {triple.country}",
            f"{triple.city}, {triple.admin1}, {triple.country}",
            canonical_string(entity),
        ]
        weights = [4, 2, 3, 1, 1]
    elif entity.granularity is Granularity.ADMIN1:
        forms = [triple.admin1, f"{triple.admin1}, {triple.country}", canonical_string(entity)]
        weights = [3, 2, 1]
    else:
        forms = [triple.country, entity.country_code, canonical_string(entity)]
        weights = [4, 2, 1]
    return rng.choices(forms, weights=weights, k=1)[0]


def _noise_text(rng: random.Random) -> str:
    parts = rng.sample(_NOISE_WORDS, k=rng.randint(1, 2))
    return rng.choice([" & ", " ", ", "]).join(parts)


def make_corpus(
    seed: int = 20_240_811,
    n_countries: int = 8,
    admins_per_country: int = 5,
    n_cities: int = 152,
    n_mentions: int = 2_000,
    noise_fraction: float = 0.0,
    zero_mention_fraction: float = 0.15,
) -> SyntheticCorpus:
    rng = random.Random(seed)
    entities, dump, admin1_lines, country_lines = _make_entities(
        rng, n_countries, admins_per_country, n_cities
    )

    # Zipf-ish popularity over locations; a slice gets zero mentions.
    order = list(range(len(entities)))
    rng.shuffle(order)
    n_zero = int(len(entities) * zero_mention_fraction)
    weights = [0.0] * len(entities)
    for rank, idx in enumerate(order):
        if rank < n_zero:
            continue
        weights[idx] = 1.0 / (rank - n_zero + 1)

    mentions: list[LabeledMention] = []
    picks = rng.choices(range(len(entities)), weights=weights, k=n_mentions)
    for idx in picks:
        entity = entities[idx]
        if rng.random() < noise_fraction:
            text = _noise_text(rng)
        else:
            text = _corrupt(rng, _base_form(rng, entity))
        mentions.append(LabeledMention(text, entity.triple()))

    return SyntheticCorpus(
        entities=entities,
        mentions=mentions,
        dump_lines=dump,
        admin1_lines=admin1_lines,
        country_info_lines=country_lines,
    )
