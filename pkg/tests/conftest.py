from __future__ import annotations

import pytest

from geolinker import Granularity, HashingEmbedder, LocationEntity
from synthetic_corpus import SyntheticCorpus, make_corpus


@pytest.fixture(scope="session")
def provider() -> HashingEmbedder:
    return HashingEmbedder(dim=256, seed=0)


def _country(eid, name, code, lat, lon) -> LocationEntity:
    return LocationEntity(
        entity_id=eid, name=name, ascii_name=name, latitude=lat, longitude=lon,
        granularity=Granularity.COUNTRY, country_code=code, country_name=name,
        population=10_000_000,
    )


def _admin(eid, name, code, country, lat, lon) -> LocationEntity:
    return LocationEntity(
        entity_id=eid, name=name, ascii_name=name, latitude=lat, longitude=lon,
        granularity=Granularity.ADMIN1, country_code=country.country_code,
        country_name=country.country_name, admin1_code=code, admin1_name=name,
    )


def _city(eid, name, admin, lat, lon, population=100_000, admin2="") -> LocationEntity:
    return LocationEntity(
        entity_id=eid, name=name, ascii_name=name, latitude=lat, longitude=lon,
        granularity=Granularity.CITY, country_code=admin.country_code,
        country_name=admin.country_name, admin1_code=admin.admin1_code,
        admin1_name=admin.admin1_name, admin2_name=admin2, population=population,
    )


@pytest.fixture(scope="session")
def toy_entities() -> list[LocationEntity]:
    """A small hand-built three-level database spanning scripts."""
    japan = _country(1, "Japan", "JP", 36.0, 138.0)
    turkey = _country(2, "Türkiye", "TR", 39.0, 35.0)
    peru = _country(3, "Peru", "PE", -10.0, -76.0)
    usa = _country(4, "United States", "US", 39.8, -98.6)
    fukushima = _admin(11, "Fukushima", "07", japan, 37.4, 140.5)
    sinop = _admin(12, "Sinop", "57", turkey, 41.8, 35.0)
    lima_region = _admin(13, "Lima", "15", peru, -12.0, -76.9)
    new_york = _admin(14, "New York", "NY", usa, 43.0, -75.0)
    return [
        japan, turkey, peru, usa,
        fukushima, sinop, lima_region, new_york,
        _city(21, "Iwaki", fukushima, 37.05, 140.89, 330_000),
        _city(22, "Boyabat", sinop, 41.47, 34.77, 25_000),
        _city(23, "Sinop", sinop, 42.03, 35.15, 40_000),
        _city(24, "Lima", lima_region, -12.04, -77.03, 9_000_000),
        _city(25, "New York City", new_york, 40.71, -74.01, 8_400_000),
        _city(26, "Buffalo", new_york, 42.89, -78.88, 278_000),
    ]


@pytest.fixture(scope="session")
def clean_corpus() -> SyntheticCorpus:
    return make_corpus(noise_fraction=0.0)


@pytest.fixture(scope="session")
def noisy_corpus() -> SyntheticCorpus:
    return make_corpus(noise_fraction=0.2)
