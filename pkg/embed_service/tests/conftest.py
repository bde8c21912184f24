import sys
from pathlib import Path

import pytest

TESTS_DIR = Path(__file__).parent
if str(TESTS_DIR) not in sys.path:  # keep service_harness importable from any rootdir
    sys.path.insert(0, str(TESTS_DIR))


@pytest.fixture(scope="session")
def golden_lines() -> list[str]:
    text = (TESTS_DIR / "data" / "golden_requests.ndjson").read_text(encoding="utf-8")
    return [line for line in text.splitlines() if line]
