from __future__ import annotations

import pytest

from gridops import fixtures
from gridops.probes import ProbeEngine

# criterion name -> "PASS" | "FAIL: reason"; filled by tests/test_acceptance.py
ACCEPTANCE_RESULTS: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in ACCEPTANCE_RESULTS.items():
        terminalreporter.write_line(f"{outcome:>4}  {name}")

ROC = fixtures.ROC_ID

# DNs from the bundled inventory contacts
ROC_ADMIN_DN = "/C=GR/O=SEE-ROC/CN=ROC Operator"
SERBIA_GIM_DN = "/C=RS/O=Grid/CN=Serbia GIM"
BULGARIA_GIM_DN = "/C=BG/O=Grid/CN=Bulgaria GIM"
AEGIS01_ADMIN_DN = "/C=RS/O=Grid/CN=AEGIS01-IPB Admin"
GUEST_DN = "/C=EU/O=Guests/CN=Guest Viewer"
UNMAPPED_DN = "/C=XX/O=Nowhere/CN=Stranger"

SERBIA = "country-rs"
BULGARIA = "country-bg"
AEGIS01 = "site-aegis01-ipb"
AEGIS01_CE = "svc-ce-aegis01-ipb"
AEGIS01_SE = "svc-se-aegis01-ipb"
WMS_ID = "svc-wms-aegis01-ipb"


@pytest.fixture
def registry():
    return fixtures.build_registry()


@pytest.fixture
def engine(registry):
    return ProbeEngine(registry)
