import json

import pytest
from hypothesis import settings

from proxauth.engine import DeviceRegistry
from proxauth.rfsim import Point2D, random_layout
from proxauth.scan import ApObservation, DeviceIdentity, ScanSnapshot

settings.register_profile("ci", max_examples=500, deadline=None)
settings.load_profile("ci")


def snap(device_id, rssi_by_bssid, captured_at=0):
    """Snapshot from a {bssid: rssi} mapping; SSIDs are derived from the BSSID."""
    return ScanSnapshot(
        device_id,
        captured_at,
        [ApObservation(f"net-{b[-2:]}", b, r) for b, r in rssi_by_bssid.items()],
    )


def bssid(i):
    return f"02:00:00:00:{i // 256:02X}:{i % 256:02X}"


@pytest.fixture
def env7():
    return random_layout(15, 50, 30, 7)


@pytest.fixture
def quiet_env7():
    return random_layout(15, 50, 30, 7, shadow_sigma=0.0)


@pytest.fixture
def identities():
    return {n: DeviceIdentity("UUID", f"uuid-{n}") for n in ("n1", "n2", "n3", "n4", "x")}


@pytest.fixture
def write_json(tmp_path):
    def _write(name, obj):
        p = tmp_path / name
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(json.dumps(obj))
        return p

    return _write


def fig1_scenario_dict(env, policy=None, seed=0):
    ids = {n: {"kind": "UUID", "value": f"uuid-{n}"} for n in ("Node1", "Node2", "Node3")}
    return {
        "environment": env.to_dict(),
        "registry": list(ids.values()),
        "bootstrap": [{"node_id": "Node1", "identity": ids["Node1"], "x": 20.0, "y": 15.0}],
        "arrivals": [
            {"at_ms": 1000, "node_id": "Node2", "identity": ids["Node2"], "x": 21.5, "y": 15.0},
            {"at_ms": 2000, "node_id": "Node3", "identity": ids["Node3"], "x": 23.0, "y": 15.0},
        ],
        "policy": policy or {"threshold": 4.5, "tolerance": 0.0},
        "seed": seed,
    }


__all__ = ["snap", "bssid", "Point2D", "DeviceRegistry", "fig1_scenario_dict"]


# -- acceptance summary: one PASS/FAIL line per criterion ----------------------

_ACCEPTANCE_LINES = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or rep.when != "call":
        return
    detail = "; ".join(v for k, v in item.user_properties if k == "detail")
    status = "PASS" if rep.passed else "FAIL"
    _ACCEPTANCE_LINES.append(f"{status}  C{marker.args[0]}  {marker.kwargs.get('title', item.name)}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(_ACCEPTANCE_LINES, key=lambda l: int(l.split()[1][1:])):
        terminalreporter.write_line(line)
