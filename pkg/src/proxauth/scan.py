"""Wi-Fi fingerprint data model: beacon observations, scan snapshots, alignment."""

import json
import math
import re
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import (
    DuplicateBssid,
    EmptyUniverse,
    InvalidBssid,
    MalformedDocument,
    NonFiniteRssi,
)

__all__ = [
    "DEFAULT_FLOOR_DBM",
    "AlignedPair",
    "ApObservation",
    "DeviceIdentity",
    "IdentityKind",
    "ScanSnapshot",
    "align",
    "dump_snapshot",
    "dump_snapshots",
    "normalize_bssid",
    "parse_scan_set",
    "parse_snapshot",
    "snapshot_from_dict",
    "snapshot_to_dict",
    "top_n",
]

DEFAULT_FLOOR_DBM = -100.0

_BSSID_RE = re.compile(r"^[0-9A-Fa-f]{2}(:[0-9A-Fa-f]{2}){5}$")


def normalize_bssid(bssid):
    """Validate a colon-separated MAC string and return it uppercased."""
    if not isinstance(bssid, str) or not _BSSID_RE.match(bssid):
        raise InvalidBssid(f"not a 6-octet BSSID: {bssid!r}")
    return bssid.upper()


@dataclass(frozen=True)
class ApObservation:
    """One beacon tuple: (SSID, BSSID, RSSI)."""

    ssid: str
    bssid: str
    rssi: float

    def __post_init__(self):
        object.__setattr__(self, "bssid", normalize_bssid(self.bssid))
        if isinstance(self.rssi, bool):
            raise NonFiniteRssi(f"rssi must be numeric, got {self.rssi!r}")
        try:
            rssi = float(self.rssi)
        except (TypeError, ValueError):
            raise NonFiniteRssi(f"rssi must be numeric, got {self.rssi!r}") from None
        if not math.isfinite(rssi):
            raise NonFiniteRssi(f"rssi must be finite, got {self.rssi!r}")
        object.__setattr__(self, "rssi", rssi)


@dataclass(frozen=True)
class ScanSnapshot:
    """A device's full fingerprint at one instant."""

    device_id: str
    captured_at: int
    observations: tuple = ()

    def __post_init__(self):
        obs = tuple(self.observations)
        seen = set()
        for o in obs:
            if o.bssid in seen:
                raise DuplicateBssid(f"BSSID {o.bssid} listed twice in snapshot of {self.device_id}")
            seen.add(o.bssid)
        object.__setattr__(self, "observations", obs)

    def __len__(self):
        return len(self.observations)

    @property
    def bssids(self):
        return [o.bssid for o in self.observations]

    def as_mapping(self):
        return {o.bssid: o.rssi for o in self.observations}

    def with_device(self, device_id):
        """Same observations relabelled as another device's scan."""
        return ScanSnapshot(device_id, self.captured_at, self.observations)


class IdentityKind(str, Enum):
    IMEI = "IMEI"
    UUID = "UUID"
    MAC = "MAC"


@dataclass(frozen=True)
class DeviceIdentity:
    kind: IdentityKind
    value: str

    def __post_init__(self):
        try:
            kind = IdentityKind(self.kind)
        except ValueError:
            raise MalformedDocument(f"unknown identity kind {self.kind!r}") from None
        if not isinstance(self.value, str) or not self.value:
            raise MalformedDocument("identity value must be a non-empty string")
        object.__setattr__(self, "kind", kind)

    def to_dict(self):
        return {"kind": self.kind.value, "value": self.value}

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict) or "kind" not in d or "value" not in d:
            raise MalformedDocument(f"identity must be an object with kind and value: {d!r}")
        return cls(d["kind"], d["value"])

    def __str__(self):
        return f"{self.kind.value}:{self.value}"


@dataclass(frozen=True)
class AlignedPair:
    """Two RSSI vectors over a shared, ascending BSSID universe."""

    bssids: tuple
    rssi_a: np.ndarray = field(repr=False)
    rssi_b: np.ndarray = field(repr=False)
    floor_substitutions: int = 0

    def __post_init__(self):
        a = np.asarray(self.rssi_a, dtype=np.float64)
        b = np.asarray(self.rssi_b, dtype=np.float64)
        n = len(self.bssids)
        if n < 1:
            raise EmptyUniverse("aligned pair needs at least one BSSID")
        if a.shape != (n,) or b.shape != (n,):
            raise ValueError(f"vector lengths {a.shape}, {b.shape} do not match {n} BSSIDs")
        if any(x >= y for x, y in zip(self.bssids, self.bssids[1:])):
            raise ValueError("bssids must be strictly ascending")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "bssids", tuple(self.bssids))
        object.__setattr__(self, "rssi_a", a)
        object.__setattr__(self, "rssi_b", b)

    def __len__(self):
        return len(self.bssids)

    def swapped(self):
        return AlignedPair(self.bssids, self.rssi_b, self.rssi_a, self.floor_substitutions)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def top_n(s, n):
    """Keep the ``n`` strongest observations, ties at the cut going to the smaller BSSID."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if len(s.observations) <= n:
        return s
    ranked = sorted(s.observations, key=lambda o: (-o.rssi, o.bssid))
    keep = {o.bssid for o in ranked[:n]}
    # preserve the original observation order
    return ScanSnapshot(s.device_id, s.captured_at, [o for o in s.observations if o.bssid in keep])


def align(a, b, floor=DEFAULT_FLOOR_DBM):
    """Pair two snapshots by BSSID over the union of their APs.

    A BSSID seen by only one side gets ``floor`` on the other side.
    """
    ma, mb = a.as_mapping(), b.as_mapping()
    universe = sorted(ma.keys() | mb.keys())
    if not universe:
        raise EmptyUniverse("both snapshots are empty")
    floor = float(floor)
    va = np.array([ma.get(k, floor) for k in universe], dtype=np.float64)
    vb = np.array([mb.get(k, floor) for k in universe], dtype=np.float64)
    subs = sum((k not in ma) + (k not in mb) for k in universe)
    return AlignedPair(tuple(universe), va, vb, subs)


# ---------------------------------------------------------------------------
# JSON I/O
# ---------------------------------------------------------------------------

def snapshot_to_dict(s):
    return {
        "device_id": s.device_id,
        "captured_at_ms": s.captured_at,
        "observations": [
            {"ssid": o.ssid, "bssid": o.bssid, "rssi_dbm": o.rssi} for o in s.observations
        ],
    }


def _parse_rssi(value):
    if isinstance(value, bool):
        raise NonFiniteRssi(f"rssi_dbm must be a number, got {value!r}")
    if isinstance(value, str):
        # JSON has no NaN/Infinity literal; accept their string spellings only to reject them
        try:
            value = float(value)
        except ValueError:
            raise MalformedDocument(f"rssi_dbm is not a number: {value!r}") from None
    if not isinstance(value, (int, float)):
        raise MalformedDocument(f"rssi_dbm is not a number: {value!r}")
    if not math.isfinite(value):
        raise NonFiniteRssi(f"rssi_dbm must be finite, got {value!r}")
    return float(value)


def snapshot_from_dict(d):
    if not isinstance(d, dict):
        raise MalformedDocument("snapshot must be a JSON object")
    try:
        device_id = d["device_id"]
        captured_at = d["captured_at_ms"]
        raw_obs = d["observations"]
    except KeyError as exc:
        raise MalformedDocument(f"snapshot missing field {exc.args[0]!r}") from None
    if not isinstance(device_id, str):
        raise MalformedDocument("device_id must be a string")
    if isinstance(captured_at, bool) or not isinstance(captured_at, int):
        raise MalformedDocument("captured_at_ms must be an integer")
    if not isinstance(raw_obs, list):
        raise MalformedDocument("observations must be a list")
    obs = []
    for item in raw_obs:
        if not isinstance(item, dict):
            raise MalformedDocument("observation must be a JSON object")
        try:
            ssid, bssid, rssi = item["ssid"], item["bssid"], item["rssi_dbm"]
        except KeyError as exc:
            raise MalformedDocument(f"observation missing field {exc.args[0]!r}") from None
        if not isinstance(ssid, str):
            raise MalformedDocument("ssid must be a string")
        obs.append(ApObservation(ssid, bssid, _parse_rssi(rssi)))
    return ScanSnapshot(device_id, captured_at, obs)


def _loads(raw):
    if isinstance(raw, (bytes, bytearray)):
        try:
            raw = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedDocument(f"not UTF-8: {exc}") from None
    elif hasattr(raw, "read"):
        return _loads(raw.read())
    try:
        return json.loads(raw)
    except json.JSONDecodeError as exc:
        raise MalformedDocument(f"invalid JSON: {exc}") from None


def parse_snapshot(raw):
    """Parse one snapshot document (bytes, str or a readable file object)."""
    return snapshot_from_dict(_loads(raw))


def parse_scan_set(raw):
    """Parse a JSON array of snapshot documents."""
    doc = _loads(raw)
    if not isinstance(doc, list):
        raise MalformedDocument("scan-set must be a JSON array of snapshots")
    return [snapshot_from_dict(d) for d in doc]


def dump_snapshot(s):
    return json.dumps(snapshot_to_dict(s), indent=2)


def dump_snapshots(snaps):
    return json.dumps([snapshot_to_dict(s) for s in snaps], indent=2)
