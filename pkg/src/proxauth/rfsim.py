"""Synthetic RF environment: AP layout plus log-distance path loss with Gaussian shadowing.

Noise comes from explicit ``numpy.random.Generator`` streams. :func:`stream`
derives one from the environment seed and arbitrary labels (device id, event
time, ...), so a device's draws do not depend on what other devices do.
"""

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import InvalidArea, InvalidEnvironment, MalformedDocument, NoAccessPoints
from .scan import ApObservation, ScanSnapshot, normalize_bssid

__all__ = [
    "REFERENCE_DISTANCE_M",
    "AccessPointSpec",
    "Point2D",
    "RfEnvironment",
    "load_environment",
    "random_layout",
    "rssi_at",
    "snapshot_at",
    "snapshots_at",
    "stream",
]

REFERENCE_DISTANCE_M = 1.0


@dataclass(frozen=True)
class Point2D:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite coordinates ({self.x}, {self.y})")

    def distance_to(self, other):
        return math.hypot(self.x - other.x, self.y - other.y)

    def offset(self, dx, dy):
        return Point2D(self.x + dx, self.y + dy)


@dataclass(frozen=True)
class AccessPointSpec:
    bssid: str
    ssid: str
    position: Point2D
    p0: float = -40.0

    def __post_init__(self):
        object.__setattr__(self, "bssid", normalize_bssid(self.bssid))
        if not -60.0 <= self.p0 <= 0.0:
            raise InvalidEnvironment(f"p0 must lie in [-60, 0] dBm, got {self.p0}")


@dataclass(frozen=True, eq=False)
class RfEnvironment:
    aps: tuple
    path_loss_exponent: float = 2.5
    shadow_sigma: float = 2.0
    detection_floor: float = -90.0
    seed: int = 0

    def __post_init__(self):
        aps = tuple(self.aps)
        if len({ap.bssid for ap in aps}) != len(aps):
            raise InvalidEnvironment("duplicate BSSID in environment")
        if not self.path_loss_exponent > 0:
            raise InvalidEnvironment("path_loss_exponent must be > 0")
        if not self.shadow_sigma >= 0:
            raise InvalidEnvironment("shadow_sigma must be >= 0")
        object.__setattr__(self, "aps", aps)
        xy = np.array([[ap.position.x, ap.position.y] for ap in aps], dtype=np.float64).reshape(-1, 2)
        p0 = np.array([ap.p0 for ap in aps], dtype=np.float64)
        object.__setattr__(self, "_ap_xy", xy)
        object.__setattr__(self, "_p0", p0)

    def __eq__(self, other):
        if not isinstance(other, RfEnvironment):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(json.dumps(self.to_dict(), sort_keys=True))

    def replace(self, **changes):
        fields = dict(
            aps=self.aps,
            path_loss_exponent=self.path_loss_exponent,
            shadow_sigma=self.shadow_sigma,
            detection_floor=self.detection_floor,
            seed=self.seed,
        )
        fields.update(changes)
        return RfEnvironment(**fields)

    def mean_rssi(self, points):
        """Noise-free RSSI matrix, one row per point and one column per AP."""
        pts = np.array([[p.x, p.y] for p in points], dtype=np.float64).reshape(-1, 2)
        return _kernels.mean_rssi_field(self._ap_xy, self._p0, pts, self.path_loss_exponent)

    def to_dict(self):
        return {
            "aps": [
                {"bssid": ap.bssid, "ssid": ap.ssid, "x": ap.position.x, "y": ap.position.y, "p0_dbm": ap.p0}
                for ap in self.aps
            ],
            "path_loss_exponent": self.path_loss_exponent,
            "shadow_sigma_db": self.shadow_sigma,
            "detection_floor_dbm": self.detection_floor,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict) or not isinstance(d.get("aps"), list):
            raise MalformedDocument("environment must be an object with an 'aps' list")
        try:
            aps = [
                AccessPointSpec(a["bssid"], a.get("ssid", ""), Point2D(float(a["x"]), float(a["y"])),
                                float(a.get("p0_dbm", -40.0)))
                for a in d["aps"]
            ]
            return cls(
                aps,
                path_loss_exponent=float(d.get("path_loss_exponent", 2.5)),
                shadow_sigma=float(d.get("shadow_sigma_db", 2.0)),
                detection_floor=float(d.get("detection_floor_dbm", -90.0)),
                seed=int(d.get("seed", 0)),
            )
        except (KeyError, TypeError) as exc:
            raise MalformedDocument(f"bad environment document: {exc!r}") from None

    def dumps(self):
        return json.dumps(self.to_dict(), indent=2)


def load_environment(raw):
    try:
        return RfEnvironment.from_dict(json.loads(raw))
    except json.JSONDecodeError as exc:
        raise MalformedDocument(f"invalid environment JSON: {exc}") from None


def _label_words(label):
    digest = hashlib.sha256(repr(label).encode("utf-8")).digest()
    return [int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4)]


def stream(seed, *labels):
    """Independent RNG stream for ``(seed, *labels)``; labels may be any repr-stable values."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    for label in labels:
        entropy.extend(_label_words(label))
    return np.random.default_rng(np.random.SeedSequence(entropy))


def rssi_at(ap, p, env, rng=None):
    """RSSI in dBm seen at ``p`` from ``ap``, with one shadowing draw from ``rng``."""
    d = max(ap.position.distance_to(p), REFERENCE_DISTANCE_M)
    value = ap.p0 - 10.0 * env.path_loss_exponent * math.log10(d / REFERENCE_DISTANCE_M)
    if env.shadow_sigma > 0:
        if rng is None:
            raise ValueError("an RNG stream is required when shadow_sigma > 0")
        value += env.shadow_sigma * rng.standard_normal()
    return value


def snapshot_at(p, env, device_id, rng=None, captured_at=0):
    """Scan every AP from ``p``; APs whose noisy RSSI falls below the detection floor are omitted."""
    if not env.aps:
        raise NoAccessPoints("environment has no access points")
    rssi = env.mean_rssi([p])[0]
    if env.shadow_sigma > 0:
        if rng is None:
            raise ValueError("an RNG stream is required when shadow_sigma > 0")
        rssi = rssi + env.shadow_sigma * rng.standard_normal(len(env.aps))
    obs = [
        ApObservation(ap.ssid, ap.bssid, float(v))
        for ap, v in zip(env.aps, rssi)
        if v >= env.detection_floor
    ]
    return ScanSnapshot(device_id, int(captured_at), obs)


def snapshots_at(points, env, device_ids, rngs=None, captured_at=0):
    """Batch form of :func:`snapshot_at`: one mean-field kernel call for all points.

    Produces exactly what calling :func:`snapshot_at` per point with the same
    streams would.
    """
    if not env.aps:
        raise NoAccessPoints("environment has no access points")
    points = list(points)
    field_ = env.mean_rssi(points)
    out = []
    for i, device_id in enumerate(device_ids):
        rssi = field_[i]
        if env.shadow_sigma > 0:
            rssi = rssi + env.shadow_sigma * rngs[i].standard_normal(len(env.aps))
        obs = [
            ApObservation(ap.ssid, ap.bssid, float(v))
            for ap, v in zip(env.aps, rssi)
            if v >= env.detection_floor
        ]
        out.append(ScanSnapshot(device_id, int(captured_at), obs))
    return out


def random_layout(num_aps, width, height, seed, *, p0=-40.0, path_loss_exponent=2.5,
                  shadow_sigma=2.0, detection_floor=-90.0):
    """Uniformly scatter ``num_aps`` APs over a ``width`` x ``height`` metre floor.

    BSSIDs are drawn from the locally administered unicast range and are a pure
    function of ``seed``.
    """
    if isinstance(num_aps, bool) or not isinstance(num_aps, int) or num_aps < 1:
        raise InvalidArea(f"num_aps must be a positive integer, got {num_aps!r}")
    if not (width > 0 and height > 0 and math.isfinite(width) and math.isfinite(height)):
        raise InvalidArea(f"area must be positive, got {width} x {height}")
    rng = stream(seed, "layout")
    xs = rng.uniform(0.0, width, num_aps)
    ys = rng.uniform(0.0, height, num_aps)
    bssids = set()
    aps = []
    for i in range(num_aps):
        while True:
            octets = rng.integers(0, 256, 6)
            octets[0] = (int(octets[0]) & 0xFC) | 0x02  # locally administered, unicast
            bssid = ":".join(f"{int(o):02X}" for o in octets)
            if bssid not in bssids:
                break
        bssids.add(bssid)
        aps.append(AccessPointSpec(bssid, f"ap-{i:02d}", Point2D(float(xs[i]), float(ys[i])), p0))
    return RfEnvironment(aps, path_loss_exponent, shadow_sigma, detection_floor, int(seed))
