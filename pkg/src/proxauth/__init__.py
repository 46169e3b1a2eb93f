"""Proximity authentication for ad hoc IoT nodes from Wi-Fi beacon fingerprints."""

from ._kernels import BACKEND
from .engine import (
    AdminEvent,
    DeviceRegistry,
    JoinRequest,
    NodeRecord,
    NodeState,
    Session,
    VerifierVote,
    admit,
    check_identity,
    compare_snapshots,
    evaluate_join,
    reauth_tick,
    resolve_votes,
)
from .harness import Scenario, run_pair_experiment, run_scenario
from .proximity import (
    ConfusionMatrix,
    ProximityDecision,
    ProximityDistance,
    ThresholdPolicy,
    calibrate,
    decide,
    euclidean_distance,
    tally,
)
from .rfsim import Point2D, RfEnvironment, random_layout, snapshot_at
from .scan import AlignedPair, ApObservation, DeviceIdentity, ScanSnapshot, align, parse_snapshot, top_n

__version__ = "0.1.0"
