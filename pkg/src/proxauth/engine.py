"""Join/attach/re-authenticate state machine for proximity-verified nodes.

All functions here are pure: they take immutable records and return new ones
together with any admin events the transition produced. Ordering, clocks and
scanning belong to the caller (see :mod:`proxauth.harness`).
"""

import json
from dataclasses import dataclass, replace
from enum import Enum

from .errors import MalformedDocument, NotAuthenticated, VerifierNotAuthenticated
from .proximity import ProximityDecision, decide, euclidean_distance
from .scan import DEFAULT_FLOOR_DBM, DeviceIdentity, align, top_n

__all__ = [
    "DEFAULT_REAUTH_PERIOD_MS",
    "AdminEvent",
    "DeviceRegistry",
    "EventKind",
    "IdentityResult",
    "JoinRequest",
    "NodeRecord",
    "NodeState",
    "Session",
    "VerifierVote",
    "admit",
    "bootstrap_node",
    "check_identity",
    "compare_snapshots",
    "evaluate_join",
    "event_sort_key",
    "reauth_tick",
    "resolve_votes",
]

DEFAULT_REAUTH_PERIOD_MS = 30_000


class NodeState(str, Enum):
    UNAUTHENTICATED = "Unauthenticated"
    AUTHENTICATED = "Authenticated"
    REJECTED = "Rejected"


class IdentityResult(str, Enum):
    KNOWN = "Known"
    UNKNOWN = "Unknown"


class EventKind(str, Enum):
    IDENTITY_MISMATCH = "IdentityMismatch"
    SESSION_TERMINATED = "SessionTerminated"
    JOIN_REJECTED = "JoinRejected"


@dataclass(frozen=True)
class Session:
    session_id: str
    peer: str
    started_at_ms: int
    last_verified_at_ms: int
    reauth_period_ms: int = DEFAULT_REAUTH_PERIOD_MS

    def __post_init__(self):
        if self.reauth_period_ms <= 0:
            raise ValueError("reauth_period_ms must be positive")
        if self.last_verified_at_ms < self.started_at_ms:
            raise ValueError("session verified before it started")

    def is_live(self, now_ms):
        return now_ms - self.last_verified_at_ms < self.reauth_period_ms

    def to_dict(self):
        return {
            "session_id": self.session_id,
            "peer": self.peer,
            "started_at_ms": self.started_at_ms,
            "last_verified_at_ms": self.last_verified_at_ms,
            "reauth_period_ms": self.reauth_period_ms,
        }


@dataclass(frozen=True)
class NodeRecord:
    node_id: str
    identity: DeviceIdentity
    state: NodeState = NodeState.UNAUTHENTICATED
    attached_to: str = None
    session: Session = None
    root: bool = False

    def __post_init__(self):
        if (self.state is NodeState.AUTHENTICATED) != (self.session is not None):
            raise ValueError(f"{self.node_id}: Authenticated state and session presence disagree")
        if self.root and self.attached_to is not None:
            raise ValueError(f"{self.node_id}: a root node cannot be attached to another node")

    @property
    def authenticated(self):
        return self.state is NodeState.AUTHENTICATED

    def to_dict(self):
        return {
            "node_id": self.node_id,
            "identity": self.identity.to_dict(),
            "state": self.state.value,
            "attached_to": self.attached_to,
            "root": self.root,
            "session": self.session.to_dict() if self.session else None,
        }


@dataclass(frozen=True)
class JoinRequest:
    requester_id: str
    identity: DeviceIdentity
    snapshot: object

    def __post_init__(self):
        if self.snapshot.device_id != self.requester_id:
            raise ValueError(
                f"snapshot belongs to {self.snapshot.device_id!r}, not requester {self.requester_id!r}"
            )


@dataclass(frozen=True)
class VerifierVote:
    verifier_id: str
    distance: object
    decision: ProximityDecision

    def to_dict(self):
        return {
            "verifier_id": self.verifier_id,
            "distance": self.distance.value,
            "n_dims": self.distance.n_dims,
            "decision": self.decision.value,
        }


class DeviceRegistry:
    """Provisioned device identities; membership is exact (kind, value) equality."""

    def __init__(self, entries=()):
        self._entries = frozenset(entries)

    def __contains__(self, identity):
        return identity in self._entries

    def __len__(self):
        return len(self._entries)

    def __eq__(self, other):
        if not isinstance(other, DeviceRegistry):
            return NotImplemented
        return self._entries == other._entries

    def __hash__(self):
        return hash(self._entries)

    def __iter__(self):
        return iter(sorted(self._entries, key=lambda i: (i.kind.value, i.value)))

    def with_identity(self, identity):
        return DeviceRegistry(self._entries | {identity})

    def to_list(self):
        return [i.to_dict() for i in self]

    @classmethod
    def from_list(cls, items):
        if not isinstance(items, list):
            raise MalformedDocument("registry must be a JSON array")
        return cls(DeviceIdentity.from_dict(d) for d in items)

    @classmethod
    def loads(cls, raw):
        try:
            return cls.from_list(json.loads(raw))
        except json.JSONDecodeError as exc:
            raise MalformedDocument(f"invalid registry JSON: {exc}") from None


@dataclass(frozen=True)
class AdminEvent:
    at_ms: int
    kind: EventKind
    subject: str
    detail: str = ""

    def to_dict(self):
        return {"at_ms": self.at_ms, "kind": self.kind.value, "subject": self.subject, "detail": self.detail}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def event_sort_key(e):
    return (e.at_ms, e.subject)


# ---------------------------------------------------------------------------
# proximity pipeline
# ---------------------------------------------------------------------------

def _restrict(full, bssids):
    keep = set(bssids)
    return type(full)(full.device_id, full.captured_at, [o for o in full.observations if o.bssid in keep])


def compare_snapshots(a, b, n_strongest=10, floor=DEFAULT_FLOOR_DBM, fill_from_scan=True):
    """Distance between two scans over the union of each side's ``n_strongest`` APs.

    With ``fill_from_scan`` an AP that made only one side's strongest set is
    compared against the other side's actual reading when that side heard it;
    the floor is used only for APs a device did not observe at all. Without
    it, both sides are truncated first and every one-sided AP gets ``floor``.
    """
    ta, tb = top_n(a, n_strongest), top_n(b, n_strongest)
    if fill_from_scan:
        universe = set(ta.bssids) | set(tb.bssids)
        ta, tb = _restrict(a, universe), _restrict(b, universe)
    return euclidean_distance(align(ta, tb, floor))


def evaluate_join(req, verifier, verifier_snapshot, policy, n_strongest=10, floor=DEFAULT_FLOOR_DBM,
                  fill_from_scan=True):
    """One verifier's vote on a join request."""
    if not verifier.authenticated:
        raise VerifierNotAuthenticated(f"{verifier.node_id} is {verifier.state.value}")
    d = compare_snapshots(verifier_snapshot, req.snapshot, n_strongest, floor, fill_from_scan)
    return VerifierVote(verifier.node_id, d, decide(d, policy))


def resolve_votes(votes):
    """Winning vote: the accepting verifier with the least distance, or ``None``."""
    accepted = [v for v in votes if v.decision is ProximityDecision.ACCEPT]
    if not accepted:
        return None
    return min(accepted, key=lambda v: (v.distance.value, v.verifier_id))


def check_identity(registry, identity):
    return IdentityResult.KNOWN if identity in registry else IdentityResult.UNKNOWN


# ---------------------------------------------------------------------------
# state transitions
# ---------------------------------------------------------------------------

def bootstrap_node(node_id, identity, now_ms=0, reauth_period_ms=DEFAULT_REAUTH_PERIOD_MS):
    """A provisioned root node, authenticated without a proximity check."""
    session = Session(f"{node_id}@{now_ms}", node_id, now_ms, now_ms, reauth_period_ms)
    return NodeRecord(node_id, identity, NodeState.AUTHENTICATED, None, session, root=True)


def admit(req, votes, registry, now_ms, reauth_period_ms=DEFAULT_REAUTH_PERIOD_MS):
    """Authenticate the requester iff some verifier accepted it and its identity is registered.

    Both checks always run so an identity mismatch behind a passing proximity
    check is visible in the event log.
    """
    winner = resolve_votes(votes)
    identity_ok = check_identity(registry, req.identity) is IdentityResult.KNOWN
    if winner is not None and identity_ok:
        session = Session(f"{req.requester_id}@{now_ms}", winner.verifier_id, now_ms, now_ms, reauth_period_ms)
        node = NodeRecord(req.requester_id, req.identity, NodeState.AUTHENTICATED, winner.verifier_id, session)
        return node, []

    events = []
    reasons = []
    if not identity_ok:
        events.append(AdminEvent(now_ms, EventKind.IDENTITY_MISMATCH, req.requester_id,
                                 f"identity {req.identity} not in registry"))
        reasons.append("identity unknown")
    if winner is None:
        reasons.append(f"no verifier accepted proximity ({len(votes)} votes)")
    else:
        reasons.append(f"proximity accepted by {winner.verifier_id}")
    events.append(AdminEvent(now_ms, EventKind.JOIN_REJECTED, req.requester_id, "; ".join(reasons)))
    return NodeRecord(req.requester_id, req.identity, NodeState.REJECTED), events


def reauth_tick(node, fresh_pair_distance, policy, now_ms):
    """Refresh or terminate a session from a new distance to the node's peer."""
    if not node.authenticated:
        raise NotAuthenticated(f"{node.node_id} is {node.state.value}")
    if decide(fresh_pair_distance, policy) is ProximityDecision.ACCEPT:
        return replace(node, session=replace(node.session, last_verified_at_ms=now_ms)), []
    ended = replace(node, state=NodeState.UNAUTHENTICATED, session=None)
    detail = (f"distance {fresh_pair_distance.value:.3f} to {node.session.peer} "
              f"not below {policy.effective_threshold:.3f}")
    return ended, [AdminEvent(now_ms, EventKind.SESSION_TERMINATED, node.node_id, detail)]
