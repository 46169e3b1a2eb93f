"""Deterministic scenario runner and the two-device pair experiment.

The broadcast bus between nodes is ideal: every join request reaches every
authenticated node instantly and in order. Events are processed in
``(at_ms, subject)`` order; within one subject and instant, moves apply
before arrivals, and arrivals before re-authentication ticks.
"""

import heapq
import json
import math
import pathlib
from dataclasses import dataclass, replace

from .engine import (
    DEFAULT_REAUTH_PERIOD_MS,
    AdminEvent,
    DeviceRegistry,
    EventKind,
    JoinRequest,
    NodeState,
    admit,
    bootstrap_node,
    check_identity,
    compare_snapshots,
    evaluate_join,
    reauth_tick,
    resolve_votes,
)
from .errors import InvalidScenario, MalformedDocument, ProxAuthError
from .proximity import ThresholdPolicy, calibrate, decide, tally
from .rfsim import Point2D, RfEnvironment, random_layout, snapshot_at, snapshots_at, stream
from .scan import DEFAULT_FLOOR_DBM, DeviceIdentity

__all__ = [
    "REPORT_SCHEMA_VERSION",
    "Arrival",
    "Move",
    "NodeSpec",
    "Scenario",
    "calibrate_environment",
    "dump_report",
    "pair_attempts",
    "run_pair_experiment",
    "run_scenario",
    "verify_report",
]

REPORT_SCHEMA_VERSION = 1

_MOVE, _ARRIVAL, _TICK = 0, 1, 2


@dataclass(frozen=True)
class NodeSpec:
    node_id: str
    identity: DeviceIdentity
    position: Point2D


@dataclass(frozen=True)
class Arrival:
    at_ms: int
    node_id: str
    identity: DeviceIdentity
    position: Point2D
    # replay another node's join-time scan verbatim instead of scanning
    replay_snapshot_of: str = None


@dataclass(frozen=True)
class Move:
    at_ms: int
    node_id: str
    position: Point2D


@dataclass(frozen=True)
class Scenario:
    environment: RfEnvironment
    bootstrap: tuple
    policy: ThresholdPolicy
    registry: DeviceRegistry
    arrivals: tuple = ()
    moves: tuple = ()
    n_strongest: int = 10
    floor_dbm: float = DEFAULT_FLOOR_DBM
    reauth_period_ms: int = DEFAULT_REAUTH_PERIOD_MS
    seed: int = 0
    until_ms: int = None
    ground_truth_range_m: float = None
    fill_from_scan: bool = True

    def __post_init__(self):
        for name in ("bootstrap", "arrivals", "moves"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        self.validate()

    def validate(self):
        if not self.bootstrap:
            raise InvalidScenario("scenario needs at least one bootstrap node")
        ids = [b.node_id for b in self.bootstrap] + [a.node_id for a in self.arrivals]
        if len(set(ids)) != len(ids):
            raise InvalidScenario("node ids must be unique across bootstrap and arrivals")
        for b in self.bootstrap:
            if b.identity not in self.registry:
                raise InvalidScenario(f"bootstrap node {b.node_id} has an unregistered identity")
        for label, seq in (("arrivals", self.arrivals), ("moves", self.moves)):
            times = [e.at_ms for e in seq]
            if any(t < 0 for t in times) or times != sorted(times):
                raise InvalidScenario(f"{label} must have non-negative, non-decreasing times")
        known = set(ids)
        for m in self.moves:
            if m.node_id not in known:
                raise InvalidScenario(f"move refers to unknown node {m.node_id}")
        for a in self.arrivals:
            if a.replay_snapshot_of is not None and a.replay_snapshot_of not in known:
                raise InvalidScenario(f"{a.node_id} replays unknown node {a.replay_snapshot_of}")
        if self.n_strongest < 1 or self.reauth_period_ms <= 0:
            raise InvalidScenario("n_strongest and reauth_period_ms must be positive")
        if not self.environment.aps:
            raise InvalidScenario("environment has no access points")

    @property
    def end_ms(self):
        if self.until_ms is not None:
            return self.until_ms
        last = max([0] + [a.at_ms for a in self.arrivals] + [m.at_ms for m in self.moves])
        return last + self.reauth_period_ms

    # -- JSON ------------------------------------------------------------

    @classmethod
    def from_dict(cls, d, base_dir=None):
        if not isinstance(d, dict):
            raise InvalidScenario("scenario must be a JSON object")
        try:
            env = _environment_from(d, base_dir)
            registry = DeviceRegistry.from_list(d.get("registry", []))
            bootstrap = [NodeSpec(b["node_id"], DeviceIdentity.from_dict(b["identity"]), _point(b))
                         for b in d["bootstrap"]]
            arrivals = [
                Arrival(int(a["at_ms"]), a["node_id"], DeviceIdentity.from_dict(a["identity"]), _point(a),
                        a.get("replay_snapshot_of"))
                for a in d.get("arrivals", [])
            ]
            moves = [Move(int(m["at_ms"]), m["node_id"], _point(m)) for m in d.get("moves", [])]
            policy = ThresholdPolicy.from_dict(d["policy"])
            return cls(
                environment=env,
                bootstrap=bootstrap,
                policy=policy,
                registry=registry,
                arrivals=arrivals,
                moves=moves,
                n_strongest=int(d.get("n_strongest", 10)),
                floor_dbm=float(d.get("floor_dbm", DEFAULT_FLOOR_DBM)),
                reauth_period_ms=int(d.get("reauth_period_ms", DEFAULT_REAUTH_PERIOD_MS)),
                seed=int(d.get("seed", 0)),
                until_ms=None if d.get("until_ms") is None else int(d["until_ms"]),
                ground_truth_range_m=d.get("ground_truth_range_m"),
                fill_from_scan=bool(d.get("fill_from_scan", True)),
            )
        except InvalidScenario:
            raise
        except (KeyError, TypeError, ValueError, ProxAuthError) as exc:
            raise InvalidScenario(f"bad scenario document: {exc!r}") from None

    @classmethod
    def loads(cls, raw, base_dir=None):
        try:
            doc = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise InvalidScenario(f"invalid scenario JSON: {exc}") from None
        return cls.from_dict(doc, base_dir)

    def to_dict(self):
        def place(p):
            return {"x": p.x, "y": p.y}

        d = {
            "environment": self.environment.to_dict(),
            "registry": self.registry.to_list(),
            "bootstrap": [{"node_id": b.node_id, "identity": b.identity.to_dict(), **place(b.position)}
                          for b in self.bootstrap],
            "arrivals": [],
            "moves": [{"at_ms": m.at_ms, "node_id": m.node_id, **place(m.position)} for m in self.moves],
            "policy": self.policy.to_dict(),
            "n_strongest": self.n_strongest,
            "floor_dbm": self.floor_dbm,
            "reauth_period_ms": self.reauth_period_ms,
            "seed": self.seed,
            "until_ms": self.until_ms,
            "ground_truth_range_m": self.ground_truth_range_m,
            "fill_from_scan": self.fill_from_scan,
        }
        for a in self.arrivals:
            item = {"at_ms": a.at_ms, "node_id": a.node_id, "identity": a.identity.to_dict(), **place(a.position)}
            if a.replay_snapshot_of is not None:
                item["replay_snapshot_of"] = a.replay_snapshot_of
            d["arrivals"].append(item)
        return d


def _point(d):
    return Point2D(float(d["x"]), float(d["y"]))


def _environment_from(d, base_dir):
    if "environment" in d:
        env = d["environment"]
        if isinstance(env, dict) and "random_layout" in env:
            spec = dict(env["random_layout"])
            return random_layout(int(spec.pop("num_aps")), float(spec.pop("width")),
                                 float(spec.pop("height")), int(spec.pop("seed", 0)), **spec)
        return RfEnvironment.from_dict(env)
    if "environment_file" in d:
        path = pathlib.Path(d["environment_file"])
        if base_dir is not None and not path.is_absolute():
            path = pathlib.Path(base_dir) / path
        try:
            return RfEnvironment.from_dict(json.loads(path.read_text()))
        except (OSError, json.JSONDecodeError, MalformedDocument) as exc:
            raise InvalidScenario(f"cannot load environment file {path}: {exc}") from None
    raise InvalidScenario("scenario needs 'environment' or 'environment_file'")


# ---------------------------------------------------------------------------
# scenario runner
# ---------------------------------------------------------------------------

class _Run:
    def __init__(self, s):
        self.s = s
        self.nodes = {}
        self.positions = {}
        self.events = []
        self.edges = []
        self.joins = []
        self.reauths = []
        self.outcomes = []
        self._queue = []
        self._seq = 0

    def push(self, at_ms, subject, kind, payload):
        heapq.heappush(self._queue, (at_ms, subject, kind, self._seq, payload))
        self._seq += 1

    def scan(self, node_id, at_ms, context):
        rng = stream(self.s.seed, "scan", node_id, at_ms, context)
        return snapshot_at(self.positions[node_id], self.s.environment, node_id, rng, captured_at=at_ms)

    def run(self):
        s = self.s
        for b in s.bootstrap:
            self.nodes[b.node_id] = bootstrap_node(b.node_id, b.identity, 0, s.reauth_period_ms)
            self.positions[b.node_id] = b.position
            self.push(s.reauth_period_ms, b.node_id, _TICK, None)
        for a in s.arrivals:
            self.push(a.at_ms, a.node_id, _ARRIVAL, a)
        for m in s.moves:
            self.push(m.at_ms, m.node_id, _MOVE, m)

        end = s.end_ms
        while self._queue and self._queue[0][0] <= end:
            at_ms, subject, kind, _, payload = heapq.heappop(self._queue)
            if kind == _MOVE:
                self.positions[subject] = payload.position
            elif kind == _ARRIVAL:
                self.arrive(payload)
            else:
                self.tick(subject, at_ms)
        return self.report()

    def arrive(self, a):
        s = self.s
        t = a.at_ms
        self.positions[a.node_id] = a.position
        verifiers = sorted(n for n, rec in self.nodes.items() if rec.authenticated)
        verifier_snaps = {v: self.scan(v, t, a.node_id) for v in verifiers}
        if a.replay_snapshot_of is not None:
            if a.replay_snapshot_of not in verifier_snaps:
                raise InvalidScenario(f"{a.node_id} replays {a.replay_snapshot_of}, which is not a verifier at {t}")
            snap = verifier_snaps[a.replay_snapshot_of].with_device(a.node_id)
        else:
            snap = self.scan(a.node_id, t, a.node_id)
        req = JoinRequest(a.node_id, a.identity, snap)
        votes = [
            evaluate_join(req, self.nodes[v], verifier_snaps[v], s.policy, s.n_strongest, s.floor_dbm,
                          s.fill_from_scan)
            for v in verifiers
        ]
        node, events = admit(req, votes, s.registry, t, s.reauth_period_ms)
        winner = resolve_votes(votes)
        self.nodes[a.node_id] = node
        self.events.extend(events)
        self.joins.append({
            "at_ms": t,
            "node_id": a.node_id,
            "identity": a.identity.to_dict(),
            "identity_known": check_identity(s.registry, a.identity).value == "Known",
            "votes": [v.to_dict() for v in votes],
            "proximity_winner": winner.verifier_id if winner else None,
            "outcome": node.state.value,
            "attached_to": node.attached_to,
        })
        if node.authenticated:
            self.edges.append({
                "node": a.node_id,
                "verifier": node.attached_to,
                "distance": winner.distance.value,
                "n_dims": winner.distance.n_dims,
                "at_ms": t,
            })
            self.push(t + s.reauth_period_ms, a.node_id, _TICK, None)
        if s.ground_truth_range_m is not None:
            within = any(a.position.distance_to(self.positions[v]) < s.ground_truth_range_m for v in verifiers)
            decision = "accept" if winner is not None else "reject"
            self.outcomes.append((decision, within))

    def tick(self, node_id, t):
        s = self.s
        node = self.nodes[node_id]
        if not node.authenticated:
            return
        if node.root:
            # provisioned roots have no peer to re-verify against
            self.nodes[node_id] = replace(node, session=replace(node.session, last_verified_at_ms=t))
            self.push(t + s.reauth_period_ms, node_id, _TICK, None)
            return
        peer_id = node.session.peer
        peer = self.nodes[peer_id]
        if not peer.authenticated:
            ended = replace(node, state=NodeState.UNAUTHENTICATED, session=None)
            self.nodes[node_id] = ended
            self.events.append(AdminEvent(t, EventKind.SESSION_TERMINATED, node_id,
                                          f"peer {peer_id} is no longer authenticated"))
            self.reauths.append({"at_ms": t, "node_id": node_id, "peer": peer_id, "distance": None,
                                 "outcome": "terminated"})
            return
        d = compare_snapshots(self.scan(peer_id, t, node_id), self.scan(node_id, t, node_id),
                              s.n_strongest, s.floor_dbm, s.fill_from_scan)
        node, events = reauth_tick(node, d, s.policy, t)
        self.nodes[node_id] = node
        self.events.extend(events)
        self.reauths.append({"at_ms": t, "node_id": node_id, "peer": peer_id, "distance": d.value,
                             "outcome": "refreshed" if node.authenticated else "terminated"})
        if node.authenticated:
            self.push(t + s.reauth_period_ms, node_id, _TICK, None)

    def report(self):
        s = self.s
        rep = {
            "schema_version": REPORT_SCHEMA_VERSION,
            "seed": s.seed,
            "policy": s.policy.to_dict(),
            "effective_threshold": s.policy.effective_threshold,
            "n_strongest": s.n_strongest,
            "floor_dbm": s.floor_dbm,
            "reauth_period_ms": s.reauth_period_ms,
            "end_ms": s.end_ms,
            "edges": self.edges,
            "joins": self.joins,
            "reauths": self.reauths,
            "events": [e.to_dict() for e in self.events],
            "final_states": [self.nodes[n].to_dict() for n in sorted(self.nodes)],
        }
        if s.ground_truth_range_m is not None:
            rep["ground_truth_range_m"] = s.ground_truth_range_m
            rep["confusion"] = tally(self.outcomes).to_dict()
        return rep



def run_scenario(s):
    """Play a scenario to completion and return its report as a JSON-ready dict."""
    return _Run(s).run()


def dump_report(report):
    """Canonical byte form of a report: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def verify_report(report):
    """Check a report's topology invariants; returns a list of violation messages."""
    problems = []
    by_node = {j["node_id"]: j for j in report["joins"]}
    # when each node became authenticated; roots at -1
    authed_at = {st["node_id"]: -1 for st in report["final_states"] if st["root"]}
    for e in report["edges"]:
        join = by_node.get(e["node"])
        accepts = [v for v in join["votes"] if v["decision"] == "accept"] if join else []
        if not accepts:
            problems.append(f"edge {e['node']}->{e['verifier']} has no accepting vote")
            continue
        best = min(accepts, key=lambda v: (v["distance"], v["verifier_id"]))
        if best["verifier_id"] != e["verifier"] or best["distance"] != e["distance"]:
            problems.append(f"edge {e['node']}->{e['verifier']} is not the least-distance accept")
        if authed_at.get(e["verifier"], math.inf) >= e["at_ms"]:
            problems.append(f"edge {e['node']}->{e['verifier']}: verifier not authenticated earlier")
        authed_at[e["node"]] = e["at_ms"]
    # forest: following attached_to from any node must terminate at a root
    parent = {e["node"]: e["verifier"] for e in report["edges"]}
    for start in parent:
        seen = set()
        n = start
        while n in parent:
            if n in seen:
                problems.append(f"cycle through {start}")
                break
            seen.add(n)
            n = parent[n]
        else:
            if authed_at.get(n) != -1:
                problems.append(f"{start} does not descend from a bootstrap node")
    terminations = {(e["subject"], e["at_ms"]) for e in report["events"] if e["kind"] == "SessionTerminated"}
    for r in report["reauths"]:
        if r["outcome"] == "terminated" and (r["node_id"], r["at_ms"]) not in terminations:
            problems.append(f"termination of {r['node_id']} at {r['at_ms']} has no admin event")
    rejected = {(e["subject"], e["at_ms"]) for e in report["events"] if e["kind"] == "JoinRejected"}
    for j in report["joins"]:
        if j["outcome"] == "Rejected" and (j["node_id"], j["at_ms"]) not in rejected:
            problems.append(f"rejected join of {j['node_id']} has no admin event")
        if j["outcome"] == "Authenticated" and not j["identity_known"]:
            problems.append(f"{j['node_id']} authenticated with an unregistered identity")
    return problems


# ---------------------------------------------------------------------------
# pair experiment
# ---------------------------------------------------------------------------

def _bounds(env):
    xs = [ap.position.x for ap in env.aps]
    ys = [ap.position.y for ap in env.aps]
    return min(xs), max(xs), min(ys), max(ys)


def pair_attempts(env, policy, n_locations=10, near_attempts=5, far_attempts=5, near_max_m=2.0,
                  far_range_m=(4.0, 10.0), seed=0, n_strongest=10, floor=DEFAULT_FLOOR_DBM,
                  fill_from_scan=True, phase="test"):
    """Per-attempt ``(distance, within_range)`` for the two-device experiment.

    At each location the verifier sits at a uniform point inside the AP
    bounding box; the requester is placed at a uniform distance in
    ``[0, near_max_m)`` (near) or ``far_range_m`` (far) in a uniform direction.
    ``policy`` only matters for the votes; distances do not depend on it.
    """
    lo_far, hi_far = far_range_m
    if not (0 < near_max_m <= lo_far <= hi_far):
        raise ValueError("need 0 < near_max_m <= far_range_m[0] <= far_range_m[1]")
    x0, x1, y0, y1 = _bounds(env)
    placer = stream(seed, phase, "placement")
    placements = []
    for loc in range(n_locations):
        centre = Point2D(float(placer.uniform(x0, x1)), float(placer.uniform(y0, y1)))
        for kind, count in (("near", near_attempts), ("far", far_attempts)):
            for i in range(count):
                r = placer.uniform(0.0, near_max_m) if kind == "near" else placer.uniform(lo_far, hi_far)
                theta = placer.uniform(0.0, 2.0 * math.pi)
                other = centre.offset(r * math.cos(theta), r * math.sin(theta))
                placements.append((loc, kind, i, centre, other))

    points, ids, rngs = [], [], []
    for loc, kind, i, centre, other in placements:
        for dev, p in (("verifier", centre), ("requester", other)):
            points.append(p)
            ids.append(dev)
            rngs.append(stream(seed, phase, loc, kind, i, dev))
    snaps = snapshots_at(points, env, ids, rngs)

    verifier = bootstrap_node("verifier", DeviceIdentity("UUID", "verifier"))
    out = []
    for k, (loc, kind, i, centre, other) in enumerate(placements):
        req = JoinRequest("requester", DeviceIdentity("UUID", "requester"), snaps[2 * k + 1])
        vote = evaluate_join(req, verifier, snaps[2 * k], policy, n_strongest, floor, fill_from_scan)
        out.append((vote.distance, kind == "near"))
    return out


def run_pair_experiment(env, policy, n_locations=10, near_attempts=5, far_attempts=5, near_max_m=2.0,
                        far_range_m=(4.0, 10.0), seed=0, n_strongest=10, floor=DEFAULT_FLOOR_DBM,
                        fill_from_scan=True):
    """Tally the two-device experiment under ``policy``; N = locations x (near + far)."""
    attempts = pair_attempts(env, policy, n_locations, near_attempts, far_attempts, near_max_m, far_range_m,
                             seed, n_strongest, floor, fill_from_scan)
    return tally((decide(d, policy), within) for d, within in attempts)


def calibrate_environment(env, seed=0, n_locations=10, near_attempts=5, far_attempts=5, near_max_m=2.0,
                          far_range_m=(4.0, 10.0), n_strongest=10, floor=DEFAULT_FLOOR_DBM,
                          fill_from_scan=True, use_far=True):
    """Threshold from a calibration run on its own RNG phase, separate from the test draws."""
    attempts = pair_attempts(env, ThresholdPolicy(0.0), n_locations, near_attempts, far_attempts, near_max_m,
                             far_range_m, seed, n_strongest, floor, fill_from_scan, phase="calibration")
    near = [d for d, within in attempts if within]
    far = [d for d, within in attempts if not within] if use_far else None
    return calibrate(near, far)
