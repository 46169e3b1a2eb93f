"""``proxauth`` command line: verify, calibrate, simulate, experiment.

Exit codes: 0 success (or accept), 1 reject (``verify`` only), 2 error.
"""

import argparse
import dataclasses
import json
import pathlib
import sys
import warnings

from .engine import compare_snapshots
from .errors import CalibrationOverlap, ProxAuthError
from .harness import Scenario, calibrate_environment, dump_report, run_pair_experiment, run_scenario
from .proximity import ThresholdPolicy, calibrate, decide
from .rfsim import RfEnvironment, random_layout
from .scan import DEFAULT_FLOOR_DBM, parse_scan_set, parse_snapshot

EXIT_OK, EXIT_REJECT, EXIT_ERROR = 0, 1, 2


class CliError(Exception):
    pass


def _read(path):
    try:
        return pathlib.Path(path).read_bytes()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror or exc}") from None


def _write(path, text):
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        pathlib.Path(path).write_text(text)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc.strerror or exc}") from None


def _load_policy(path, tolerance=None):
    policy = ThresholdPolicy.loads(_read(path))
    return policy.with_tolerance(tolerance) if tolerance is not None else policy


def _emit(obj):
    sys.stdout.write(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def cmd_verify(args):
    a = parse_snapshot(_read(args.snapshot_a))
    b = parse_snapshot(_read(args.snapshot_b))
    policy = _load_policy(args.policy, args.tolerance)
    d = compare_snapshots(a, b, args.n_strongest, args.floor_dbm, not args.truncate_first)
    decision = decide(d, policy)
    _emit({
        "distance": d.value,
        "n_dims": d.n_dims,
        "effective_threshold": policy.effective_threshold,
        "decision": decision.value,
    })
    return EXIT_OK if decision.accepted else EXIT_REJECT


def _pair_distances(directory, n_strongest, floor, fill):
    root = pathlib.Path(directory)
    if not root.is_dir():
        raise CliError(f"not a directory: {directory}")
    out = []
    for path in sorted(root.glob("*.json")):
        snaps = parse_scan_set(_read(path))
        if len(snaps) < 2 or len(snaps) % 2:
            raise CliError(f"{path}: a pair file must hold an even, non-zero number of snapshots")
        for a, b in zip(snaps[::2], snaps[1::2]):
            out.append(compare_snapshots(a, b, n_strongest, floor, fill))
    return out


def cmd_calibrate(args):
    fill = not args.truncate_first
    near = _pair_distances(args.near_dir, args.n_strongest, args.floor_dbm, fill)
    far = _pair_distances(args.far_dir, args.n_strongest, args.floor_dbm, fill) if args.far_dir else None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", CalibrationOverlap)
        policy = calibrate(near, far)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    if args.tolerance is not None:
        policy = policy.with_tolerance(args.tolerance)
    _write(args.out, policy.dumps() + "\n")
    return EXIT_OK


def cmd_simulate(args):
    path = pathlib.Path(args.scenario)
    scenario = Scenario.loads(_read(path), base_dir=path.parent)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.policy is not None:
        changes["policy"] = _load_policy(args.policy)
    if args.tolerance is not None:
        changes["policy"] = changes.get("policy", scenario.policy).with_tolerance(args.tolerance)
    if changes:
        scenario = dataclasses.replace(scenario, **changes)
    report = run_scenario(scenario)
    _write(args.out, dump_report(report))
    if args.events_out:
        _write(args.events_out, "".join(json.dumps(e, sort_keys=True) + "\n" for e in report["events"]))
    return EXIT_OK


def cmd_experiment(args):
    if args.env:
        env = RfEnvironment.from_dict(json.loads(_read(args.env)))
    else:
        env = random_layout(args.aps, args.width, args.height, args.layout_seed)
    if args.shadow_sigma is not None:
        env = env.replace(shadow_sigma=args.shadow_sigma)
    fill = not args.truncate_first
    if args.policy:
        policy = _load_policy(args.policy)
    else:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", CalibrationOverlap)
            policy = calibrate_environment(env, seed=args.seed, n_strongest=args.n_strongest,
                                           floor=args.floor_dbm, fill_from_scan=fill)
    if args.tolerance is not None:
        policy = policy.with_tolerance(args.tolerance)
    cm = run_pair_experiment(env, policy, n_locations=args.locations, near_attempts=args.near_attempts,
                             far_attempts=args.far_attempts, near_max_m=args.near_max_m,
                             far_range_m=(args.far_min_m, args.far_max_m), seed=args.seed,
                             n_strongest=args.n_strongest, floor=args.floor_dbm, fill_from_scan=fill)
    result = {
        "schema_version": 1,
        "seed": args.seed,
        "policy": policy.to_dict(),
        "effective_threshold": policy.effective_threshold,
        "n": cm.n,
        "confusion": cm.to_dict(),
    }
    _write(args.out, json.dumps(result, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def _common(p):
    p.add_argument("--n-strongest", type=int, default=10, help="strongest APs kept per scan (default 10)")
    p.add_argument("--floor-dbm", type=float, default=DEFAULT_FLOOR_DBM,
                   help="RSSI assumed for an AP a device did not hear (default -100)")
    p.add_argument("--tolerance", type=float, default=None, help="override the policy tolerance fraction")
    p.add_argument("--truncate-first", action="store_true",
                   help="compare truncated scans only (floor every one-sided AP)")


def build_parser():
    parser = argparse.ArgumentParser(prog="proxauth", description="Wi-Fi fingerprint proximity authentication")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="compare two snapshot files against a policy")
    p.add_argument("snapshot_a")
    p.add_argument("snapshot_b")
    p.add_argument("--policy", required=True)
    _common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("calibrate", help="derive a threshold policy from pair files")
    p.add_argument("near_dir", help="directory of *.json scan-set files, each holding co-located pairs")
    p.add_argument("--far-dir", default=None)
    p.add_argument("--out", default=None, help="policy file to write (default stdout)")
    _common(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("simulate", help="run a scenario file and write its report")
    p.add_argument("scenario")
    p.add_argument("--out", default=None, help="report file (default stdout)")
    p.add_argument("--events-out", default=None, help="admin events as JSON lines")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--policy", default=None)
    p.add_argument("--tolerance", type=float, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("experiment", help="two-device accuracy experiment on a simulated environment")
    p.add_argument("--env", default=None, help="environment JSON (default: random layout)")
    p.add_argument("--aps", type=int, default=15)
    p.add_argument("--width", type=float, default=50.0)
    p.add_argument("--height", type=float, default=30.0)
    p.add_argument("--layout-seed", type=int, default=0)
    p.add_argument("--shadow-sigma", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--policy", default=None, help="policy file (default: calibrate on the environment)")
    p.add_argument("--locations", type=int, default=10)
    p.add_argument("--near-attempts", type=int, default=5)
    p.add_argument("--far-attempts", type=int, default=5)
    p.add_argument("--near-max-m", type=float, default=2.0)
    p.add_argument("--far-min-m", type=float, default=4.0)
    p.add_argument("--far-max-m", type=float, default=10.0)
    p.add_argument("--out", default=None)
    _common(p)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    try:
        return args.func(args)
    except (CliError, ProxAuthError, ValueError) as exc:
        print(f"proxauth {args.command}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
