"""Operator command line: keygen, run, simulate, tamper, bench."""

from __future__ import annotations

import argparse
import json
import logging
import random
import sys
import time
from pathlib import Path

from . import net, wire
from .analysis import EXPECTED_REASON, MUTATION_TARGETS, honest_session, mutate_session
from .backend import (
    BenchSession,
    BillingLedger,
    TariffStore,
    bench_verify,
    verify_billing,
)
from .group import (
    DEFAULT_DOMAIN_TAG,
    PROD_GROUP_ID,
    derive_params,
    system_rng,
)
from .metering import INTERVALS_PER_DAY, build_report, constant_profile, synthetic_profile
from .privacy import Tariff
from .signing import MeterKeypair, load_public_key
from .simulate import run_simulation

logger = logging.getLogger("privbill")


def _rng_for(args) -> random.Random:
    seed = getattr(args, "seed", None)
    if seed is None:
        return system_rng()
    if not getattr(args, "test_mode", False):
        raise SystemExit("--seed requires --test-mode (deterministic runs are for tests)")
    return random.Random(seed)


def cmd_keygen(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    priv_path = out / "meter_key.pem"
    pub_path = out / "meter_pub.pem"
    params_path = out / "params.json"
    for path in (priv_path, pub_path, params_path):
        if path.exists() and not args.force:
            print(f"refusing to overwrite {path} (use --force)", file=sys.stderr)
            return 1
    keys = MeterKeypair.generate(args.meter_id)
    keys.save(priv_path, pub_path)
    params = derive_params(args.group, DEFAULT_DOMAIN_TAG)
    params_path.write_text(
        json.dumps(
            {
                "group_id": params.group_id,
                "domain_tag": DEFAULT_DOMAIN_TAG.decode(),
                "g": params.encode_element(params.g).hex(),
                "h": params.encode_element(params.h).hex(),
            },
            indent=2,
        )
        + "\n"
    )
    print(f"wrote {priv_path}, {pub_path}, {params_path}")
    return 0


def cmd_run(args) -> int:
    params = derive_params(args.group)
    if args.role == "bs":
        store = TariffStore()
        rng = _rng_for(args)
        n = args.intervals
        for day in range(args.days):
            tariff = Tariff(
                i0=day * n, rates=tuple(rng.randint(1, 100) for _ in range(n))
            )
            store.publish(args.meter_id, tariff)
        pub = load_public_key(Path(args.pubkey))
        server = net.BackendServer(
            params,
            {args.meter_id: pub},
            store,
            BillingLedger(Path(args.ledger)),
            host=args.host,
            port=args.port,
        )
        server.start()
        print(f"bs listening on {server.address[0]}:{server.address[1]}")
        _wait_forever(server)
        return 0
    if args.role == "pc":
        bs_host, bs_port = _parse_addr(args.backend)
        proxy = net.PrivacyProxy(
            params,
            args.group,
            (bs_host, bs_port),
            host=args.host,
            port=args.port,
        )
        proxy.start()
        print(f"pc listening on {proxy.address[0]}:{proxy.address[1]}")
        _wait_forever(proxy)
        return 0
    # meter: one report per cycle, then exit
    keys = MeterKeypair.load(args.meter_id, Path(args.key))
    rng = _rng_for(args)
    pc_host, pc_port = _parse_addr(args.connect)
    for cycle in range(args.cycles):
        i0 = cycle * args.intervals
        if args.level is not None:
            profile = constant_profile(args.level, i0=i0, n=args.intervals)
        else:
            profile = synthetic_profile(rng, i0=i0, n=args.intervals)
        report = build_report(params, keys, profile, rng)
        net.send_report(args.group, report, (pc_host, pc_port))
        logger.info("meter %s sent report for i0=%d n=%d", keys.meter_id, i0, args.intervals)
    return 0


def _parse_addr(spec: str) -> tuple[str, int]:
    host, _, port = spec.rpartition(":")
    return host or "127.0.0.1", int(port)


def _wait_forever(server):
    try:
        while True:
            time.sleep(0.5)
    except KeyboardInterrupt:
        server.stop()


def cmd_simulate(args) -> int:
    params = derive_params(args.group)
    summary = run_simulation(
        params,
        meters=args.meters,
        days=args.days,
        seed=args.seed,
        intervals_per_day=args.intervals,
        ledger_path=Path(args.ledger) if args.ledger else None,
    )
    if args.json:
        print(
            json.dumps(
                {
                    "sessions": summary.sessions,
                    "accepted": summary.accepted,
                    "rejected": summary.rejected,
                    "stage_means_s": summary.stage_means,
                    "reasons": summary.reasons,
                }
            )
        )
    else:
        print(f"sessions:  {summary.sessions}")
        print(f"accepted:  {summary.accepted}")
        print(f"rejected:  {summary.rejected}")
        for stage, mean in summary.stage_means.items():
            print(f"{stage:>8} stage mean: {mean * 1e3:8.3f} ms")
        for reason, count in summary.reasons.items():
            print(f"  reject reason {reason}: {count}")
    return 0 if summary.all_accepted else 1


def cmd_tamper(args) -> int:
    params = derive_params(args.group)
    rng = random.Random(args.seed) if args.seed is not None else system_rng()
    targets = [args.scenario] if args.scenario != "all" else list(MUTATION_TARGETS)
    keys = MeterKeypair.generate("tamper-meter")
    rows = []
    all_rejected = True
    for target in targets:
        rejected = 0
        wrong_reason = 0
        for _ in range(args.sessions):
            session = honest_session(
                params, keys, rng, n=args.intervals, nonzero_blinding=True
            )
            tampered = mutate_session(params, session, target, rng)
            verdict = verify_billing(params, keys.public_key, session.tariff, tampered)
            if not verdict.accepted:
                rejected += 1
                if verdict.reason != EXPECTED_REASON[target]:
                    wrong_reason += 1
        ok = rejected == args.sessions and wrong_reason == 0
        all_rejected = all_rejected and ok
        rows.append((target, args.sessions, rejected, EXPECTED_REASON[target], ok))
    print(f"{'target':<16} {'sessions':>8} {'rejected':>8} {'expected reason':<22} ok")
    for target, total, rejected, reason, ok in rows:
        print(f"{target:<16} {total:>8} {rejected:>8} {reason:<22} {'yes' if ok else 'NO'}")
    return 0 if all_rejected else 1


def cmd_bench(args) -> int:
    params = derive_params(args.group)
    rng = random.Random(args.seed) if args.seed is not None else system_rng()
    keys = MeterKeypair.generate("bench-meter")
    batch = []
    for _ in range(args.count):
        session = honest_session(params, keys, rng, n=args.intervals)
        batch.append(BenchSession(tariff=session.tariff, report=session.billing))
    result = bench_verify(
        params,
        keys.public_key,
        batch,
        workers=args.workers,
        sampling_rate=args.sampling_rate,
    )
    print(f"sessions:       {result.sessions}")
    print(f"verified:       {result.verified}")
    print(f"accepted:       {result.accepted}")
    print(f"elapsed:        {result.elapsed:.3f} s")
    print(f"mean verify:    {result.mean_s * 1e3:.3f} ms")
    print(f"p50/p90/p99:    {result.p50_s * 1e3:.3f} / {result.p90_s * 1e3:.3f} / {result.p99_s * 1e3:.3f} ms")
    print(f"throughput:     {result.per_second:.1f}/s ({result.per_day:.0f}/day)")
    return 0 if result.accepted == result.verified else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="privbill")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", help="generate meter keypair and public params")
    p.add_argument("--out", required=True)
    p.add_argument("--meter-id", default="meter-0001")
    p.add_argument("--group", default=PROD_GROUP_ID)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("run", help="run one protocol party")
    p.add_argument("role", choices=["meter", "pc", "bs"])
    p.add_argument("--group", default=PROD_GROUP_ID)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=0)
    p.add_argument("--meter-id", default="meter-0001")
    p.add_argument("--intervals", type=int, default=INTERVALS_PER_DAY)
    p.add_argument("--days", type=int, default=30, help="bs: tariff days to publish")
    p.add_argument("--pubkey", help="bs: meter public key PEM")
    p.add_argument("--ledger", default="ledger.jsonl", help="bs: ledger path")
    p.add_argument("--backend", help="pc: back-end address host:port")
    p.add_argument("--connect", help="meter: pc address host:port")
    p.add_argument("--key", help="meter: private key PEM")
    p.add_argument("--cycles", type=int, default=1)
    p.add_argument("--level", type=int, help="meter: constant consumption level")
    p.add_argument("--seed", type=int)
    p.add_argument("--test-mode", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("simulate", help="in-process end-to-end simulation")
    p.add_argument("--meters", type=int, default=10)
    p.add_argument("--days", type=int, default=7)
    p.add_argument("--intervals", type=int, default=INTERVALS_PER_DAY)
    p.add_argument("--group", default=PROD_GROUP_ID)
    p.add_argument("--seed", type=int)
    p.add_argument("--ledger")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("tamper", help="adversarial mutation drills")
    p.add_argument("--scenario", default="all", choices=["all", *MUTATION_TARGETS])
    p.add_argument("--sessions", type=int, default=20)
    p.add_argument("--intervals", type=int, default=8)
    p.add_argument("--group", default=PROD_GROUP_ID)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_tamper)

    p = sub.add_parser("bench", help="verification throughput benchmark")
    p.add_argument("--count", type=int, default=1000)
    p.add_argument("--intervals", type=int, default=INTERVALS_PER_DAY)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--sampling-rate", type=float, default=1.0)
    p.add_argument("--group", default=PROD_GROUP_ID)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
