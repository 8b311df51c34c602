"""Command-line front end for the simulation harness.

Subcommands: ser, hitrate, rate, dynamic, protocol.  Results land as CSV
files in --out.  The exit code is nonzero when a run violates a built-in
invariant (symbol-count conservation, hit counts, config validation).
"""

from __future__ import annotations

import argparse
import json
import sys

from pathlib import Path

import numpy as np

from .config import ConfigError, DEFAULT_RAW, derive_config, derive_geometry
from .harness import (
    DynamicLogs,
    HitSetup,
    SerSetup,
    decile_dominance,
    dynamic_rows_for_csv,
    rate_vs_antennas,
    run_dynamic_scenario,
    run_hit_rate_sweep,
    run_ser_sweep,
    write_rows_csv,
)
from .scheduler import ProtocolTerminal, run_protocol


class InvariantError(RuntimeError):
    pass


def _parse_snr(text: str) -> list[float]:
    """lo:hi:step (inclusive) or a single value."""
    parts = text.split(":")
    if len(parts) == 1:
        return [float(parts[0])]
    if len(parts) != 3:
        raise ValueError("--snr expects <lo:hi:step> or a single value")
    lo, hi, step = (float(x) for x in parts)
    if step <= 0:
        raise ValueError("--snr step must be positive")
    return [float(v) for v in np.arange(lo, hi + step / 2, step)]


def _load_raw(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path) as f:
        raw = json.load(f)
    if not isinstance(raw, dict):
        raise ConfigError("config file must contain a JSON object")
    return raw


def _add_common(p: argparse.ArgumentParser, snr=True, trials=True,
                noise=True, schedule=True):
    p.add_argument("--config", metavar="<file>", default=None,
                   help="JSON parameter file; missing keys use defaults")
    if snr:
        p.add_argument("--snr", metavar="<lo:hi:step>", default=None,
                       help="SNR grid in dB, inclusive, or a single value")
    if trials:
        p.add_argument("--trials", metavar="<n>", type=int, default=10)
    p.add_argument("--seed", metavar="<n>", type=int, default=0)
    if noise:
        p.add_argument("--noise", choices=["gaussian", "urban"],
                       default="gaussian")
    if schedule:
        p.add_argument("--schedule",
                       choices=["conventional", "pseudo-random"],
                       default="pseudo-random")
    p.add_argument("--out", metavar="<dir>", default="out")


def _check_counts(rows: list[dict]):
    for r in rows:
        if "symbols" in r and "errored" in r:
            if r["decoded"] + r["errored"] + r["erased"] != r["symbols"]:
                raise InvariantError(
                    f"symbol conservation violated: {r}")
        if "hits" in r and not 0 <= r["hits"] <= r["paths"]:
            raise InvariantError(f"hit count out of range: {r}")


def _cmd_ser(args) -> int:
    raw = _load_raw(args.config)
    cfg, geo = derive_config(raw), derive_geometry(raw)
    snrs = _parse_snr(args.snr or "-30:-20:2")
    setups = [SerSetup(cfg, geo, s, noise_mode=args.noise,
                       schedule_mode=args.schedule) for s in snrs]
    rows = run_ser_sweep(setups, trials=args.trials, seed=args.seed)
    _check_counts(rows)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_rows_csv(out / "ser.csv", rows)
    for r in rows:
        print(f"snr={r['snr_db']:+.1f} dB  D={r['dpsk_order']}  "
              f"ser={r['ser']:.3e}  [{r['wilson_lo']:.3e}, {r['wilson_hi']:.3e}]  "
              f"symbols={r['symbols']}")
    return 0


def _cmd_hitrate(args) -> int:
    raw = _load_raw(args.config)
    cfg, geo = derive_config(raw), derive_geometry(raw)
    snrs = _parse_snr(args.snr or "-30:-20:2")
    setups = []
    for s in snrs:
        setups.append(HitSetup(cfg, geo, s, noise_mode=args.noise,
                               schedule_mode=args.schedule, modulated=True))
        setups.append(HitSetup(cfg, geo, s, noise_mode=args.noise,
                               schedule_mode=args.schedule, modulated=False))
    rows = run_hit_rate_sweep(setups, trials=args.trials, seed=args.seed)
    _check_counts(rows)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_rows_csv(out / "hitrate.csv", rows)
    for r in rows:
        kind = "data" if r["modulated"] else "plain"
        print(f"snr={r['snr_db']:+.1f} dB  {kind}  "
              f"hit={r['hit_rate']:.3f}  [{r['hit_lo']:.3f}, {r['hit_hi']:.3f}]")
    return 0


def _cmd_rate(args) -> int:
    raw = _load_raw(args.config)
    rows = rate_vs_antennas(base_raw=raw)
    for r in rows:
        if r["rate_bps"] <= 0:
            raise InvariantError(f"nonpositive rate: {r}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_rows_csv(out / "rate.csv", rows)
    for r in rows:
        print(f"l_tx={r['l_tx']}  bits/frame={r['bits_per_frame']}  "
              f"rate={r['rate_bps'] / 1e3:.1f} kbps")
    return 0


def _cmd_dynamic(args) -> int:
    raw = _load_raw(args.config)
    cfg, geo = derive_config(raw), derive_geometry(raw)
    snr = _parse_snr(args.snr or "10")[0]
    logs = run_dynamic_scenario(cfg, geo, n_frames=args.frames,
                                snr_db=snr, seed=args.seed)
    if logs.bit_errors > logs.bits_total:
        raise InvariantError("bit error count exceeds bit total")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_rows_csv(out / "dynamic.csv", dynamic_rows_for_csv(logs))
    cdf_rows = []
    for side, label in (("at", "pt1"), ("pt", "at")):
        pools = logs.error_pools(side, label)
        for what in ("d", "v"):
            ok, table = decile_dominance(pools[f"fused_{what}"],
                                         pools[f"raw_{what}"])
            for q, qf, qr in table:
                cdf_rows.append({"side": side, "label": label, "param": what,
                                 "decile": q, "fused": qf, "raw": qr,
                                 "dominates": ok})
    write_rows_csv(out / "dynamic_cdf.csv", cdf_rows)
    ber = logs.bit_errors / logs.bits_total if logs.bits_total else 0.0
    print(f"frames={args.frames}  snr={snr:+.1f} dB  "
          f"bits={logs.bits_total}  ber={ber:.3e}")
    for r in cdf_rows:
        if r["decile"] == 50:
            print(f"{r['side']}:{r['label']} {r['param']}  "
                  f"median fused={r['fused']:.3f}  raw={r['raw']:.3f}  "
                  f"dominates={r['dominates']}")
    return 0


def _cmd_protocol(args) -> int:
    raw = _load_raw(args.config)
    cfg = derive_config(raw)
    rng = np.random.default_rng(args.seed)
    terminals = [
        ProtocolTerminal("at", "at"),
        ProtocolTerminal("pt1", "pt", prop_delay=float(rng.uniform(0, 2)),
                         clock_offset=float(rng.uniform(-1, 1))),
        ProtocolTerminal("pt2", "pt", prop_delay=float(rng.uniform(0, 2)),
                         clock_offset=float(rng.uniform(-1, 1))),
    ]
    states = run_protocol(cfg, terminals)
    rows = []
    for ident, st in sorted(states.items()):
        rows.append({"terminal": ident, "stage": st.stage.name,
                     "rb_set": " ".join(map(str, st.rb_set or [])),
                     "sync_delay": st.sync_delay if st.sync_delay is not None else "",
                     "acked": st.acked, "error": st.error or ""})
        if st.error:
            raise InvariantError(f"protocol error at {ident}: {st.error}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_rows_csv(out / "protocol.csv", rows)
    for r in rows:
        print(f"{r['terminal']}: stage={r['stage']} rb=[{r['rb_set']}] "
              f"acked={r['acked']}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="isacsim",
        description="Joint sensing/communication waveform simulator")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("ser", help="symbol-error-rate sweep over SNR")
    _add_common(p)
    p.set_defaults(fn=_cmd_ser)

    p = sub.add_parser("hitrate", help="sensing hit-rate sweep over SNR")
    _add_common(p)
    p.set_defaults(fn=_cmd_hitrate)

    p = sub.add_parser("rate", help="bit rate vs transmit antenna count")
    _add_common(p, snr=False, trials=False, noise=False, schedule=False)
    p.set_defaults(fn=_cmd_rate)

    p = sub.add_parser("dynamic", help="three-terminal tracking scenario")
    _add_common(p, trials=False)
    p.add_argument("--frames", metavar="<n>", type=int, default=500)
    p.set_defaults(fn=_cmd_dynamic)

    p = sub.add_parser("protocol", help="link-setup handshake walkthrough")
    _add_common(p, snr=False, trials=False, noise=False, schedule=False)
    p.set_defaults(fn=_cmd_protocol)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, InvariantError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
