"""Command-line interface: ``levycodec <subcommand> ...``.

Every subcommand that runs the codec exits with status 0 only if all
certificates (lossless decode, bit count within the audit bound, error
within ``3 eps + tol``) pass, 1 if any fails, 2 on usage or input errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .bitstream import Container
from .codec import (
    audit_bit_bound,
    decode_container,
    encode_path,
    encode_truncated,
    to_container,
    truncation_budget,
)
from .errors import LevyCodecError
from .harness import (
    ExperimentConfig,
    codec_params,
    rd_from_csv,
    rd_slopes,
    rd_to_csv,
    roundtrip_trial,
    sweep,
    theory_curves,
    theory_to_csv,
)
from .path_sim import load_path, make_rng, save_path, simulate


def _load_config(args) -> ExperimentConfig:
    with open(args.config, encoding="utf-8") as fh:
        d = json.load(fh)
    if "triplet_file" in d and "triplet" not in d:
        base = os.path.dirname(os.path.abspath(args.config))
        with open(os.path.join(base, d.pop("triplet_file")), encoding="utf-8") as fh:
            d["triplet"] = json.load(fh)
    sim = dict(d.get("sim", {}))
    if getattr(args, "seed", None) is not None:
        sim["seed"] = args.seed
    d["sim"] = sim
    if getattr(args, "replicas", None) is not None:
        d["replicas"] = args.replicas
    if getattr(args, "mode", None) is not None:
        d["mode"] = args.mode
    return ExperimentConfig.from_dict(d)


def _out_dir(args):
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _eps(args, cfg):
    return args.eps if args.eps is not None else cfg.eps_grid[-1]


def cmd_simulate(args):
    cfg = _load_config(args)
    out = _out_dir(args)
    eps_min = _eps(args, cfg)
    for i in range(cfg.replicas):
        path = simulate(cfg.triplet, cfg.sim, eps_min, make_rng(cfg.sim.seed, 0, i))
        save_path(path, os.path.join(out, f"path_{i:05d}.csv"))
    print(f"wrote {cfg.replicas} path(s) to {out}")
    return 0


def cmd_encode(args):
    cfg = _load_config(args)
    eps = _eps(args, cfg)
    params = codec_params(cfg.triplet, eps, cfg.p, cfg.mode, cfg.c1, cfg.c2, cfg.time_code)
    path = load_path(args.path)
    if params.quant_mode:
        stream, records, truncated = encode_truncated(path, params)
        bound = truncation_budget(params) if truncated else audit_bit_bound(records, params)
    else:
        (stream, records), truncated = encode_path(path, params), False
        bound = audit_bit_bound(records, params)
    data = to_container(stream, params, truncated).to_bytes()
    with open(args.output, "wb") as fh:
        fh.write(data)
    ok = len(stream) <= bound
    print(json.dumps({"bits": len(stream), "audit_bound": bound, "M": len(records),
                      "truncated": truncated, "certificate_ok": ok}))
    return 0 if ok else 1


def cmd_decode(args):
    with open(args.input, "rb") as fh:
        data = fh.read()
    rec = decode_container(data)
    save_path(rec.to_path(), args.output)
    c = Container.from_bytes(data)
    print(json.dumps({"bits": len(c.stream), "M": rec.M, "truncated": rec.truncated_to_zero}))
    return 0


def cmd_roundtrip(args):
    cfg = _load_config(args)
    eps = _eps(args, cfg)
    ok_all = True
    lines = []
    for i in range(cfg.replicas):
        r = roundtrip_trial(cfg.triplet, eps, cfg, rng=make_rng(cfg.sim.seed, 0, i))
        ok_all &= r.certificate_ok
        lines.append({"replica": i, "eps": eps, "bits": r.bits, "error": r.error,
                      "audit_bound": r.audit, "truncated": r.truncated,
                      "certificate_ok": r.certificate_ok})
    text = "\n".join(json.dumps(line) for line in lines)
    if args.out:
        with open(os.path.join(_out_dir(args), "roundtrip.jsonl"), "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)
    return 0 if ok_all else 1


def cmd_sweep(args):
    cfg = _load_config(args)
    out = os.path.join(_out_dir(args), "rd.csv") if args.out else None
    points = sweep(cfg, workers=args.workers, out=out)
    sys.stdout.write(rd_to_csv(points))
    bad = sum(pt.cert_failures for pt in points)
    return 0 if bad == 0 else 1


def cmd_theory(args):
    cfg = _load_config(args)
    rows = theory_curves(cfg.triplet, cfg.eps_grid, r0=args.r0, c=args.c, c_user=args.c_user,
                         p=cfg.p)
    text = theory_to_csv(rows)
    if args.out:
        with open(os.path.join(_out_dir(args), "theory.csv"), "w", encoding="ascii") as fh:
            fh.write(text)
    sys.stdout.write(text)
    return 0


def cmd_slopes(args):
    with open(args.input, encoding="ascii") as fh:
        points = rd_from_csv(fh.read())
    result = rd_slopes(points)
    text = json.dumps(result, indent=2)
    if args.out:
        with open(os.path.join(_out_dir(args), "slopes.json"), "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="levycodec", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="experiment JSON")
        p.add_argument("--seed", type=int, help="override sim.seed")
        p.add_argument("--out", help="output directory")
        p.add_argument("--replicas", type=int, help="override the replica count")
        p.add_argument("--mode", choices=("entropy", "quant"), help="override the coding mode")

    p = sub.add_parser("simulate", help="simulate paths to CSV")
    common(p)
    p.add_argument("--eps", type=float, help="resolution setting the cutoff (default: smallest grid eps)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("encode", help="encode a path CSV into an LVC1 container")
    common(p)
    p.add_argument("--path", required=True)
    p.add_argument("--eps", type=float)
    p.add_argument("--output", "-o", required=True)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="decode an LVC1 container into a path CSV")
    p.add_argument("--input", "-i", required=True)
    p.add_argument("--output", "-o", required=True)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("roundtrip", help="simulate, encode, decode and certify replicas")
    common(p)
    p.add_argument("--eps", type=float)
    p.set_defaults(func=cmd_roundtrip)

    p = sub.add_parser("sweep", help="Monte-Carlo sweep over the eps grid")
    common(p)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("theory", help="lower-bound curves and F functionals")
    common(p)
    p.add_argument("--r0", type=float, default=0.5)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--c-user", dest="c_user", type=float, default=1.0)
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("slopes", help="log-log slopes of a sweep table")
    p.add_argument("--input", "-i", required=True, help="rd.csv from 'sweep'")
    p.add_argument("--out")
    p.set_defaults(func=cmd_slopes)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (LevyCodecError, ValueError, OSError) as exc:
        print(f"levycodec: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
