"""Command-line front end. Every subcommand emits a machine-readable JSON
report (schema in tdcnet/schemas/report.schema.json); identical argv + seed
produce byte-identical output.

Exit codes: 0 success, 1 verification failure, 2 usage/parse error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import dataflow, imageio, model, quant, scheduler, tdc
from .errors import TdcnetError
from .model import DeconvLayerSpec, FsrcnnConfig, Tensor3, build_fsrcnn, parse_weights
from .pipeline import infer

SCHEMA_VERSION = 1

# Layer shapes of the two built-in reproduction presets. The DCGAN generator
# preset stores shapes only (out maps, in maps, input H=W, kernel, stride).
DCGAN_LAYERS = [
    {"layer": 1, "m": 512, "n": 1024, "hin": 4, "kd": 5, "s": 2},
    {"layer": 2, "m": 256, "n": 512, "hin": 8, "kd": 5, "s": 2},
    {"layer": 3, "m": 128, "n": 256, "hin": 16, "kd": 5, "s": 2},
    {"layer": 4, "m": 3, "n": 128, "hin": 32, "kd": 5, "s": 2},
]
DCGAN_TILES = (4, 128)
FSRCNN_TILES = (56, 9)
FSRCNN_DECONV = {"m": 1, "n": 56, "kd": 9}
# Input pixel count back-solved from the baseline preset's published cycle
# total: 21,233,016 = ceil(56/9) * 81 * 4 * pixels  =>  pixels = 9,362.
FSRCNN_PIXELS = 9362


def _digest(argv: list[str], files: list[str]) -> str:
    h = hashlib.sha256()
    for tok in argv:
        h.update(tok.encode())
        h.update(b"\0")
    for path in files:
        with open(path, "rb") as f:
            h.update(f.read())
    return h.hexdigest()


def _emit(args, argv, results, input_files=()):
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": list(argv),
        "inputs_digest": _digest(list(argv), list(input_files)),
        "results": results,
    }
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    out = getattr(args, "out", None)
    if out:
        with open(out, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def _parse_bits(spec: str) -> list[int]:
    if ".." in spec:
        lo, hi = spec.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(tok) for tok in spec.split(",") if tok]


def _load_weight_file(path: str) -> model.WeightSet:
    with open(path) as f:
        return parse_weights(json.load(f))


# ---------------------------------------------------------------- subcommands

def _cmd_transform(args, argv):
    ws = _load_weight_file(args.weights)
    net = ws.network(args.scale)
    dec = net.deconv
    conv, za = tdc.transform_weights(dec)
    geom = tdc.derive_geometry(dec.kernel, dec.scale)
    results = {
        "geometry": _geometry_dict(geom),
        "transformed": {
            "kc": conv.kernel,
            "m": conv.out_maps,
            "n": conv.in_maps,
            "weights": conv.weights.reshape(-1).tolist(),
            "bias": conv.bias.tolist(),
        },
        "zero_analysis": {
            "num_zero": za.num_zero,
            "zero_ratio": za.zero_ratio,
            "per_filter_nonzero": list(za.per_filter_nonzero),
        },
    }
    _emit(args, argv, results, [args.weights])
    return 0


def _geometry_dict(geom: tdc.TdcGeometry) -> dict:
    return {
        "deconv_kernel": geom.deconv_kernel,
        "stride": geom.stride,
        "overlap": [geom.overlap.numerator, geom.overlap.denominator],
        "conv_kernel": geom.conv_kernel,
        "overlap_frac_ge_half": geom.overlap_frac_ge_half,
        "crop_offset": geom.crop_offset,
    }


def _verify_one(kd: int, s: int, seed: int) -> bool:
    rng = np.random.default_rng(seed)
    m, n = int(rng.integers(1, 4)), int(rng.integers(1, 4))
    h, w = int(rng.integers(1, 8)), int(rng.integers(1, 8))
    layer = DeconvLayerSpec(
        kd, s, m, n,
        rng.integers(-16, 17, size=(m, n, kd, kd)).astype(float),
        rng.integers(-16, 17, size=m).astype(float),
    )
    x = Tensor3(rng.integers(-16, 17, size=(n, h, w)).astype(float))
    got = tdc.deconv_via_transform(x, layer)
    want = tdc.deconv_oracle(x, layer)
    return bool(np.array_equal(got.data, want.data))


def _thread_cap() -> int:
    raw = os.environ.get("TDC_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _cmd_verify_tdc(args, argv):
    pairs = [(args.kd, args.stride)] if args.kd else [
        (kd, s) for s in (2, 3, 4) for kd in range(s, 12)
    ]
    seq = np.random.SeedSequence(args.seed)
    threads = _thread_cap()
    failures = 0
    detail = []
    for (kd, s), child in zip(pairs, seq.spawn(len(pairs))):
        # per-trial seeds come from the master seed, so the result set is
        # identical at any thread count
        seeds = [int(v) for v in child.generate_state(args.trials)]
        if threads > 1:
            from concurrent.futures import ThreadPoolExecutor
            with ThreadPoolExecutor(max_workers=threads) as pool:
                oks = list(pool.map(lambda sd: _verify_one(kd, s, sd), seeds))
        else:
            oks = [_verify_one(kd, s, sd) for sd in seeds]
        bad = sum(1 for ok in oks if not ok)
        tdc.find_crop_offset(
            DeconvLayerSpec(kd, s, 1, 1, np.zeros((1, 1, kd, kd)), np.zeros(1))
        )
        failures += bad
        detail.append({"kd": kd, "stride": s, "trials": args.trials, "failures": bad})
    _emit(args, argv, {"failures": failures, "configs": detail})
    return 0 if failures == 0 else 1


def _cmd_schedule(args, argv):
    layer = DeconvLayerSpec(
        args.kd, args.stride, 1, 1,
        np.arange(1.0, args.kd ** 2 + 1).reshape(1, 1, args.kd, args.kd),
        np.zeros(1),
    )
    pes = args.pes if args.pes else args.stride ** 2
    ls = scheduler.schedule_deconv_layer(layer, pes)
    sched = ls.groups[(0, 0)]
    streams = [
        [{"phase": i.phase_channel, "pos": list(i.input_pos), "weight": i.weight}
         for i in stream]
        for stream in sched.streams
    ]
    _emit(args, argv, {
        "geometry": _geometry_dict(ls.geometry),
        "pe_count": sched.pe_count,
        "depth": sched.depth,
        "streams": streams,
    })
    return 0


def _fsrcnn_cycle_rows() -> list[dict]:
    m, n, kd = FSRCNN_DECONV["m"], FSRCNN_DECONV["n"], FSRCNN_DECONV["kd"]
    tm, tn = FSRCNN_TILES
    rows = []
    for s in (2, 3, 4):
        proposed = scheduler.cycles_proposed(m, n, FSRCNN_PIXELS, 1, kd, s, tm, tn)
        baseline = scheduler.cycles_baseline(m, n, s * s * FSRCNN_PIXELS, 1, kd, tm, tn)
        case, speedup = scheduler.classify_case(m, tm, s, kd)
        row = {
            "model": "fsrcnn", "layer": 8, "kd": kd, "stride": s,
            "tm": tm, "tn": tn, "pixels": FSRCNN_PIXELS,
            "proposed_cycles": proposed, "baseline_cycles": baseline,
            "speedup": baseline / proposed, "case": case, "case_speedup": speedup,
        }
        if s == 4:
            # published total for this row (786k cycles) is about twice the
            # analytic model's result; left unmatched and flagged
            row["published_cycles_k"] = 786
            row["unexplained_discrepancy"] = True
        rows.append(row)
    return rows


def _dcgan_cycle_rows() -> list[dict]:
    tm, tn = DCGAN_TILES
    rows = []
    for spec in DCGAN_LAYERS:
        m, n, hin, kd, s = spec["m"], spec["n"], spec["hin"], spec["kd"], spec["s"]
        proposed = scheduler.cycles_proposed(m, n, hin, hin, kd, s, tm, tn)
        baseline = scheduler.cycles_baseline(m, n, s * hin, s * hin, kd, tm, tn)
        case, speedup = scheduler.classify_case(m, tm, s, kd)
        rows.append({
            "model": "dcgan", "layer": spec["layer"], "kd": kd, "stride": s,
            "tm": tm, "tn": tn,
            "proposed_cycles": proposed, "baseline_cycles": baseline,
            "speedup": baseline / proposed, "case": case, "case_speedup": speedup,
        })
    return rows


def _cmd_cycles(args, argv):
    if args.model == "dcgan":
        rows = _dcgan_cycle_rows()
    elif args.model == "fsrcnn":
        rows = _fsrcnn_cycle_rows()
    else:
        for flag in ("m", "n", "hin", "kd", "stride", "tm", "tn"):
            if getattr(args, flag) is None:
                raise TdcnetError(f"--model custom requires --{flag}")
        win = args.win if args.win else args.hin
        proposed = scheduler.cycles_proposed(args.m, args.n, args.hin, win,
                                             args.kd, args.stride, args.tm, args.tn)
        baseline = scheduler.cycles_baseline(args.m, args.n, args.stride * args.hin,
                                             args.stride * win, args.kd,
                                             args.tm, args.tn)
        case, speedup = scheduler.classify_case(args.m, args.tm, args.stride, args.kd)
        rows = [{
            "model": "custom", "kd": args.kd, "stride": args.stride,
            "tm": args.tm, "tn": args.tn,
            "proposed_cycles": proposed, "baseline_cycles": baseline,
            "speedup": baseline / proposed, "case": case, "case_speedup": speedup,
        }]
    totals = {
        "proposed_cycles": sum(r["proposed_cycles"] for r in rows),
        "baseline_cycles": sum(r["baseline_cycles"] for r in rows),
    }
    totals["speedup"] = totals["baseline_cycles"] / totals["proposed_cycles"]
    _emit(args, argv, {"layers": rows, "totals": totals})
    return 0


def _cmd_resources(args, argv):
    cfg = FsrcnnConfig(args.x, args.y, args.z, args.kd, frozenset({args.scale}))
    net = build_fsrcnn(cfg, args.scale)
    report = dataflow.resource_report(net, args.alpha, args.bits, args.width)
    geom = tdc.derive_geometry(args.kd, args.scale)
    za = tdc.zero_analysis(geom, 1, args.x)
    _emit(args, argv, {
        "config": {"x": args.x, "y": args.y, "z": args.z, "kd": args.kd,
                   "scale": args.scale},
        "geometry": _geometry_dict(geom),
        "zero_analysis": {"num_zero": za.num_zero, "zero_ratio": za.zero_ratio},
        "multiply_count": report.multiply_count,
        "dsp_count": report.dsp_count,
        "alpha": report.alpha,
        "bram_count": report.bram_count,
        "total_line_buffer_bits": report.total_line_buffer_bits,
        "bit_width": args.bits,
        "input_width": args.width,
        "note": "bram_count covers line buffers only; weight buffers, "
                "chroma-path buffers and I/O FIFOs are excluded",
    })
    return 0


def _cmd_plan(args, argv):
    cfg = FsrcnnConfig(args.x, args.y, args.z, args.kd, frozenset({args.scale}))
    net = build_fsrcnn(cfg, args.scale)
    plan = dataflow.plan_dataflow(net, args.width, args.bits)
    layers = [{
        "name": l.name, "kernel": l.kernel, "in_maps": l.in_maps,
        "out_maps": l.out_maps,
        "tiling": {"tm": l.tiling.out_tile, "tn": l.tiling.in_tile,
                   "tk": l.tiling.kernel_tile},
        "combined_with_next": l.combined_with_next,
        "buffered": l.buffered,
        "line_buffer_bits": l.line_buffer_bits,
    } for l in plan.layers]
    _emit(args, argv, {
        "layers": layers,
        "input_width": plan.input_width,
        "bit_width": plan.bit_width,
        "total_line_buffer_bits": plan.total_line_buffer_bits,
        "bram_count": dataflow.bram_count(plan),
    })
    return 0


def _cmd_infer(args, argv):
    ws = _load_weight_file(args.weights)
    net = ws.network(args.scale)
    image = imageio.read_image(args.input)
    kwargs = {}
    if args.mode == "fixed":
        q = quant.QFormat(args.bits, args.bits - 4)
        kwargs = {"q_weights": q, "q_activations": q}
    out = infer(image, net, args.scale, mode=args.mode, **kwargs)
    imageio.write_image(args.output, out)
    _emit(args, argv, {
        "input": args.input, "output": args.output,
        "scale": args.scale, "mode": args.mode,
        "input_size": list(image.shape), "output_size": list(out.shape),
    }, [args.weights, args.input])
    return 0


def _cmd_sweep_bitwidth(args, argv):
    ws = _load_weight_file(args.weights)
    net = ws.network(args.scale)
    exts = (".ppm", ".pgm", ".png")
    paths = sorted(
        os.path.join(args.images, f) for f in os.listdir(args.images)
        if f.lower().endswith(exts)
    )
    if not paths:
        raise TdcnetError(f"no .ppm/.pgm/.png images in {args.images}")
    images = [imageio.read_image(p) for p in paths]
    bits = _parse_bits(args.bits)
    results = quant.sweep_bitwidth(net, images, bits, args.scale)
    lines = "bits,psnr_db\n" + "".join(f"{b},{p:.6f}\n" for b, p in results)
    if args.out:
        with open(args.out, "w") as f:
            f.write(lines)
    else:
        sys.stdout.write(lines)
    return 0


# ------------------------------------------------------------------- parser

def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="tdcnet",
        description="Deconv-to-conv transform, PE scheduling, cycle/resource "
                    "models, and fixed-point super-resolution inference.",
    )
    sub = p.add_subparsers(dest="cmd", required=True)

    t = sub.add_parser("transform", help="transform a deconv layer to conv filters")
    t.add_argument("--weights", required=True)
    t.add_argument("--scale", type=int, required=True)
    t.add_argument("--out")
    t.set_defaults(func=_cmd_transform)

    v = sub.add_parser("verify-tdc", help="randomized transform-vs-oracle suite")
    v.add_argument("--kd", type=int)
    v.add_argument("--stride", type=int, default=2)
    v.add_argument("--trials", type=int, default=100)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--out")
    v.set_defaults(func=_cmd_verify_tdc)

    s = sub.add_parser("schedule", help="print PE instruction streams and depth")
    s.add_argument("--kd", type=int, required=True)
    s.add_argument("--stride", type=int, required=True)
    s.add_argument("--pes", type=int)
    s.add_argument("--out")
    s.set_defaults(func=_cmd_schedule)

    c = sub.add_parser("cycles", help="proposed vs baseline cycle report")
    c.add_argument("--model", choices=["fsrcnn", "dcgan", "custom"], required=True)
    for flag in ("m", "n", "hin", "win", "kd", "stride", "tm", "tn"):
        c.add_argument(f"--{flag}", type=int)
    c.add_argument("--out")
    c.set_defaults(func=_cmd_cycles)

    r = sub.add_parser("resources", help="multiplier/DSP/BRAM resource report")
    r.add_argument("--model", choices=["fsrcnn"], default="fsrcnn")
    r.add_argument("--x", type=int, required=True)
    r.add_argument("--y", type=int, required=True)
    r.add_argument("--z", type=int, required=True)
    r.add_argument("--kd", type=int, required=True)
    r.add_argument("--scale", type=int, required=True)
    r.add_argument("--alpha", type=float, default=0.7)
    r.add_argument("--bits", type=int, default=13)
    r.add_argument("--width", type=int, default=1920)
    r.add_argument("--out")
    r.set_defaults(func=_cmd_resources)

    pl = sub.add_parser("plan", help="per-layer dataflow/line-buffer plan")
    pl.add_argument("--x", type=int, required=True)
    pl.add_argument("--y", type=int, required=True)
    pl.add_argument("--z", type=int, required=True)
    pl.add_argument("--kd", type=int, required=True)
    pl.add_argument("--scale", type=int, required=True)
    pl.add_argument("--bits", type=int, default=13)
    pl.add_argument("--width", type=int, default=1920)
    pl.add_argument("--out")
    pl.set_defaults(func=_cmd_plan)

    i = sub.add_parser("infer", help="run super-resolution on one image")
    i.add_argument("--weights", required=True)
    i.add_argument("--scale", type=int, required=True)
    i.add_argument("--mode", choices=["float", "fixed"], default="float")
    i.add_argument("--bits", type=int, default=13)
    i.add_argument("--in", dest="input", required=True)
    i.add_argument("--out", dest="output", required=True)
    i.add_argument("--report")
    i.set_defaults(func=_cmd_infer, out=None)

    sw = sub.add_parser("sweep-bitwidth", help="fixed-vs-float PSNR per bit-width")
    sw.add_argument("--weights", required=True)
    sw.add_argument("--scale", type=int, required=True)
    sw.add_argument("--bits", default="8..16")
    sw.add_argument("--images", required=True)
    sw.add_argument("--out")
    sw.set_defaults(func=_cmd_sweep_bitwidth)
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code not in (0, None) else 0
    try:
        return args.func(args, argv)
    except TdcnetError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
