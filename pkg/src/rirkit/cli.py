"""Command-line interface.

Subcommands: simulate, sample-rooms, augment, analyze, compare. Exit codes:
0 success, 1 simulation/runtime error, 2 bad arguments, 3 unpaired manifests.
Every run prints the resolved seed; all commands are deterministic given
their full flag set.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    direct_to_reverberant_ratio,
    energy_split,
    estimate_t60,
    schroeder_edc,
    segment_ir,
)
from .augment import AugmentSpec, augment_corpus
from .errors import InsufficientDecayError, RirkitError, SilentIrError
from .geometry import circular_array
from .io import read_ir, write_ir
from .sampler import (
    DEFAULT_SCATTERING,
    RoomConfig,
    generate_dataset,
    load_manifest,
)
from .simulate import ImageParams, simulate_rir
from .tracer import TraceParams

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2
EXIT_UNPAIRED = 3

ANALYZE_CSV_HEADER = "index,channel,t60_s,drr_db,direct_e,early_e,late_e"


def _load_config_file(path: str) -> dict:
    p = Path(path)
    data = p.read_bytes()
    if p.suffix.lower() == ".json":
        return json.loads(data)
    try:
        import tomllib  # py311+
    except ModuleNotFoundError:
        import tomli as tomllib
    try:
        return tomllib.loads(data.decode())
    except Exception:
        return json.loads(data)


def _parse_triplet(text: str, flag: str) -> list[float]:
    for sep in ("x", ","):
        parts = text.split(sep)
        if len(parts) == 3:
            try:
                return [float(v) for v in parts]
            except ValueError:
                break
    raise argparse.ArgumentTypeError(f"{flag} expects three numbers like 4x5x3 or 1.0,2.0,1.5")


def _merge_config(args: argparse.Namespace, keys: dict) -> dict:
    """Config-file values overridden by explicitly set flags."""
    merged = dict(keys)
    if getattr(args, "config", None):
        file_cfg = _load_config_file(args.config)
        for k in merged:
            if k in file_cfg:
                merged[k] = file_cfg[k]
    for k in merged:
        v = getattr(args, k, None)
        if v is not None:
            merged[k] = v
    return merged


def _fmt_float(v: float) -> str:
    if v is None:
        return ""
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(float(v))


def _json_safe(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _merge_config(
        args,
        {
            "room": None,
            "t60": None,
            "source": None,
            "array": None,
            "scattering": DEFAULT_SCATTERING,
            "engine": "gas",
            "fs": 16000,
            "rays": 100_000,
            "max_order": None,
            "ir_length": None,
            "seed": 0,
            "receiver_radius": 0.0875,
            "out": "rir.wav",
            "workers": 1,
        },
    )
    for required in ("room", "t60", "source", "array"):
        if cfg[required] is None:
            print(f"error: --{required.replace('_', '-')} is required (flag or config file)", file=sys.stderr)
            return EXIT_USAGE
    seed = int(cfg["seed"])
    print(f"seed: {seed}")
    room = cfg["room"] if isinstance(cfg["room"], list) else _parse_triplet(str(cfg["room"]), "--room")
    source = cfg["source"] if isinstance(cfg["source"], list) else _parse_triplet(str(cfg["source"]), "--source")
    array = cfg["array"] if isinstance(cfg["array"], list) else _parse_triplet(str(cfg["array"]), "--array")
    mics = circular_array(np.asarray(array, float), 0.035, 6, np.array([0.0, 0.0, 1.0]))
    config = RoomConfig(
        room_dims_m=[float(v) for v in room],
        t60_target_s=float(cfg["t60"]),
        scattering=float(cfg["scattering"]),
        source_m=[float(v) for v in source],
        array_center_m=[float(v) for v in array],
        array_axis=[0.0, 0.0, 1.0],
        mics_m=[[float(v) for v in m] for m in mics],
        seed=seed,
        index=0,
    )
    engine = str(cfg["engine"])
    if engine == "gas":
        params = TraceParams(
            n_rays=int(cfg["rays"]),
            fs=int(cfg["fs"]),
            ir_length=None if cfg["ir_length"] is None else float(cfg["ir_length"]),
            receiver_radius=float(cfg["receiver_radius"]),
            seed=seed,
            n_workers=int(cfg["workers"]),
        )
    elif engine == "image":
        params = ImageParams(
            fs=int(cfg["fs"]),
            ir_length=None if cfg["ir_length"] is None else float(cfg["ir_length"]),
            max_order=None if cfg["max_order"] is None else int(cfg["max_order"]),
        )
    else:
        print(f"error: unknown engine {engine!r}", file=sys.stderr)
        return EXIT_USAGE
    ir = simulate_rir(config, engine, params)
    out = write_ir(ir, cfg["out"])
    print(f"wrote {out} ({ir.n_channels} channels, {ir.n_samples} samples at {ir.sample_rate} Hz)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# sample-rooms
# ---------------------------------------------------------------------------


def cmd_sample_rooms(args: argparse.Namespace) -> int:
    seed = int(args.seed)
    print(f"seed: {seed}")
    if args.engine == "gas":
        params = TraceParams(
            n_rays=int(args.rays),
            fs=int(args.fs),
            ir_length=None if args.ir_length is None else float(args.ir_length),
            receiver_radius=float(args.receiver_radius),
            n_workers=int(args.workers),
        )
    else:
        params = ImageParams(
            fs=int(args.fs),
            ir_length=None if args.ir_length is None else float(args.ir_length),
            max_order=None if args.max_order is None else int(args.max_order),
        )

    def progress(done: int, total: int, status: str) -> None:
        if done % 10 == 0 or done == total:
            print(f"  [{done}/{total}] {status}")

    manifest_path = generate_dataset(
        n=int(args.n),
        seed=seed,
        engine=args.engine,
        params=params,
        out_dir=args.out_dir,
        scattering=args.scattering,
        progress=progress,
    )
    print(f"manifest: {manifest_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# augment
# ---------------------------------------------------------------------------


def _read_list(path: str) -> list[str]:
    return [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]


def cmd_augment(args: argparse.Namespace) -> int:
    seed = int(args.seed)
    print(f"seed: {seed}")
    lo, _, hi = args.snr.partition(":")
    spec = AugmentSpec(
        speech_manifest=_read_list(args.speech_list),
        rir_manifest=args.rir_manifest,
        noise_manifest=_read_list(args.noise_list),
        snr_range_db=(float(lo), float(hi if hi else lo)),
        output_channels=args.channels,
        seed=seed,
    )
    report = augment_corpus(spec, args.out_dir, n_workers=int(args.workers))
    print(f"augmented {report['count']} utterances, {report['failure_count']} failures")
    if report["failure_count"] > 0:
        for f in report["failures"]:
            print(f"  failed: {f}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------


def _analyze_ir(path: Path, index: int, plot_dir: Path | None, with_edc: bool = False) -> dict:
    ir = read_ir(path)
    channels = []
    for ch in range(ir.n_channels):
        row: dict = {"channel": ch}
        try:
            seg = segment_ir(ir, ch)
            direct_e, early_e, late_e = energy_split(ir, ch, seg)
            row["direct_e"] = direct_e
            row["early_e"] = early_e
            row["late_e"] = late_e
            total = direct_e + early_e + late_e
            if total > 0:
                row["direct_share"] = direct_e / total
                row["early_share"] = early_e / total
                row["late_share"] = late_e / total
            row["drr_db"] = direct_to_reverberant_ratio(ir, ch, seg)
        except RirkitError as exc:
            row["error"] = str(exc)
        edc = None
        try:
            edc = schroeder_edc(ir, ch)
            row["t60_s"] = estimate_t60(edc)
        except (InsufficientDecayError, SilentIrError) as exc:
            row["t60_s"] = None
            row["t60_error"] = str(exc)
        if with_edc and edc is not None:
            row["edc_db"] = [float(v) for v in edc.values]
        channels.append(row)
    if plot_dir is not None:
        from .plotting import plot_edc

        plot_dir.mkdir(parents=True, exist_ok=True)
        plot_edc(ir, plot_dir / f"{path.stem}_edc.svg", title=path.name)
    return {"index": index, "wav": path.name, "channels": channels}


def cmd_analyze(args: argparse.Namespace) -> int:
    if (args.ir is None) == (args.manifest is None):
        print("error: exactly one of --ir or --manifest is required", file=sys.stderr)
        return EXIT_USAGE
    plot_dir = Path(args.plot) if args.plot else None
    items = []
    if args.ir:
        items.append(_analyze_ir(Path(args.ir), 0, plot_dir, with_edc=args.edc))
    else:
        manifest = load_manifest(args.manifest)
        base = Path(args.manifest).parent
        for item in manifest["items"]:
            items.append(_analyze_ir(base / item["wav"], int(item["index"]), plot_dir, with_edc=args.edc))

    if args.json:
        payload = {"items": items}
        text = json.dumps(_jsonify(payload), indent=2, sort_keys=True)
    else:
        lines = [ANALYZE_CSV_HEADER]
        for item in items:
            for row in item["channels"]:
                lines.append(
                    ",".join(
                        [
                            str(item["index"]),
                            str(row["channel"]),
                            _fmt_float(row.get("t60_s")),
                            _fmt_float(row.get("drr_db")),
                            _fmt_float(row.get("direct_e")),
                            _fmt_float(row.get("early_e")),
                            _fmt_float(row.get("late_e")),
                        ]
                    )
                )
        text = "\n".join(lines)
    if args.out:
        Path(args.out).write_text(text + "\n")
        print(f"wrote {args.out}")
    else:
        print(text)
    return EXIT_OK


def _jsonify(obj):
    if isinstance(obj, dict):
        return {k: _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_jsonify(v) for v in obj]
    return _json_safe(obj)


# ---------------------------------------------------------------------------
# compare
# ---------------------------------------------------------------------------


def _pair_metrics(path: Path) -> dict:
    ir = read_ir(path)
    seg = segment_ir(ir, 0)
    direct_e, early_e, late_e = energy_split(ir, 0, seg)
    total = direct_e + early_e + late_e
    out = {
        "drr_db": direct_to_reverberant_ratio(ir, 0, seg),
        "late_share": late_e / total if total > 0 else 0.0,
    }
    try:
        out["t60_s"] = estimate_t60(schroeder_edc(ir, 0))
    except (InsufficientDecayError, SilentIrError):
        out["t60_s"] = None
    return out


def _geometry_paired(ca: dict, cb: dict) -> bool:
    keys = ("room_dims_m", "t60_target_s", "source_m", "mics_m")
    return all(ca.get(k) == cb.get(k) for k in keys)


def cmd_compare(args: argparse.Namespace) -> int:
    ma = load_manifest(args.manifest_a)
    mb = load_manifest(args.manifest_b)
    if ma["count"] != mb["count"] or len(ma["items"]) != len(mb["items"]):
        print("error: manifests have different item counts", file=sys.stderr)
        return EXIT_UNPAIRED
    base_a = Path(args.manifest_a).parent
    base_b = Path(args.manifest_b).parent
    pairs = []
    for ia, ib in zip(ma["items"], mb["items"]):
        if ia["index"] != ib["index"] or not _geometry_paired(ia["config"], ib["config"]):
            print(f"error: manifests are not geometry-paired at index {ia['index']}", file=sys.stderr)
            return EXIT_UNPAIRED
        a = _pair_metrics(base_a / ia["wav"])
        b = _pair_metrics(base_b / ib["wav"])
        pair = {"index": ia["index"]}
        for key in ("t60_s", "drr_db", "late_share"):
            pair[f"{key}_a"] = a[key]
            pair[f"{key}_b"] = b[key]
            if a[key] is None or b[key] is None or any(
                isinstance(v, float) and math.isinf(v) for v in (a[key], b[key])
            ):
                pair[f"delta_{key}"] = None
            else:
                pair[f"delta_{key}"] = a[key] - b[key]
        pairs.append(pair)

    def mean_of(key: str):
        vals = [p[key] for p in pairs if p[key] is not None]
        return float(np.mean(vals)) if vals else None

    n_gt = sum(1 for p in pairs if p["late_share_a"] > p["late_share_b"])
    summary = {
        "count": len(pairs),
        "mean_delta_t60_s": mean_of("delta_t60_s"),
        "mean_delta_drr_db": mean_of("delta_drr_db"),
        "mean_delta_late_share": mean_of("delta_late_share"),
        "late_share_a_gt_b_fraction": n_gt / len(pairs) if pairs else 0.0,
    }
    payload = {"pairs": pairs, "summary": summary}
    text = json.dumps(_jsonify(payload), indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
        print(f"wrote {args.out}")
    else:
        print(text)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rirkit", description=__doc__)
    parser.add_argument("--version", action="version", version=f"rirkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate one multichannel RIR")
    p.add_argument("--config", help="TOML or JSON config file (flags override)")
    p.add_argument("--room", help="room dims LxWxH in meters, e.g. 4x5x3")
    p.add_argument("--t60", type=float, help="target reverberation time [s]")
    p.add_argument("--source", help="source position x,y,z [m]")
    p.add_argument("--array", help="mic-array center x,y,z [m]")
    p.add_argument("--scattering", type=float, help="scattering coefficient (default 0.5)")
    p.add_argument("--engine", choices=["image", "gas"], help="engine (default gas)")
    p.add_argument("--fs", type=int, help="sample rate [Hz] (default 16000)")
    p.add_argument("--rays", type=int, help="ray count for the gas engine (default 100000)")
    p.add_argument("--max-order", dest="max_order", type=int, help="image reflection order (default auto)")
    p.add_argument("--ir-length", dest="ir_length", type=float, help="IR length [s] (default auto)")
    p.add_argument("--receiver-radius", dest="receiver_radius", type=float, help="receiver sphere radius [m]")
    p.add_argument("--seed", type=int, help="random seed (default 0)")
    p.add_argument("--workers", type=int, help="tracing threads (default 1; output is identical)")
    p.add_argument("--out", help="output WAV path (default rir.wav)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sample-rooms", help="generate a randomized IR dataset")
    p.add_argument("--n", type=int, required=True, help="number of room configurations")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--engine", choices=["image", "gas"], required=True)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--rays", type=int, default=100_000)
    p.add_argument("--fs", type=int, default=16000)
    p.add_argument("--max-order", dest="max_order", type=int, default=None)
    p.add_argument("--ir-length", dest="ir_length", type=float, default=None)
    p.add_argument("--receiver-radius", dest="receiver_radius", type=float, default=0.0875)
    p.add_argument("--scattering", type=float, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sample_rooms)

    p = sub.add_parser("augment", help="convolve speech with RIRs and mix noise")
    p.add_argument("--speech-list", dest="speech_list", required=True, help="newline-delimited WAV paths")
    p.add_argument("--rir-manifest", dest="rir_manifest", required=True)
    p.add_argument("--noise-list", dest="noise_list", required=True)
    p.add_argument("--snr", default="0:24", help="SNR range low:high in dB (default 0:24)")
    p.add_argument("--channels", choices=["first", "all"], default="first")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("analyze", help="T60/DRR/energy-share report for IRs")
    p.add_argument("--ir", help="single IR WAV (with JSON sidecar)")
    p.add_argument("--manifest", help="dataset manifest JSON")
    fmt = p.add_mutually_exclusive_group()
    fmt.add_argument("--json", action="store_true", help="JSON output")
    fmt.add_argument("--csv", action="store_true", help="CSV output (default)")
    p.add_argument("--edc", action="store_true", help="include per-channel EDC values in JSON output")
    p.add_argument("--plot", help="directory for EDC SVG figures")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("compare", help="paired engine comparison of two manifests")
    p.add_argument("--manifest-a", dest="manifest_a", required=True)
    p.add_argument("--manifest-b", dest="manifest_b", required=True)
    p.add_argument("--json", action="store_true", help="JSON output (always JSON currently)")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except RirkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
