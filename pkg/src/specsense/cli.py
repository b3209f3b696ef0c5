"""Command-line entry point: calibrate, roc, detect, validate.

Exit codes: 0 success, 2 configuration error, 3 data/format error,
4 degenerate statistic (no decision possible).

The scenario config file is flat ``key = value`` text ('#' comments); unknown
keys are rejected so typos in sweep scripts fail loudly. Every roc run writes
one CSV per detector plus a manifest that pins everything needed to reproduce
the CSVs byte for byte (``--from-manifest`` replays it).
"""

import argparse
import hashlib
import json
import os
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .backend import active_backend
from .calibration import calibrate, load_profile, save_profile
from .detectors import REGISTRY, DetectorKind
from .exceptions import (
    CalibrationError,
    ConfigError,
    DegenerateInput,
    FormatError,
    InvalidArgument,
    SpecsenseError,
)
from .roc import (
    _TrialContext,
    empirical_roc,
    evaluate_detector,
    resolve_detectors,
    run_trials,
)
from .validation import validate_iq
from .waveforms import (
    IqBuffer,
    NoisePsdShape,
    ScenarioConfig,
    default_lowpass_shape,
    gen_colored_noise,
    gen_white_noise,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NO_DECISION = 4


def _fmt(x):
    return format(float(x), ".17g")


# ---------------------------------------------------------------------------
# IQ file ingestion
# ---------------------------------------------------------------------------

def read_iq_u8(path):
    """Read interleaved unsigned-8-bit I/Q (RTL-SDR capture layout).

    Each byte pair (I, Q) maps bit-exactly to
    ((I - 127.5) + j (Q - 127.5)) / 127.5.
    """
    raw = np.fromfile(path, dtype=np.uint8)
    if raw.size == 0:
        raise FormatError(f"{path}: empty IQ file")
    if raw.size % 2 != 0:
        raise FormatError(f"{path}: odd byte count {raw.size}; expected I/Q pairs")
    i = raw[0::2].astype(np.float64)
    q = raw[1::2].astype(np.float64)
    return IqBuffer(((i - 127.5) + 1j * (q - 127.5)) / 127.5)


def write_iq_u8(buf, path):
    """Inverse of read_iq_u8 for samples in [-1, 1] (testing aid)."""
    samples = buf.samples if hasattr(buf, "samples") else np.asarray(buf)
    i = np.round(samples.real * 127.5 + 127.5)
    q = np.round(samples.imag * 127.5 + 127.5)
    both = np.empty(2 * samples.size, dtype=np.uint8)
    both[0::2] = np.clip(i, 0, 255).astype(np.uint8)
    both[1::2] = np.clip(q, 0, 255).astype(np.uint8)
    both.tofile(path)


# ---------------------------------------------------------------------------
# scenario config files
# ---------------------------------------------------------------------------

_CONFIG_KEYS = {
    "n_samples": int,
    "osf": int,
    "snr_db": float,
    "f_low": float,
    "f_high": float,
    "noise_model": str,
    "uncertainty_db": float,
    "seed": int,
    "shape_file": str,
}
_REQUIRED_KEYS = ("n_samples", "osf", "snr_db")


def parse_config_text(text, origin="<config>"):
    """Parse flat ``key = value`` scenario text into a dict."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, val = (part.strip() for part in line.partition("="))
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{origin}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{origin}:{lineno}: duplicate key {key!r}")
        try:
            values[key] = _CONFIG_KEYS[key](val)
        except ValueError as exc:
            raise ConfigError(f"{origin}:{lineno}: bad value for {key}: {val!r}") from exc
    for key in _REQUIRED_KEYS:
        if key not in values:
            raise ConfigError(f"{origin}: missing required key {key!r}")
    return values


def config_from_dict(values, base_dir="."):
    band = None
    if ("f_low" in values) != ("f_high" in values):
        raise ConfigError("f_low and f_high must be given together")
    if "f_low" in values:
        band = (values["f_low"], values["f_high"])
    shape = None
    if values.get("shape_file"):
        shape_path = os.path.join(base_dir, values["shape_file"])
        try:
            shape = NoisePsdShape.from_profile(np.loadtxt(shape_path, ndmin=1))
        except OSError as exc:
            raise ConfigError(f"cannot read shape_file: {exc}") from exc
    try:
        return ScenarioConfig(
            n_samples=values["n_samples"],
            osf=values["osf"],
            snr_db=values["snr_db"],
            band=band,
            noise_model=values.get("noise_model", "white"),
            psd_shape=shape,
            uncertainty_db=values.get("uncertainty_db", 0.0),
            seed=values.get("seed", 0),
        )
    except InvalidArgument as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    values = parse_config_text(text, origin=path)
    return config_from_dict(values, base_dir=os.path.dirname(path) or "."), values


# ---------------------------------------------------------------------------
# detector specs
# ---------------------------------------------------------------------------

_DETECTOR_PARAMS = {
    "n_fft": int,
    "n_avg": int,
    "p": int,
    "window_bins": int,
    "snr_ref_db": float,
    "sigma_s_sq": float,
}


def parse_detector_spec(spec, config=None):
    """One detector spec: ``tag`` or ``tag:key=val:key=val``.

    Unspecified parameters fall back to scenario-derived defaults:
    n_avg = n_samples // n_fft, n_fft = 128, p = osf, snr_ref_db = snr_db.
    """
    parts = spec.strip().split(":")
    tag = parts[0].strip()
    if tag not in REGISTRY:
        raise ConfigError(f"unknown detector {tag!r}")
    params = {}
    for item in parts[1:]:
        if not item:
            continue
        if "=" not in item:
            raise ConfigError(f"detector {tag}: expected key=value, got {item!r}")
        key, _, val = item.partition("=")
        key = key.strip()
        if key not in _DETECTOR_PARAMS:
            raise ConfigError(f"detector {tag}: unknown parameter {key!r}")
        try:
            params[key] = _DETECTOR_PARAMS[key](val)
        except ValueError as exc:
            raise ConfigError(f"detector {tag}: bad value for {key}: {val!r}") from exc

    info = REGISTRY[tag]
    if config is not None:
        if info.domain in ("psd", "whitened_psd", "psd_match"):
            params.setdefault("n_fft", 128)
            params.setdefault("n_avg", config.n_samples // params["n_fft"])
        if info.domain in ("scm", "corr", "whitened_scm", "whitened_corr"):
            params.setdefault("p", config.osf)
        if info.domain == "samples":
            params.setdefault("snr_ref_db", config.snr_db)
    try:
        return DetectorKind(tag=tag, **params)
    except InvalidArgument as exc:
        raise ConfigError(str(exc)) from exc


def parse_detector_list(arg, config=None):
    kinds = []
    for spec in arg.split(","):
        if spec.strip():
            kind = parse_detector_spec(spec, config)
            if kind not in kinds:
                kinds.append(kind)
    if not kinds:
        raise ConfigError("empty detector list")
    return kinds


# ---------------------------------------------------------------------------
# synthetic noise sources (shared by calibrate/validate)
# ---------------------------------------------------------------------------

def _synthetic_noise(kind, n, seed, shape_file=None):
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    if kind == "white":
        return gen_white_noise(n, 1.0, rng)
    shape = default_lowpass_shape()
    if shape_file:
        shape = NoisePsdShape.from_profile(np.loadtxt(shape_file, ndmin=1))
    return gen_colored_noise(n, shape, 1.0, rng)


def _input_buffer(args):
    if getattr(args, "synthetic", None):
        return _synthetic_noise(
            args.synthetic, args.n_samples, args.seed,
            getattr(args, "shape_file", None),
        )
    if not getattr(args, "input", None):
        raise ConfigError("either --input or --synthetic is required")
    return read_iq_u8(args.input)


# ---------------------------------------------------------------------------
# manifest
# ---------------------------------------------------------------------------

def _kind_params(kind):
    return {
        key: getattr(kind, key)
        for key in _DETECTOR_PARAMS
        if getattr(kind, key) is not None
    }


def _sha256(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            digest.update(block)
    return digest.hexdigest()


def build_manifest(config_values, kinds, n_trials, master_seed, shared,
                   profile_paths):
    detectors = []
    for kind in kinds:
        info = kind.info
        detectors.append({
            "tag": kind.tag,
            "params": _kind_params(kind),
            "orientation_flip": info.flip,
            "scale_invariant": info.scale_invariant,
            "csv": kind.label() + ".csv",
        })
    return {
        "format": "specsense-manifest",
        "version": 1,
        "tool": {"name": "specsense", "version": __version__},
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "backend": active_backend(),
        "master_seed": int(master_seed),
        "n_trials": int(n_trials),
        "shared_streams": bool(shared),
        "config": config_values,
        "profiles": [
            {"path": path, "sha256": _sha256(path)} for path in profile_paths
        ],
    }


def write_roc_csv(path, curve):
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("threshold,pfa,pd,excluded_h0,excluded_h1\n")
        for xi, pfa, pd in zip(curve.thresholds, curve.pfa, curve.pd):
            fh.write(
                f"{_fmt(xi)},{_fmt(pfa)},{_fmt(pd)},"
                f"{curve.excluded_h0},{curve.excluded_h1}\n"
            )


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_calibrate(args):
    noise = _input_buffer(args)
    profile = calibrate(noise, args.n_fft, args.n_avg, args.p)
    save_profile(profile, args.out)
    psd = profile.noise_psd.bins
    dyn_range_db = 10.0 * np.log10(psd.max() / psd.min())
    cond = float(np.linalg.cond(profile.s0))
    print(f"profile written to {args.out}")
    print(f"n_samples_used = {profile.n_samples_used}")
    print(f"psd_dynamic_range_db = {dyn_range_db:.3f}")
    print(f"covariance_condition_number = {cond:.6g}")
    return EXIT_OK


def _run_roc(config, config_values, kinds, n_trials, master_seed, shared,
             profile_paths, out_dir):
    profiles = [load_profile(path) for path in profile_paths]
    if n_trials < 1:
        raise ConfigError("trials must be >= 1")
    batches = run_trials(
        config, kinds, n_trials, master_seed=master_seed,
        profiles=profiles, shared=shared,
    )
    os.makedirs(out_dir, exist_ok=True)
    manifest = build_manifest(
        config_values, kinds, n_trials, master_seed, shared, profile_paths
    )
    outputs = []
    for kind, batch in batches.items():
        curve = empirical_roc(batch)
        csv_path = os.path.join(out_dir, kind.label() + ".csv")
        write_roc_csv(csv_path, curve)
        outputs.append({"csv": os.path.basename(csv_path),
                        "sha256": _sha256(csv_path)})
        print(f"{kind.label()}: {len(curve.thresholds)} thresholds, "
              f"excluded h0/h1 = {curve.excluded_h0}/{curve.excluded_h1}")
    manifest["outputs"] = outputs
    manifest_path = os.path.join(out_dir, "manifest.json")
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"manifest written to {manifest_path}")
    return EXIT_OK


def cmd_roc(args):
    if args.from_manifest:
        try:
            with open(args.from_manifest, "r", encoding="utf-8") as fh:
                manifest = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read manifest: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise FormatError(f"{args.from_manifest}: invalid JSON: {exc}") from exc
        if manifest.get("format") != "specsense-manifest":
            raise FormatError(f"{args.from_manifest}: not a specsense manifest")
        config_values = manifest["config"]
        config = config_from_dict(
            config_values, base_dir=os.path.dirname(args.from_manifest) or "."
        )
        kinds = [
            DetectorKind(tag=entry["tag"], **entry["params"])
            for entry in manifest["detectors"]
        ]
        n_trials = manifest["n_trials"]
        master_seed = manifest["master_seed"]
        shared = manifest.get("shared_streams", True)
        profile_paths = [entry["path"] for entry in manifest.get("profiles", [])]
    else:
        if not args.config or not args.detectors:
            raise ConfigError("--config and --detectors are required "
                              "(or use --from-manifest)")
        config, config_values = load_config(args.config)
        kinds = parse_detector_list(args.detectors, config)
        n_trials = args.trials
        master_seed = args.seed if args.seed is not None else config.seed
        shared = not args.independent_streams
        profile_paths = args.profile or []
    return _run_roc(config, config_values, kinds, n_trials, master_seed,
                    shared, profile_paths, args.out)


def cmd_detect(args):
    buf = read_iq_u8(args.input)
    if args.config:
        config, _ = load_config(args.config)
    else:
        config = None
    kind = parse_detector_spec(args.detector, config)
    # Bind band/profile against the actual capture length.
    scen = ScenarioConfig(
        n_samples=len(buf),
        osf=config.osf if config else 1,
        snr_db=config.snr_db if config else 0.0,
        band=config.band if config else None,
        uncertainty_db=0.0,
        seed=0,
    )
    profiles = [load_profile(path) for path in args.profile or []]
    plan = resolve_detectors(scen, [kind], profiles)
    ctx = _TrialContext(buf, scen.osf)
    record = {
        "detector": kind.label(),
        "threshold": args.threshold,
        "input_sha256": _sha256(args.input),
        "profiles": [_sha256(path) for path in args.profile or []],
    }
    record_hash = hashlib.sha256(
        json.dumps(record, sort_keys=True).encode()
    ).hexdigest()
    try:
        value = evaluate_detector(plan[0], ctx)
    except SpecsenseError as exc:
        print(f"decision = no-decision ({exc})")
        print(f"manifest_hash = {record_hash}")
        return EXIT_NO_DECISION
    if np.isnan(value):
        print("decision = no-decision (degenerate statistic)")
        print(f"manifest_hash = {record_hash}")
        return EXIT_NO_DECISION
    decision = "h1" if value > args.threshold else "h0"
    print(f"statistic = {_fmt(value)}")
    print(f"threshold = {_fmt(args.threshold)}")
    print(f"decision = {decision}")
    print(f"manifest_hash = {record_hash}")
    return EXIT_OK


def cmd_validate(args):
    buf = _input_buffer(args)
    reports = validate_iq(buf, args.significance)
    worst = False
    for (part, test), report in sorted(reports.items()):
        flag = "rejected" if report.rejected else "passed"
        print(f"{test}.{part}: statistic = {report.statistic:.6g}, "
              f"n = {report.n}, alpha = {report.significance:g}, {flag}")
        worst = worst or report.rejected
    print(f"gaussianity = {'rejected' if worst else 'consistent'}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="specsense",
        description="Oversampled spectrum-sensing detectors and ROC simulator",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    cal = sub.add_parser("calibrate", help="estimate a noise profile (h0 input)")
    cal.add_argument("--input", help="raw IQ file (interleaved unsigned 8-bit)")
    cal.add_argument("--synthetic", choices=["white", "colored"],
                     help="generate calibration noise instead of reading a file")
    cal.add_argument("--n-samples", type=int, default=200_000,
                     help="synthetic sample count")
    cal.add_argument("--seed", type=int, default=0, help="synthetic noise seed")
    cal.add_argument("--shape-file", help="PSD shape values for synthetic colored noise")
    cal.add_argument("--n-fft", type=int, required=True)
    cal.add_argument("--n-avg", type=int, required=True)
    cal.add_argument("--p", type=int, required=True)
    cal.add_argument("--out", required=True, help="profile output path")
    cal.set_defaults(func=cmd_calibrate)

    roc = sub.add_parser("roc", help="Monte Carlo ROC curves for a detector bank")
    roc.add_argument("--config", help="scenario config file")
    roc.add_argument("--detectors",
                     help="comma list of specs, e.g. enp_ed:n_fft=128:n_avg=12,max:p=4")
    roc.add_argument("--trials", type=int, default=10_000)
    roc.add_argument("--seed", type=int, default=None,
                     help="master seed (default: config seed)")
    roc.add_argument("--profile", action="append",
                     help="calibration profile (repeatable)")
    roc.add_argument("--independent-streams", action="store_true",
                     help="per-detector random streams instead of paired trials")
    roc.add_argument("--from-manifest", help="replay a previous run's manifest")
    roc.add_argument("--out", required=True, help="output directory")
    roc.set_defaults(func=cmd_roc)

    det = sub.add_parser("detect", help="single-shot decision on a capture")
    det.add_argument("--input", required=True, help="raw IQ file")
    det.add_argument("--detector", required=True, help="detector spec")
    det.add_argument("--threshold", type=float, required=True)
    det.add_argument("--config", help="scenario config for band/osf defaults")
    det.add_argument("--profile", action="append",
                     help="calibration profile (repeatable)")
    det.set_defaults(func=cmd_detect)

    val = sub.add_parser("validate", help="Gaussianity tests on noise samples")
    val.add_argument("--input", help="raw IQ file")
    val.add_argument("--synthetic", choices=["white", "colored"])
    val.add_argument("--n-samples", type=int, default=1000)
    val.add_argument("--seed", type=int, default=0)
    val.add_argument("--shape-file")
    val.add_argument("--significance", type=float, default=0.05)
    val.set_defaults(func=cmd_validate)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InvalidArgument) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FormatError, CalibrationError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DegenerateInput as exc:
        print(f"no-decision: {exc}", file=sys.stderr)
        return EXIT_NO_DECISION


if __name__ == "__main__":
    sys.exit(main())
