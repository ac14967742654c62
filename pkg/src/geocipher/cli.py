"""Command-line front end.

Settings come from flags, then a JSON ``--config`` file, then defaults.
Exit codes: 0 success, 1 usage, 2 unreadable input, 3 decryption produced a
diagnosis instead of a plaintext, 4 a proved bound was violated.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from dataclasses import asdict
from importlib import resources
from pathlib import Path

import numpy as np

from . import io as gio
from .cipher import (POOL_ORDERS, PERM_DIRECTIONS, VARIANTS, CipherParams, decrypt_solve,
                     encrypt_pipeline, keystream_for, plan_for_round)
from .geometry import (COMPOSITIONS, HANDEDNESS, BoundingSphere, anchor_cube, as_cloud,
                       min_enclosing_sphere, shuffled_box)
from .keystream import ChaoticKey, keystream_from_values
from .stability import (CensusConfig, VerifyConfig, assess, bound_report, instability_census,
                        verify_bounds)

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_DIAGNOSIS, EXIT_VIOLATION = 0, 1, 2, 3, 4

DEFAULTS = {
    "key": None,
    "degree": 3,
    "keystream": None,
    "psi": 1.0 / 9.0,
    "variant": "original",
    "rounds": 1,
    "dimension": 3,
    "permutation": "derived",
    "perm_file": None,
    "pool_order": "point-major",
    "perm_direction": "gather",
    "handedness": "ccw",
    "composition": "xyz",
    "rotation_decimals": None,
    "sphere_center": None,
    "sphere_radius": None,
    "seed": 0,
    "trials": 1000,
    "census_trials": None,
    "workers": 1,
    "origin": False,
    "input": None,
    "output": None,
    "trace": None,
    "plain": None,
    "cipher": None,
    "analysis": None,
    "diagnosis": None,
    "center_mode": "meb",
}
PATH_KEYS = ("input", "output", "trace", "perm_file", "analysis", "diagnosis", "plain", "cipher")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- settings ---------------------------------------------------------------

def load_settings(args: argparse.Namespace) -> dict:
    cfg = {}
    if getattr(args, "config", None):
        cfg = gio.read_json(args.config)
        base = Path(args.config).parent
        # relative paths in a config file are relative to the file
        for k in PATH_KEYS:
            if isinstance(cfg.get(k), str):
                cfg[k] = str(base / cfg[k])
    out = {}
    explicit = set(cfg)
    for key, default in DEFAULTS.items():
        value = getattr(args, key, None)
        if value is not None:
            explicit.add(key)
        out[key] = value if value is not None else cfg.get(key, default)
    for key in cfg:
        out.setdefault(key, cfg[key])
    out["_explicit"] = explicit
    return out


def _permutations(s: dict):
    perm = s["permutation"]
    if perm == "file":
        if not s["perm_file"]:
            raise UsageError("--permutation file needs --perm-file")
        perm = gio.read_json(s["perm_file"])
        if isinstance(perm, dict):
            perm = perm.get("permutation")
    if perm == "derived":
        return "derived"
    if not isinstance(perm, list) or not perm:
        raise gio.ParseError("permutations must be a list")
    if all(isinstance(i, int) for i in perm):
        perm = [[perm]]
    elif all(isinstance(p, list) and p and isinstance(p[0], int) for p in perm):
        perm = [perm]
    return [[[int(i) - 1 for i in p] for p in blocks] for blocks in perm]


def build_params(s: dict) -> CipherParams:
    key = None
    if s["key"] is not None:
        key = ChaoticKey(tuple(s["key"]), int(s["degree"]))
    return CipherParams(
        psi=float(s["psi"]),
        key=key,
        dimension=int(s["dimension"]),
        rounds=int(s["rounds"]),
        variant=s["variant"],
        permutation_source=_permutations(s),
        pool_order=s["pool_order"],
        perm_direction=s["perm_direction"],
        handedness=s["handedness"],
        composition=s["composition"],
        rotation_decimals=None if s["rotation_decimals"] is None else int(s["rotation_decimals"]),
    )


def build_sphere(s: dict):
    if s["sphere_center"] is None and s["sphere_radius"] is None:
        return None
    if s["sphere_center"] is None or s["sphere_radius"] is None:
        raise UsageError("--sphere-center and --sphere-radius go together")
    return BoundingSphere(s["sphere_center"], float(s["sphere_radius"]))


def build_keystream(s: dict, params: CipherParams, n: int):
    if s["keystream"] is not None:
        return keystream_from_values(s["keystream"], int(s["degree"]) if s["key"] else None)
    if params.key is None:
        raise UsageError("a key (--key) or an explicit keystream is required")
    return keystream_for(params, n)


def _cloud(s: dict, file_key: str, inline_key: str, what: str) -> np.ndarray:
    if s.get(file_key):
        return gio.read_cloud(s[file_key])
    inline = s.get(inline_key)
    if isinstance(inline, str):
        return gio.read_cloud(inline)
    if inline is not None:
        try:
            return as_cloud(inline)
        except ValueError as exc:
            raise gio.ParseError(f"bad inline {what}: {exc}") from None
    raise UsageError(f"no {what} given")


def _emit(path, text: str) -> None:
    if path:
        gio.write_text(path, text)
    else:
        sys.stdout.write(text)


# -- commands ---------------------------------------------------------------

def cmd_encrypt(s: dict) -> int:
    plain = _cloud(s, "input", "plain", "plaintext")
    params = build_params(s)
    if plain.shape[1] != params.dimension:
        raise gio.ParseError(f"input points are {plain.shape[1]}D but --dimension is "
                             f"{params.dimension}")
    if len(plain) < 2:
        raise gio.ParseError("need at least 2 points")
    ks = build_keystream(s, params, len(plain))
    cipher, _, trace = encrypt_pipeline(plain, params, build_sphere(s), ks)
    trace_doc = gio.dumps(gio.trace_to_dict(trace, params))
    out = s["output"]
    trace_path = s["trace"] or (f"{out}.trace.json" if out else None)
    _emit(out, gio.format_cloud(cipher))
    if trace_path:
        gio.write_text(trace_path, trace_doc)
    return EXIT_OK


def _decrypt_inputs(s: dict):
    if s["trace"]:
        params, plans, sphere, ks, cipher = gio.load_trace(gio.read_json(s["trace"]))
        if s["input"]:
            cipher = gio.read_cloud(s["input"])
        return params, plans, sphere, ks, cipher
    params = build_params(s)
    cipher = _cloud(s, "input", "cipher", "ciphertext")
    sphere = build_sphere(s)
    if sphere is None:
        raise UsageError("decryption needs the plaintext sphere (--sphere-center/--sphere-radius)")
    n = len(cipher)
    ks = build_keystream(s, params, n)
    plans = [plan_for_round(params, ks, n, r) for r in range(1, params.rounds + 1)]
    return params, plans, sphere, ks, cipher


def diagnosis_doc(outcome) -> dict:
    return {
        "schema": gio.DIAGNOSIS_SCHEMA,
        "classification": outcome.classification,
        "rank": outcome.rank,
        "augmented_rank": outcome.augmented_rank,
        "unknowns": outcome.matrix.shape[1],
        "residual": outcome.residual,
        "matrix": outcome.matrix,
        "rhs": outcome.rhs,
    }


def cmd_decrypt(s: dict) -> int:
    params, plans, sphere, ks, cipher = _decrypt_inputs(s)
    outcome = decrypt_solve(cipher, params, plans, sphere, ks)
    if outcome.classification == "unique":
        _emit(s["output"], gio.format_cloud(outcome.solution))
        return EXIT_OK
    path = s["diagnosis"] or (f"{s['output']}.diagnosis.json" if s["output"] else None)
    _emit(path, gio.dumps(diagnosis_doc(outcome)))
    print(f"decryption {outcome.classification}: rank {outcome.rank} of "
          f"{outcome.matrix.shape[1]}, residual {outcome.residual:.3g}", file=sys.stderr)
    return EXIT_DIAGNOSIS


def _report_section(report) -> dict:
    return {
        "cipher_sphere": gio.sphere_to_dict(report.cipher_sphere),
        "center_offset": report.center_offset,
        "dimensional": report.dimensional,
        "spatial": report.spatial,
        "geometric": report.geometric,
        "witness_geometric": report.witness_geometric,
        "max_deviation": report.max_deviation,
    }


def analysis_doc(sphere: BoundingSphere, cipher, psi: float, variant: str,
                 center_mode: str = "meb") -> dict:
    strict = assess(sphere, cipher, center_mode)
    other = assess(sphere, cipher, "centroid" if center_mode == "meb" else "meb")
    bounds = bound_report(sphere, cipher, psi, variant)
    return {
        "schema": gio.REPORT_SCHEMA,
        "plain_sphere": gio.sphere_to_dict(sphere),
        "center_mode": center_mode,
        **_report_section(strict),
        "alternate_center": {"center_mode": "centroid" if center_mode == "meb" else "meb",
                             **_report_section(other)},
        "bounds": {
            "psi": psi,
            "variant": variant,
            "lemma1_bound": bounds.lemma1_bound,
            "corollary1_bound": bounds.corollary1_bound,
            "lemma3_bound": bounds.lemma3_bound,
            "observed_max": bounds.observed_max,
            "tightness": bounds.tightness,
        },
        "cipher": np.asarray(cipher),
    }


def cmd_analyze(s: dict) -> int:
    psi, variant = float(s["psi"]), s["variant"]
    sphere, cipher = None, None
    if s["trace"]:
        params, _, sphere, _, cipher = gio.load_trace(gio.read_json(s["trace"]))
        psi, variant = params.psi, params.variant
    override = build_sphere(s)
    if override is not None:
        sphere = override
    if sphere is None and s.get("plain") is not None:
        sphere = min_enclosing_sphere(_cloud(s, "plain", "plain", "plaintext"))
    if sphere is None:
        raise UsageError("analysis needs a plaintext sphere, a plaintext or a trace")
    if s["input"] or s.get("cipher") is not None:
        cipher = _cloud(s, "input", "cipher", "ciphertext")
    if cipher is None:
        raise UsageError("no ciphertext given")
    _emit(s["output"], gio.dumps(analysis_doc(sphere, cipher, psi, variant, s["center_mode"])))
    return EXIT_OK


def cmd_verify(s: dict) -> int:
    psi = s["psi"] if "psi" in s.get("_explicit", ()) else None
    config = VerifyConfig(
        trials=int(s["trials"]), seed=int(s["seed"]), variant=s["variant"],
        psi=None if psi is None else float(psi), origin=bool(s["origin"]),
        workers=int(s["workers"]),
    )
    summary = verify_bounds(config)
    census_trials = s["census_trials"]
    if census_trials is None:
        census_trials = max(1, config.trials // 10)
    census_cfg = CensusConfig(trials=int(census_trials), seed=config.seed,
                              psi=1.0 / 9.0 if psi is None else float(psi))
    if s["sphere_center"] is not None:
        census_cfg = CensusConfig(trials=census_cfg.trials, seed=config.seed, psi=census_cfg.psi,
                                  center=tuple(s["sphere_center"]),
                                  radius=float(s["sphere_radius"] or 1.0))
    census = instability_census(census_cfg) if int(census_trials) > 0 else {}
    doc = {
        "schema": gio.VERIFY_SCHEMA,
        "config": asdict(config),
        "bounds": summary.to_dict(),
        "census": census,
    }
    _emit(s["output"], gio.dumps(doc))
    return EXIT_VIOLATION if summary.total_violations else EXIT_OK


def plot_bundle(sphere: BoundingSphere, point_sets: dict, cipher=None) -> dict:
    """Spheres, cubes and labelled point sets for regenerating the figures."""
    dim = sphere.dimension
    spheres = [
        {"label": "plain", "center": sphere.center, "radius": sphere.radius},
        {"label": "anchors", "center": sphere.center, "radius": np.sqrt(dim) * sphere.radius},
    ]
    if cipher is not None:
        cipher = np.asarray(cipher, dtype=float)
        if cipher.size == 0:
            raise gio.ParseError("ciphertext is empty")
        cs = min_enclosing_sphere(cipher)
        spheres.append({"label": "cipher", "center": cs.center, "radius": cs.radius})
    omega = anchor_cube(sphere.center, sphere.radius)
    shuffled = shuffled_box(sphere.center, sphere.radius)
    cubes = [
        {"label": "omega", "lower": omega.lower, "upper": omega.upper},
        {"label": "omega_shuffled", "lower": shuffled.lower, "upper": shuffled.upper},
    ]
    points = [{"role": role, "points": np.asarray(p)} for role, p in point_sets.items()]
    if cipher is not None:
        points.append({"role": "cipher", "points": cipher})
    return {"schema": gio.PLOT_SCHEMA, "dimension": dim, "spheres": spheres,
            "cubes": cubes, "points": points}


def cmd_plotdata(s: dict) -> int:
    if s["trace"]:
        doc = gio.read_json(s["trace"])
        _, _, sphere, _, cipher = gio.load_trace(doc)
        sets = {"plain": doc["plain"]}
        for r in doc["rounds"]:
            tag = "" if len(doc["rounds"]) == 1 else f"_round{r['round']}"
            sets["anchor" + tag] = r["anchors"]
            sets["shuffled_plain" + tag] = r["shuffled_plain"]
            sets["shuffled_anchor" + tag] = r["shuffled_anchors"]
        bundle = plot_bundle(sphere, sets, cipher)
    elif s["analysis"]:
        doc = gio.read_json(s["analysis"])
        if doc.get("schema") != gio.REPORT_SCHEMA:
            raise gio.ParseError("not an analysis report")
        bundle = plot_bundle(gio.sphere_from_dict(doc["plain_sphere"]), {}, doc["cipher"])
    else:
        sphere = build_sphere(s)
        if sphere is None:
            raise UsageError("plot-data needs --trace, --analysis or a sphere")
        bundle = plot_bundle(sphere, {})
    _emit(s["output"], gio.dumps(bundle))
    return EXIT_OK


def scenario(name: str) -> dict:
    text = resources.files("geocipher.data").joinpath(f"{name}.json").read_text()
    return json.loads(text)


def cmd_reproduce(name: str, out_dir: Path) -> int:
    cfg = scenario(name)
    s = {**DEFAULTS, **cfg}
    out_dir.mkdir(parents=True, exist_ok=True)
    if name == "example1":
        params, plans, sphere, ks, cipher = _decrypt_inputs(s)
        arbitrary = decrypt_solve(cipher, params, plans, sphere, ks)
        gio.write_json(out_dir / "arbitrary.diagnosis.json", diagnosis_doc(arbitrary))
        genuine_cipher, _, trace = encrypt_pipeline(as_cloud(s["plain"]), params, sphere, ks)
        gio.write_json(out_dir / "genuine.trace.json", gio.trace_to_dict(trace, params))
        genuine = decrypt_solve(genuine_cipher, params, plans, sphere, ks)
        gio.write_json(out_dir / "genuine.diagnosis.json", diagnosis_doc(genuine))
        print(f"arbitrary ciphertext: {arbitrary.classification} "
              f"(rank {arbitrary.rank}, augmented rank {arbitrary.augmented_rank})")
        print(f"genuine ciphertext:   {genuine.classification} "
              f"(rank {genuine.rank} of {genuine.matrix.shape[1]})")
        ok = arbitrary.classification == "inconsistent" and genuine.classification == "underdetermined"
        return EXIT_OK if ok else EXIT_DIAGNOSIS
    params = build_params(s)
    plain = as_cloud(s["plain"])
    sphere = build_sphere(s)
    cipher, _, trace = encrypt_pipeline(plain, params, sphere)
    gio.write_json(out_dir / "trace.json", gio.trace_to_dict(trace, params))
    gio.write_cloud(out_dir / "cipher.csv", cipher)
    analysis = analysis_doc(sphere, cipher, params.psi, params.variant)
    gio.write_json(out_dir / "analysis.json", analysis)
    sets = {"plain": plain, "anchor": trace.rounds[0].anchors,
            "shuffled_plain": trace.rounds[0].shuffled_plain,
            "shuffled_anchor": trace.rounds[0].shuffled_anchors}
    gio.write_json(out_dir / "plot.json", plot_bundle(sphere, sets, cipher))
    gap = float(np.max(np.abs(cipher - np.asarray(cfg["expected_cipher"]))))
    print(f"cipher points:\n{gio.format_cloud(cipher)}", end="")
    print(f"max |difference| from published values: {gap:.3g}")
    print(f"dimensional={analysis['dimensional']} spatial={analysis['spatial']} "
          f"max_deviation={analysis['max_deviation']:.4f} (r_p={sphere.radius:g})")
    unstable = not analysis["dimensional"] and not analysis["spatial"]
    return EXIT_OK if unstable else EXIT_USAGE


# -- parser -----------------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON settings file (flags take precedence)")
    p.add_argument("--input", help="input point cloud (CSV or ASCII PLY)")
    p.add_argument("--output", help="output file (stdout when omitted)")
    p.add_argument("--key", type=float, nargs=6, metavar="K", help="seed K0, six values in [-1, 1]")
    p.add_argument("--degree", type=int, help="Chebyshev map degree D (>= 3)")
    p.add_argument("--psi", type=float, help="scaling factor")
    p.add_argument("--variant", choices=VARIANTS)
    p.add_argument("--rounds", type=int, choices=(1, 2))
    p.add_argument("--dimension", type=int, choices=(2, 3))
    p.add_argument("--permutation", choices=("derived", "file"))
    p.add_argument("--perm-file", dest="perm_file", help="JSON list of 1-based permutations")
    p.add_argument("--pool-order", dest="pool_order", choices=POOL_ORDERS)
    p.add_argument("--perm-direction", dest="perm_direction", choices=PERM_DIRECTIONS)
    p.add_argument("--handedness", choices=HANDEDNESS)
    p.add_argument("--composition", choices=COMPOSITIONS)
    p.add_argument("--rotation-decimals", dest="rotation_decimals", type=int)
    p.add_argument("--sphere-center", dest="sphere_center", type=float, nargs="+")
    p.add_argument("--sphere-radius", dest="sphere_radius", type=float)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="geocipher", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("encrypt", help="encrypt a point cloud and write a stage trace")
    _common(p)
    p.add_argument("--trace", help="trace output (default: OUTPUT.trace.json)")

    p = sub.add_parser("decrypt", help="solve for the plaintext or emit a diagnosis")
    _common(p)
    p.add_argument("--trace", help="trace from 'encrypt' holding key material and plans")
    p.add_argument("--diagnosis", help="diagnosis output (default: OUTPUT.diagnosis.json)")

    p = sub.add_parser("analyze", help="stability verdicts and deviation bounds")
    _common(p)
    p.add_argument("--trace", help="trace from 'encrypt'")
    p.add_argument("--plain", help="plaintext cloud (its minimal sphere is used)")
    p.add_argument("--center-mode", dest="center_mode", choices=("meb", "centroid"))

    p = sub.add_parser("verify", help="Monte Carlo check of the deviation bounds")
    _common(p)
    p.add_argument("--origin", action="store_true", default=None, help="center spheres at the origin")
    p.add_argument("--census-trials", dest="census_trials", type=int)
    p.add_argument("--workers", type=int)

    p = sub.add_parser("plot-data", help="emit spheres, cubes and point sets as JSON")
    _common(p)
    p.add_argument("--trace")
    p.add_argument("--analysis", help="report from 'analyze'")

    p = sub.add_parser("reproduce", help="rerun a shipped counterexample")
    p.add_argument("scenario", choices=("example1", "example2"))
    p.add_argument("--output-dir", dest="output_dir", default=".")
    return parser


COMMANDS = {
    "encrypt": cmd_encrypt,
    "decrypt": cmd_decrypt,
    "analyze": cmd_analyze,
    "verify": cmd_verify,
    "plot-data": cmd_plotdata,
}


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            if args.command == "reproduce":
                return cmd_reproduce(args.scenario, Path(args.output_dir))
            return COMMANDS[args.command](load_settings(args))
    except gio.ParseError as exc:
        print(f"geocipher: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (UsageError, ValueError) as exc:
        print(f"geocipher: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
