"""Command-line entry point.

Subcommands: gen-corpus, optimize, eval, ablate, sweep, curve, export-png.
Runs are configured by an optional JSON config file plus flag overrides
(flags win). Unknown config keys are rejected before any oracle query is
spent. Exit codes: 0 success, 2 validation, 3 oracle/transport, 4 I/O.
GAP_ORACLE_URL overrides the remote oracle endpoint.
"""

import argparse
import copy
import json
import os
import sys
from pathlib import Path

from . import __version__
from .corpus import (PhotoParams, build_corpus, export_corpus,
                     gray_rectangle_patch, render_photo)
from .errors import InvalidArgumentError, NotFoundError, OracleError
from .evaluation import (DEFAULT_ABLATION_GRID, PairSelection,
                         attack_success_rate, curve_to_csv, geometry_sweep,
                         queries_vs_asr, run_ablation, sweep_to_csv)
from .optimizer import ImagePair, OptimizerConfig, run_greedy
from .oracle import ToyOracle, calibrate_threshold
from .patch import Placement, SamplerConfig, zero_patch
from .patch_io import load_patch, patch_to_png, save_patch
from .remote import ThrottleConfig, remote_similarity_client

DEFAULT_CONFIG = {
    "seed": 0,
    "output_dir": "runs/out",
    "corpus": {
        "seed": 1,
        "n_identities": 20,
        "photos_per_identity": 4,
        "brightness_delta": 0.05,
        "noise_scale": 0.02,
        "max_shift": 2,
    },
    "placement": {"top": 8, "left": 20, "width": 72, "height": 28},
    "optimizer": {
        "n_iters": 625,
        "batch_size": 8,
        "restart_interval": 300,
        "restarts_enabled": True,
        "symmetric": True,
        "channels": 1,
        "cache_clean_embeddings": False,
        "monotone_accept": False,
        "sampler": {"a_max": 1.0, "sigma_lo": 1.5, "sigma_hi": 12.0, "sigma_min": 1.0},
    },
    "oracle": {"kind": "toy", "url": None, "max_qps": None},
    "evaluation": {
        "target_far": 1e-3,
        "n_impostor_pairs": 2000,
        "calibration_seed": 0,
        "identity": 0,
        "photo_a": 0,
        "photo_b": 1,
        "include_optimization_pair": False,
    },
}


def _merge_checked(base: dict, override: dict, path: str = "") -> dict:
    """Merge override into base, rejecting keys absent from the schema."""
    out = copy.deepcopy(base)
    for key, value in override.items():
        here = f"{path}{key}"
        if key not in base:
            raise InvalidArgumentError(f"unknown config key: {here}")
        if isinstance(base[key], dict) and isinstance(value, dict):
            out[key] = _merge_checked(base[key], value, here + ".")
        else:
            out[key] = value
    return out


def load_run_config(args) -> dict:
    config = copy.deepcopy(DEFAULT_CONFIG)
    if args.config:
        try:
            user = json.loads(Path(args.config).read_text())
        except FileNotFoundError as exc:
            raise NotFoundError(f"config file not found: {args.config}") from exc
        except json.JSONDecodeError as exc:
            raise InvalidArgumentError(f"config is not valid JSON: {exc}") from exc
        config = _merge_checked(config, user)
    overrides = {}
    flat = {
        "seed": ("seed",),
        "out": ("output_dir",),
        "corpus_seed": ("corpus", "seed"),
        "identities": ("corpus", "n_identities"),
        "photos": ("corpus", "photos_per_identity"),
        "iters": ("optimizer", "n_iters"),
        "batch": ("optimizer", "batch_size"),
        "restart_interval": ("optimizer", "restart_interval"),
        "channels": ("optimizer", "channels"),
        "oracle": ("oracle", "kind"),
        "oracle_url": ("oracle", "url"),
        "max_qps": ("oracle", "max_qps"),
        "target_far": ("evaluation", "target_far"),
        "impostor_pairs": ("evaluation", "n_impostor_pairs"),
        "identity": ("evaluation", "identity"),
        "photo_a": ("evaluation", "photo_a"),
        "photo_b": ("evaluation", "photo_b"),
    }
    for flag, keys in flat.items():
        value = getattr(args, flag, None)
        if value is not None:
            node = overrides
            for k in keys[:-1]:
                node = node.setdefault(k, {})
            node[keys[-1]] = value
    if getattr(args, "no_restarts", False):
        overrides.setdefault("optimizer", {})["restarts_enabled"] = False
    if getattr(args, "asymmetric", False):
        overrides.setdefault("optimizer", {})["symmetric"] = False
    if getattr(args, "cache_embeddings", False):
        overrides.setdefault("optimizer", {})["cache_clean_embeddings"] = True
    if getattr(args, "monotone_accept", False):
        overrides.setdefault("optimizer", {})["monotone_accept"] = True
    if getattr(args, "include_opt_pair", False):
        overrides.setdefault("evaluation", {})["include_optimization_pair"] = True
    config = _merge_checked(config, overrides)

    env_url = os.environ.get("GAP_ORACLE_URL")
    if env_url:
        config["oracle"]["url"] = env_url
    return config


def make_corpus(config):
    c = config["corpus"]
    params = PhotoParams(brightness_delta=c["brightness_delta"],
                         noise_scale=c["noise_scale"], max_shift=c["max_shift"])
    return build_corpus(c["seed"], c["n_identities"], c["photos_per_identity"], params)


def make_placement(config) -> Placement:
    p = config["placement"]
    placement = Placement(top=p["top"], left=p["left"], width=p["width"],
                          height=p["height"])
    placement.validate()
    return placement


def make_oracle(config):
    o = config["oracle"]
    if o["kind"] == "toy":
        return ToyOracle(cache_clean_embeddings=config["optimizer"]["cache_clean_embeddings"])
    if o["kind"] == "remote":
        if not o["url"]:
            raise InvalidArgumentError("remote oracle requires a URL "
                                       "(--oracle-url or GAP_ORACLE_URL)")
        throttle = ThrottleConfig(max_qps=o["max_qps"])
        return remote_similarity_client(o["url"], throttle)
    raise InvalidArgumentError(f"unknown oracle kind: {o['kind']!r}")


def make_optimizer_config(config) -> OptimizerConfig:
    o = config["optimizer"]
    s = o["sampler"]
    cfg = OptimizerConfig(
        n_iters=o["n_iters"], batch_size=o["batch_size"],
        restart_interval=o["restart_interval"],
        restarts_enabled=o["restarts_enabled"], symmetric=o["symmetric"],
        channels=o["channels"], seed=config["seed"],
        sampler=SamplerConfig(a_max=s["a_max"], sigma_lo=s["sigma_lo"],
                              sigma_hi=s["sigma_hi"], sigma_min=s["sigma_min"]),
        cache_clean_embeddings=o["cache_clean_embeddings"],
        monotone_accept=o["monotone_accept"],
    )
    cfg.validate()
    return cfg


def _out_dir(config) -> Path:
    out = Path(config["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _opt_pair(config, corpus):
    e = config["evaluation"]
    return ImagePair(render_photo(corpus, e["identity"], e["photo_a"]),
                     render_photo(corpus, e["identity"], e["photo_b"]))


def _pair_selection(config) -> PairSelection:
    e = config["evaluation"]
    if e["include_optimization_pair"]:
        return PairSelection()
    return PairSelection.excluding_pair(e["identity"], e["photo_a"], e["photo_b"])


def _threshold(config, corpus, oracle):
    e = config["evaluation"]
    return calibrate_threshold(corpus, oracle, e["target_far"],
                               e["n_impostor_pairs"], e["calibration_seed"])


def cmd_gen_corpus(args) -> int:
    config = load_run_config(args)
    corpus = make_corpus(config)
    manifest = export_corpus(corpus, _out_dir(config))
    print(manifest)
    return 0


def cmd_optimize(args) -> int:
    config = load_run_config(args)
    corpus = make_corpus(config)
    placement = make_placement(config)
    opt_cfg = make_optimizer_config(config)
    oracle = make_oracle(config)
    pair = _opt_pair(config, corpus)
    result = run_greedy(opt_cfg, pair, placement, oracle)
    out = _out_dir(config)
    patch_json = out / "patch.json"
    save_patch(patch_json, result.best_patch, placement)
    patch_to_png(out / "patch.png", result.best_patch)
    (out / "trace.csv").write_text(result.trace.to_csv())
    report = {
        "config": config,
        "best_loss": result.best_loss,
        "aborted": result.trace.aborted,
        "abort_reason": result.trace.abort_reason,
        "queries": oracle.ledger.snapshot(),
    }
    (out / "run_report.json").write_text(json.dumps(report, indent=2))
    for name in ("patch.json", "patch.png", "trace.csv", "run_report.json"):
        print(out / name)
    print(f"best_loss={result.best_loss} "
          f"optimization_queries={oracle.ledger.phase_count('optimization')}")
    if result.trace.aborted:
        print(f"aborted: {result.trace.abort_reason}", file=sys.stderr)
        return 3
    return 0


def cmd_eval(args) -> int:
    config = load_run_config(args)
    corpus = make_corpus(config)
    placement = make_placement(config)
    oracle = make_oracle(config)
    try:
        patch, patch_placement = load_patch(args.patch)
    except FileNotFoundError as exc:
        raise NotFoundError(f"patch file not found: {args.patch}") from exc
    if (patch_placement.width, patch_placement.height) == (placement.width, placement.height):
        placement = patch_placement
    threshold = _threshold(config, corpus, oracle)
    report = attack_success_rate(corpus, patch, placement, oracle, threshold,
                                 _pair_selection(config), config_echo=config)
    out = _out_dir(config)
    path = out / "eval_report.json"
    path.write_text(report.to_json())
    print(path)
    print(f"asr={report.asr} threshold={threshold.threshold}")
    return 0


def cmd_ablate(args) -> int:
    config = load_run_config(args)
    corpus = make_corpus(config)
    placement = make_placement(config)
    opt_cfg = make_optimizer_config(config)
    cal_oracle = make_oracle(config)
    threshold = _threshold(config, corpus, cal_oracle)
    seeds = list(range(args.ablate_seeds))
    e = config["evaluation"]
    table = run_ablation(DEFAULT_ABLATION_GRID, corpus, lambda: make_oracle(config),
                         opt_cfg, placement, threshold,
                         opt_identity=e["identity"],
                         opt_photos=(e["photo_a"], e["photo_b"]), seeds=seeds)
    out = _out_dir(config)
    path = out / "ablation.json"
    path.write_text(json.dumps(table, indent=2))
    print(path)
    for label, cell in table["cells"].items():
        print(f"{label}: median_asr={cell['median_asr']} "
              f"median_best_loss={cell['median_best_loss']}")
    return 0


def cmd_sweep(args) -> int:
    config = load_run_config(args)
    corpus = make_corpus(config)
    placement = make_placement(config)
    oracle = make_oracle(config)
    try:
        patch, _ = load_patch(args.patch)
    except FileNotFoundError as exc:
        raise NotFoundError(f"patch file not found: {args.patch}") from exc
    rows = geometry_sweep(patch, _opt_pair(config, corpus), placement, oracle)
    out = _out_dir(config)
    path = out / "sweep.csv"
    path.write_text(sweep_to_csv(rows))
    print(path)
    return 0


def cmd_curve(args) -> int:
    config = load_run_config(args)
    corpus = make_corpus(config)
    placement = make_placement(config)
    opt_cfg = make_optimizer_config(config)
    cal_oracle = make_oracle(config)
    threshold = _threshold(config, corpus, cal_oracle)
    checkpoints = [int(x) for x in args.checkpoints.split(",")]
    e = config["evaluation"]
    curve = queries_vs_asr(opt_cfg, corpus, lambda: make_oracle(config), placement,
                           threshold, checkpoints, n_runs=args.runs,
                           opt_identity=e["identity"],
                           opt_photos=(e["photo_a"], e["photo_b"]))
    out = _out_dir(config)
    json_path = out / "curve.json"
    csv_path = out / "curve.csv"
    json_path.write_text(json.dumps(curve, indent=2))
    csv_path.write_text(curve_to_csv(curve))
    print(json_path)
    print(csv_path)
    return 0


def cmd_export_png(args) -> int:
    try:
        patch, _ = load_patch(args.patch)
    except FileNotFoundError as exc:
        raise NotFoundError(f"patch file not found: {args.patch}") from exc
    patch_to_png(args.png, patch)
    print(args.png)
    return 0


def _add_common(parser):
    parser.add_argument("--config", help="JSON config file; flags override it")
    parser.add_argument("--seed", type=int, help="root seed for all randomness")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--corpus-seed", type=int, dest="corpus_seed",
                        help="synthetic corpus seed")
    parser.add_argument("--identities", type=int, help="number of identities")
    parser.add_argument("--photos", type=int, help="photos per identity")
    parser.add_argument("--oracle", choices=["toy", "remote"], help="oracle kind")
    parser.add_argument("--oracle-url", dest="oracle_url",
                        help="remote oracle endpoint (or set GAP_ORACLE_URL)")
    parser.add_argument("--max-qps", type=float, dest="max_qps",
                        help="client-side request rate cap")
    parser.add_argument("--jobs", type=int, default=1,
                        help="worker cap for parallel evaluation")


def _add_optimizer_flags(parser):
    parser.add_argument("--iters", type=int, help="optimizer iterations")
    parser.add_argument("--batch", type=int, help="candidate batch size")
    parser.add_argument("--restart-interval", type=int, dest="restart_interval",
                        help="iterations between restarts")
    parser.add_argument("--no-restarts", action="store_true", dest="no_restarts",
                        help="disable the restart mechanism")
    parser.add_argument("--asymmetric", action="store_true",
                        help="drop the bilateral symmetry constraint")
    parser.add_argument("--channels", type=int, choices=[1, 3],
                        help="1 grayscale (default) or 3 for the color ablation")
    parser.add_argument("--cache-embeddings", action="store_true",
                        dest="cache_embeddings",
                        help="cache clean-image embeddings (toy oracle)")
    parser.add_argument("--monotone-accept", action="store_true",
                        dest="monotone_accept",
                        help="only move the working patch on improvement")


def _add_eval_flags(parser):
    parser.add_argument("--target-far", type=float, dest="target_far",
                        help="false-accept rate for threshold calibration")
    parser.add_argument("--impostor-pairs", type=int, dest="impostor_pairs",
                        help="impostor pairs used for calibration")
    parser.add_argument("--identity", type=int, help="optimization identity id")
    parser.add_argument("--photo-a", type=int, dest="photo_a",
                        help="first optimization photo index")
    parser.add_argument("--photo-b", type=int, dest="photo_b",
                        help="second optimization photo index")
    parser.add_argument("--include-opt-pair", action="store_true",
                        dest="include_opt_pair",
                        help="include the optimization pair in ASR evaluation")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gapatch",
                                     description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-corpus", help="write corpus PNGs and manifest")
    _add_common(p)
    p.set_defaults(func=cmd_gen_corpus)

    p = sub.add_parser("optimize", help="run the greedy patch search")
    _add_common(p)
    _add_optimizer_flags(p)
    _add_eval_flags(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("eval", help="attack success rate of a stored patch")
    _add_common(p)
    _add_eval_flags(p)
    p.add_argument("--patch", required=True, help="patch JSON file")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="symmetry/color/restart factor ablation")
    _add_common(p)
    _add_optimizer_flags(p)
    _add_eval_flags(p)
    p.add_argument("--ablate-seeds", type=int, default=3, dest="ablate_seeds",
                   help="seeds per ablation cell")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("sweep", help="geometry (row-trim) sweep of a patch")
    _add_common(p)
    _add_eval_flags(p)
    p.add_argument("--patch", required=True, help="patch JSON file")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("curve", help="ASR as a function of query budget")
    _add_common(p)
    _add_optimizer_flags(p)
    _add_eval_flags(p)
    p.add_argument("--runs", type=int, default=5, help="independent runs")
    p.add_argument("--checkpoints", default="0,1000,2000,5000,10000,20000",
                   help="comma-separated query checkpoints")
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("export-png", help="export a patch JSON as 8-bit PNG")
    p.add_argument("--patch", required=True, help="patch JSON file")
    p.add_argument("--png", required=True, help="output PNG path")
    p.set_defaults(func=cmd_export_png)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InvalidArgumentError,) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OracleError as exc:
        print(f"oracle error: {exc}", file=sys.stderr)
        return 3
    except (NotFoundError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
