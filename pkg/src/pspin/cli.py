"""Command-line interface.

Subcommands: sample, minima, gap, certify, fe, sweep, slope.
Global flags: --seed, --out, --threads, --config.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import (__version__, certificates, dynamics, freenergy, harness,
               landscape, model, sets, spectral)
from .errors import PspinError
from .rng import derive_seed


def _add_model_args(sp):
    sp.add_argument("--tensor", help="read the disorder from a tensor file")
    sp.add_argument("--p", type=int, default=3)
    sp.add_argument("--n", type=int, default=16)
    sp.add_argument("--beta", type=float, default=1.0)


def _load_tensor(args):
    if args.tensor:
        return model.read_tensor(args.tensor, beta=args.beta)
    spec = model.ModelSpec(args.p, args.n, args.beta)
    return model.sample_disorder(spec, args.seed)


def _dump(payload, out):
    text = json.dumps(payload, sort_keys=True, indent=1, cls=harness._JsonEncoder)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _cmd_sample(args):
    spec = model.ModelSpec(args.p, args.n, args.beta)
    J = model.sample_disorder(spec, args.seed)
    out = args.out or f"tensor_p{args.p}_n{args.n}_s{args.seed}.bin"
    model.write_tensor(out, J)
    print(f"wrote {out} ({args.n ** args.p} entries)")
    return 0


def _cmd_minima(args):
    J = _load_tensor(args)
    cat = landscape.catalog_minima(J, restarts=args.restarts,
                                   dedupe_overlap=args.dedupe_overlap,
                                   seed=derive_seed(args.seed, 1))
    payload = {
        "p": J.p, "n": J.n, "restarts": cat.restarts_used,
        "failed_restarts": cat.failed_restarts,
        "minima": [{"energy": m.energy, "gradient_norm": m.gradient_norm,
                    "min_eigenvalue": m.hessian_min_eigenvalue,
                    "coords": [float(c) for c in m.location]}
                   for m in cat.minima]}
    _dump(payload, args.out)
    return 0


def _cmd_gap(args):
    J = _load_tensor(args)
    config = harness.ExperimentConfig(
        kind=harness.GAP_SWEEP, master_seed=args.seed,
        p_grid=(J.p,), n_grid=(J.n,), beta_grid=(args.beta,), seeds=(args.seed,),
        fe_budget=args.budget, restarts=args.restarts, threads=args.threads or 1)
    cell = harness._gap_cell(config, J.p, J.n, args.beta, args.seed)
    _dump(cell, args.out)
    return 0


def _cmd_certify(args):
    J = _load_tensor(args)
    spec = model.ModelSpec(J.p, J.n, args.beta)
    ext = certificates.hessian_extremes(J, restarts=args.restarts,
                                        seed=derive_seed(args.seed, 12))
    payload = {"r_max": ext.r_max, "r_min": ext.r_min, "r_range": ext.r_range,
               "converged": ext.converged, "certificates": []}
    cert = certificates.bakry_emery_certificate(spec, ext)
    if cert is not None:
        payload["certificates"].append(cert.to_record(seed=args.seed, spec=spec))
    pc = certificates.poincare_stability_certificate(
        J, args.beta, budget=max(8, args.restarts // 2), seed=derive_seed(args.seed, 13))
    payload["certificates"].append(pc.to_record(seed=args.seed, spec=spec))
    _dump(payload, args.out)
    return 0


def _parse_region(args, J):
    if args.region_kind == "full":
        return None
    if args.center_file:
        center = np.asarray(json.loads(Path(args.center_file).read_text()), dtype=float)
    else:
        cat = landscape.catalog_minima(J, restarts=args.restarts,
                                       seed=derive_seed(args.seed, 1))
        center = cat[args.minimum_index - 1].location
    if args.region_kind == "cap":
        return sets.RegionSpec.cap(center, args.q_low)
    return sets.RegionSpec.band_edges(center, args.q_low, args.q_high)


def _cmd_fe(args):
    J = _load_tensor(args)
    region = _parse_region(args, J)
    est = freenergy.restricted_free_energy(
        J, args.beta, region, budget=args.budget, method=args.method,
        seed=derive_seed(args.seed, 20))
    payload = {"value": est.value, "std_error": est.std_error, "method": est.method,
               "beta": est.beta, "ess": est.ess, "reliable": est.reliable,
               "region": None if region is None else sets.region_to_dict(region)}
    _dump(payload, args.out)
    return 0


def _cmd_sweep(args):
    config = harness.parse_config(args.config)
    if args.out:
        config.out_dir = args.out
    if args.threads is not None:
        config.threads = args.threads
    record = harness.run_experiment(config)
    path = harness.write_outputs(record, config.out_dir)
    errs = sum(1 for c in record["cells"] if c.get("errors"))
    print(f"{record['kind']}: {len(record['cells'])} cells ({errs} with errors) -> {path}")
    return 0


def _cmd_slope(args):
    config = harness.parse_config(args.config)
    if config.kind != harness.PHASE_SLOPE:
        config.kind = harness.PHASE_SLOPE
    if args.out:
        config.out_dir = args.out
    if args.threads is not None:
        config.threads = args.threads
    record = harness.run_phase_slope(config)
    harness.write_outputs(record, config.out_dir)
    rep = record["report"]
    print(f"slopes negative: {rep['negative_slopes']}/{rep['total']}  "
          f"sign-test p = {rep['sign_test_p']:.4f}")
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="pspin",
                                 description="spherical p-spin dynamics toolkit")
    ap.add_argument("--version", action="version", version=f"pspin {__version__}")
    ap.add_argument("--seed", type=int, default=0, help="master seed")
    ap.add_argument("--out", help="output file or directory")
    ap.add_argument("--threads", type=int, default=None)
    ap.add_argument("--config", help="experiment config file")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("sample", help="write a disorder tensor file")
    _add_model_args(sp)
    sp.set_defaults(fn=_cmd_sample)

    sp = sub.add_parser("minima", help="catalog local minima")
    _add_model_args(sp)
    sp.add_argument("--restarts", type=int, default=30)
    sp.add_argument("--dedupe-overlap", type=float, default=0.98)
    sp.set_defaults(fn=_cmd_minima)

    sp = sub.add_parser("gap", help="gap estimates for one instance")
    _add_model_args(sp)
    sp.add_argument("--restarts", type=int, default=30)
    sp.add_argument("--budget", type=int, default=24000)
    sp.set_defaults(fn=_cmd_gap)

    sp = sub.add_parser("certify", help="curvature and stability certificates")
    _add_model_args(sp)
    sp.add_argument("--restarts", type=int, default=16)
    sp.set_defaults(fn=_cmd_certify)

    sp = sub.add_parser("fe", help="restricted free energy of a region")
    _add_model_args(sp)
    sp.add_argument("--region-kind", choices=("full", "cap", "band"), default="full")
    sp.add_argument("--q-low", type=float, default=0.0)
    sp.add_argument("--q-high", type=float, default=1.0)
    sp.add_argument("--center-file", help="JSON list of center coordinates")
    sp.add_argument("--minimum-index", type=int, default=1,
                    help="use the k-th lowest minimum as the center")
    sp.add_argument("--restarts", type=int, default=30)
    sp.add_argument("--budget", type=int, default=20000)
    sp.add_argument("--method", choices=("auto", "uniform", "annealed"), default="auto")
    sp.set_defaults(fn=_cmd_fe)

    sp = sub.add_parser("sweep", help="run an experiment from a config file")
    sp.set_defaults(fn=_cmd_sweep)

    sp = sub.add_parser("slope", help="phase-slope experiment from a config file")
    sp.set_defaults(fn=_cmd_slope)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.command in ("sweep", "slope") and not args.config:
        ap.error(f"{args.command} requires --config")
    try:
        return args.fn(args)
    except PspinError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
