"""Command-line interface.

Exit codes: 0 success, 2 invalid arguments, 3 enumeration cap exceeded,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from .core import Dataset, EnsembleConfig, make_design
from .ensemble import generalized_incomplete_u
from .exceptions import CapExceeded, GustatError, InvalidArgs, NumericalFailure
from .generators import Discrete, parse_generator
from .inference import BEInputs, bound_breakdown, build_ci
from .learners import KernelSpec, make_kernel
from .simlab import ExperimentConfig, emit_report, report_csv, run_experiment
from .variance import (estimate_components, h_decomposition_exact,
                       u_variance_from_components)


def _json_arg(text: str) -> dict:
    """Accept inline JSON or a path to a JSON file."""
    p = Path(text)
    if not text.lstrip().startswith("{") and p.exists():
        text = p.read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidArgs(f"bad JSON argument: {exc}") from None


def _finite(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def _emit_json(obj: dict, out: str | None) -> None:
    text = json.dumps(_finite(obj), indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_predict(args) -> None:
    data = Dataset.from_csv(args.data)
    kernel = make_kernel(KernelSpec.from_dict(_json_arg(args.kernel)))
    config = EnsembleConfig(args.s, args.N, args.scheme, args.seed)
    config.validate_for(data.n)
    design = make_design(data.n, config)
    if args.dump_design:
        design.to_jsonl(args.dump_design)
    res = generalized_incomplete_u(data, kernel, config, threads=args.threads,
                                   design=design)
    out = {"theta_hat": res.theta_hat, "realized_N": res.realized_N,
           "target_N": res.target_N, "scheme": res.scheme,
           "timing": {"seconds": res.timing}}
    if res.meta:
        out["meta"] = res.meta
    _emit_json(out, args.out)


def cmd_zeta(args) -> None:
    kernel = make_kernel(KernelSpec.from_dict(_json_arg(args.kernel)))
    gen = parse_generator(_json_arg(args.generator))
    comp = estimate_components(kernel, gen, args.s, args.m_outer, args.m_inner,
                               args.m_s, args.seed, args.threads, args.method,
                               args.n_first)
    _emit_json(comp.to_dict(), args.out)


def _run_config(args, experiment: str) -> None:
    d = _json_arg(args.config) if args.config else {}
    d.setdefault("experiment", experiment)
    if d["experiment"] != experiment:
        raise InvalidArgs(f"config is for {d['experiment']!r}, not {experiment!r}")
    if args.seed is not None:
        d["seed"] = args.seed
    cfg = ExperimentConfig.from_dict(d)
    report = run_experiment(cfg, threads=args.threads)
    out = args.out or cfg.out
    if out:
        emit_report(report, out)
    else:
        sys.stdout.write(report_csv(report))


def cmd_ck(args) -> None:
    d = _json_arg(args.config) if args.config else {}
    d.update({"experiment": "ck", "k_max": args.k_max, "s_approx": args.s_approx})
    args.config = json.dumps(d)
    _run_config(args, "ck")


def cmd_ci(args) -> None:
    ci = build_ci(args.theta, args.zeta1, args.zetas, args.n, args.s, args.N, args.level)
    _emit_json(ci.to_dict(), args.out)


def cmd_bound(args) -> None:
    inputs = BEInputs.from_dict(_json_arg(args.inputs))
    out = bound_breakdown(args.form, inputs, args.C, args.eta)
    out["inputs"] = inputs.to_dict()
    _emit_json(out, args.out)


def cmd_hdecomp(args) -> None:
    kernel = make_kernel(KernelSpec.from_dict(_json_arg(args.kernel)))
    gen = parse_generator(_json_arg(args.generator))
    if not isinstance(gen, Discrete):
        raise InvalidArgs("hdecomp needs a Discrete or TwoPoint generator")
    hd = h_decomposition_exact(kernel, gen, args.s, M_omega=args.m_omega, seed=args.seed)
    out = {"theta": hd.theta, "V": hd.V.tolist(), "zeta": hd.zeta.tolist(),
           "var_h": hd.var_h, "var_h_from_components": hd.var_h_from_components(),
           "omega_se": hd.omega_se}
    if args.n is not None:
        out["n"] = args.n
        out["var_u"] = u_variance_from_components(hd, args.n)
    _emit_json(out, args.out)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed")
    common.add_argument("--threads", type=int, default=1, help="worker threads")
    common.add_argument("--out", default=None, help="output path (default stdout)")

    parser = argparse.ArgumentParser(
        prog="gustat",
        description="Generalized U-statistic ensembles: estimates, variance "
                    "components, intervals and simulation experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("predict", parents=[common], help="evaluate an ensemble on a CSV")
    p.add_argument("--data", required=True, help="CSV with header x1..xp,y")
    p.add_argument("--kernel", required=True, help="kernel JSON {kind,k,mtry,target_x}")
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--N", type=int, default=1)
    p.add_argument("--scheme", default="bernoulli",
                   choices=["bernoulli", "fixedn", "complete"])
    p.add_argument("--dump-design", default=None, help="write the design as JSON lines")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("zeta", parents=[common], help="Monte Carlo variance components")
    p.add_argument("--kernel", required=True)
    p.add_argument("--generator", required=True, help="generator JSON")
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--m-outer", type=int, default=2000)
    p.add_argument("--m-inner", type=int, default=4)
    p.add_argument("--m-s", type=int, default=None)
    p.add_argument("--n-first", type=int, default=8)
    p.add_argument("--method", default="difference", choices=["difference", "pair"])
    p.set_defaults(func=cmd_zeta)

    p = sub.add_parser("ck", parents=[common], help="tabulate c(k)")
    p.add_argument("--k-max", type=int, default=50)
    p.add_argument("--s-approx", type=int, default=2000)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_ck)

    p = sub.add_parser("ci", parents=[common], help="normal-approximation interval")
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--zeta1", type=float, required=True)
    p.add_argument("--zetas", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--N", type=float, default=None, help="omit for a complete statistic")
    p.add_argument("--level", type=float, default=0.95)
    p.set_defaults(func=cmd_ci)

    p = sub.add_parser("bound", parents=[common], help="Berry-Esseen bound with terms")
    p.add_argument("--form", required=True,
                   choices=["complete", "incomplete", "convolution", "subgaussian"])
    p.add_argument("--inputs", required=True, help="BEInputs JSON file or string")
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--eta", type=float, default=0.4)
    p.set_defaults(func=cmd_bound)

    for name, help_ in (("clt", "standardized-estimate KS study"),
                        ("coverage", "interval coverage study"),
                        ("ratio", "variance-ratio study")):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.add_argument("--config", required=True, help="experiment config JSON")
        p.set_defaults(func=lambda a, _n=name: _run_config(a, _n))

    p = sub.add_parser("hdecomp", parents=[common], help="exact H-decomposition")
    p.add_argument("--kernel", required=True)
    p.add_argument("--generator", required=True, help="Discrete/TwoPoint generator JSON")
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--m-omega", type=int, default=200)
    p.set_defaults(func=cmd_hdecomp)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.seed is None and args.command not in ("clt", "coverage", "ratio", "ck"):
        args.seed = 0
    try:
        args.func(args)
    except InvalidArgs as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CapExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except NumericalFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except GustatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
