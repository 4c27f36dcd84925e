"""Command-line interface.

Exit codes: 0 success, 1 invalid input (parse/validation/hypothesis errors),
2 when ``diagnose`` finds a violated inequality.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..algorithms import Alg1Config, Alg2Config, run_algorithm1_detailed, run_algorithm2
from ..codec import codec_save, load_mdp
from ..diagnostics import audit_instance, reports_to_csv, reports_to_json
from ..errors import MdpError
from ..generative import GenerativeModel
from ..solvers import INFINITE, diameter, gain_bias_of_policy, policy_evaluation_discounted, \
    solve_average_optimal, solve_discounted_optimal
from .experiment import ExperimentConfig, run_experiment, summarize, theoretical_n, \
    build_instance
from .generators import generate_chain, generate_garnet

EXIT_OK, EXIT_INVALID, EXIT_AUDIT = 0, 1, 2


def _floats(v):
    return [float(x) for x in np.asarray(v).ravel()]


def _emit(args, payload: dict, rows=None):
    """Print ``payload`` as JSON, or ``rows`` as CSV when ``--csv`` was given."""
    if getattr(args, "fmt", "json") == "csv" and rows is not None:
        text = "\n".join(",".join(str(c) for c in row) for row in rows) + "\n"
    else:
        text = json.dumps(payload, indent=2, default=_jsonable) + "\n"
    if getattr(args, "out", None):
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _jsonable(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(type(x).__name__)


def _num(x):
    return "inf" if x == INFINITE else x


def cmd_validate(args):
    m = load_mdp(Path(args.file))
    print(f"ok: S={m.num_states} A={m.num_actions}")
    return EXIT_OK


def cmd_solve_discounted(args):
    m = load_mdp(Path(args.file))
    V, pi = solve_discounted_optimal(m, args.gamma, tol=args.tol)
    rows = [["state", "value", "action"]] + [[s, repr(float(V[s])), int(pi[s])]
                                             for s in range(m.num_states)]
    _emit(args, {"gamma": args.gamma, "values": _floats(V), "policy": pi.tolist()}, rows)
    return EXIT_OK


def cmd_solve_average(args):
    m = load_mdp(Path(args.file))
    gb, q, pi = solve_average_optimal(m, tol=args.tol)
    rows = [["state", "bias", "action"]] + [[s, repr(float(gb.bias[s])), int(pi[s])]
                                            for s in range(m.num_states)]
    _emit(args, {"gain": float(gb.gain[0]), "bias": _floats(gb.bias), "span": gb.span_h,
                 "policy": pi.tolist(), "diameter": _num(diameter(m))}, rows)
    return EXIT_OK


def cmd_diagnose(args):
    m = load_mdp(Path(args.file))
    rep = audit_instance(m, args.gamma, instance_id=Path(args.file).stem, seed=args.seed,
                         full=args.full)
    text = reports_to_csv([rep]) if args.fmt == "csv" else reports_to_json([rep]) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if rep.failures:
        print(f"{len(rep.failures)} check(s) violated", file=sys.stderr)
        return EXIT_AUDIT
    return EXIT_OK


def cmd_generate(args):
    if args.family == "chain":
        m = generate_chain(args.states, args.p_slip, args.seed)
    else:
        m = generate_garnet(args.states, args.actions, args.branching, args.seed)
    data = codec_save(m)
    if args.out:
        Path(args.out).write_bytes(data)
    else:
        sys.stdout.buffer.write(data)
    return EXIT_OK


def cmd_run_alg1(args):
    m = load_mdp(Path(args.file))
    cfg = Alg1Config(args.n, args.epsilon, args.gamma, seed=args.seed, trial=args.trial)
    res = run_algorithm1_detailed(GenerativeModel(m, args.seed), cfg)
    v_star, _ = solve_discounted_optimal(m, args.gamma)
    gap = float(np.max(v_star - policy_evaluation_discounted(m, res.policy, args.gamma)))
    _emit(args, {"policy": res.policy.tolist(), "xi": res.xi, "gap": gap,
                 "epsilon_met": gap <= args.epsilon})
    return EXIT_OK


def cmd_run_alg2(args):
    m = load_mdp(Path(args.file))
    gb, _, pi_star = solve_average_optimal(m)
    H = args.span_bound if args.span_bound is not None else max(1.0, gb.span_h)
    cfg = Alg2Config(args.n, args.epsilon, H, seed=args.seed, trial=args.trial)
    pi = run_algorithm2(GenerativeModel(m, args.seed), cfg)
    rho = gain_bias_of_policy(m, pi_star).gain
    gap = float(np.max(rho - gain_bias_of_policy(m, pi).gain))
    _emit(args, {"policy": pi.tolist(), "span_bound": H, "gap": gap,
                 "epsilon_met": gap <= args.epsilon})
    return EXIT_OK


def cmd_experiment(args):
    cfg = ExperimentConfig.load(args.config)
    for flag, attr in (("out", "output"), ("trials", "trials"), ("seed", "master_seed"),
                       ("epsilon", "epsilon"), ("delta", "delta"), ("gamma", "gamma"),
                       ("span_bound", "span_bound"), ("workers", "workers")):
        value = getattr(args, flag, None)
        if value is not None:
            setattr(cfg, attr, value)
    if args.n:
        cfg.n_grid = sorted(set(args.n))
    cfg.__post_init__()
    m = build_instance(cfg.instance)
    gb, _, _ = solve_average_optimal(m)
    n_theory = theoretical_n(m, cfg, gb.span_h)
    print(f"n grid {cfg.n_grid}; theoretical n (C=1): {n_theory}", file=sys.stderr)
    results, text = run_experiment(cfg, m)
    if not cfg.output:
        sys.stdout.write(text)
    for n, count, rate, med in summarize(results, cfg.n_grid):
        print(f"n={n:>7d} trials={count} success={rate:.3f} median_gap={med:.6g}",
              file=sys.stderr)
    return EXIT_OK


def _common_flags(seed_default):
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=seed_default)
    common.add_argument("--out", help="write output here instead of stdout")
    fmt = common.add_mutually_exclusive_group()
    fmt.add_argument("--csv", dest="fmt", action="store_const", const="csv")
    fmt.add_argument("--json", dest="fmt", action="store_const", const="json")
    common.set_defaults(fmt="json")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags(0)

    p = argparse.ArgumentParser(prog="spanmdp", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", parents=[common], help="check an MDP document")
    s.add_argument("file")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("solve-discounted", parents=[common])
    s.add_argument("file")
    s.add_argument("--gamma", type=float, required=True)
    s.add_argument("--tol", type=float, default=1e-10)
    s.set_defaults(func=cmd_solve_discounted)

    s = sub.add_parser("solve-average", parents=[common])
    s.add_argument("file")
    s.add_argument("--tol", type=float, default=1e-11)
    s.set_defaults(func=cmd_solve_average)

    s = sub.add_parser("diagnose", parents=[common], help="audit every inequality on an instance")
    s.add_argument("file")
    s.add_argument("--gamma", type=float, required=True)
    s.add_argument("--full", action="store_true", help="include mixing-time enumerations")
    s.set_defaults(func=cmd_diagnose)

    s = sub.add_parser("generate", parents=[common])
    s.add_argument("family", choices=["chain", "garnet"])
    s.add_argument("--states", type=int, default=5)
    s.add_argument("--actions", type=int, default=2)
    s.add_argument("--branching", type=int, default=2)
    s.add_argument("--p-slip", type=float, default=0.1)
    s.set_defaults(func=cmd_generate)

    for name, func in (("run-alg1", cmd_run_alg1), ("run-alg2", cmd_run_alg2)):
        s = sub.add_parser(name, parents=[common])
        s.add_argument("file")
        s.add_argument("--n", type=int, required=True)
        s.add_argument("--epsilon", type=float, required=True)
        s.add_argument("--trial", type=int, default=0)
        if name == "run-alg1":
            s.add_argument("--gamma", type=float, required=True)
        else:
            s.add_argument("--span-bound", type=float)
        s.set_defaults(func=func)

    # no seed default here: an absent --seed keeps the config's master_seed
    s = sub.add_parser("experiment", parents=[_common_flags(None)])
    s.add_argument("--config", required=True)
    s.add_argument("--trials", type=int)
    s.add_argument("--n", type=int, action="append", help="override the n grid (repeatable)")
    s.add_argument("--epsilon", type=float)
    s.add_argument("--delta", type=float)
    s.add_argument("--gamma", type=float)
    s.add_argument("--span-bound", type=float)
    s.add_argument("--workers", type=int)
    s.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (MdpError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
