"""Command-line benchmark driver.

Subcommands
-----------
solve     run a list of solvers on one instance, write traces and a summary
spectrum  classify the eigenvalues of an iteration matrix against the regions
verify    run the built-in oracle checks
gen       write a generated MDP instance to JSON

Exit codes: 0 success, 1 solver or check failure, 2 configuration error.
Errors are reported as one JSON object on stderr.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .mdp import (
    MdpInstance,
    SolverDivergenceError,
    bellman_apply,
    bellman_davi_solve,
    bellman_vi_solve,
    certify_error,
    dapi_solve,
    policy_iteration_exact,
    policy_problem,
)
from .numeric import EIG_CAP, SparseRowMatrix, dense_eigenvalues, read_matrix_market, spectral_radius_of, spectral_radius_power
from .params import AccelConfig, d_accel_alphas
from .problems import HjbSpec, RandomMdpSpec, gen_random_mdp, hjb_discretize, hjb_preset, hjb_to_fixed_point
from .regions import RegionSpec, boundary_curve, in_sigma_d, in_sigma_r_d2, write_points_csv
from .solvers import AffineProblem, davi_solve, momentum_solve, vi_solve
from .verify import CHECKS, run_checks

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------- config and instances


def load_config(path) -> dict:
    """Read a JSON or TOML experiment file (by extension; JSON otherwise)."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        if str(path).endswith(".toml"):
            cfg = tomllib.loads(raw.decode())
        else:
            cfg = json.loads(raw)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a mapping")
    cfg.setdefault("_base", os.path.dirname(os.path.abspath(path)))
    return cfg


def _path(cfg: dict, p: str) -> str:
    return p if os.path.isabs(p) else os.path.join(cfg.get("_base", "."), p)


def build_instance(cfg: dict, seed: int):
    """Instance described by ``cfg['instance']``: an MdpInstance or an AffineProblem."""
    inst = cfg.get("instance")
    if not isinstance(inst, dict) or "type" not in inst:
        raise ConfigError("config needs an 'instance' table with a 'type'")
    kind = inst["type"]
    try:
        if kind == "random":
            return gen_random_mdp(RandomMdpSpec(
                n=int(inst["n"]), m=int(inst["m"]), p=float(inst["p"]), epsilon=float(inst["epsilon"]),
                seed=int(inst.get("seed", seed)), reward_low=float(inst.get("reward_low", 0.0)),
                reward_high=float(inst.get("reward_high", 1.0)),
            ))
        if kind == "hjb":
            if "preset" in inst:
                extra = {k: inst[k] for k in ("N", "m", "c") if k in inst}
                spec = hjb_preset(inst["preset"], int(inst.get("seed", seed)), **extra)
            else:
                spec = HjbSpec(dim=int(inst["dim"]), N=int(inst["N"]), sigma=np.asarray(inst["sigma"], float),
                               lam=float(inst["lam"]), m=int(inst.get("m", 1)),
                               drift=np.asarray(inst.get("drift", 0.0), float),
                               reward=np.asarray(inst.get("reward", 0.0), float), c=inst.get("c"))
            return hjb_to_fixed_point(hjb_discretize(spec))
        if kind == "file":
            return MdpInstance.load(_path(cfg, inst["path"]))
        if kind == "affine":
            if "matrix_market" in inst:
                P = read_matrix_market(_path(cfg, inst["matrix_market"]))
            elif "diag" in inst:
                P = SparseRowMatrix.diag(np.asarray(inst["diag"], float))
            else:
                P = np.asarray(inst["P"], float)
            n = P.shape[0]
            g = np.asarray(inst.get("g", np.zeros(n)), float)
            return AffineProblem(P, g)
    except KeyError as exc:
        raise ConfigError(f"instance of type {kind!r} is missing {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {kind!r} instance: {exc}") from exc
    raise ConfigError(f"unknown instance type {kind!r}")


def _iteration_matrix(instance, policy: str = "greedy") -> SparseRowMatrix:
    if isinstance(instance, AffineProblem):
        return instance.matrix()
    if policy == "greedy":
        sigma = bellman_apply(instance, np.zeros(instance.n))[1]
    elif policy == "first":
        sigma = np.zeros(instance.n, dtype=np.int64)
    else:
        raise ConfigError(f"unknown policy rule {policy!r}")
    return policy_problem(instance, sigma).matrix()


def resolve_epsilon(value, instance) -> float:
    """``float``, ``"instance"`` (generator value) or ``"spectral"`` (``1 - rho`` by power iteration)."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if value == "instance":
        eps = getattr(instance, "meta", {}).get("epsilon") if isinstance(instance, MdpInstance) else None
        if eps is None:
            raise ConfigError("instance provides no epsilon; give a number or 'spectral'")
        return float(eps)
    if value == "spectral":
        res = spectral_radius_power(_iteration_matrix(instance), tol=1e-13, max_iter=200_000)
        if not 0.0 < res.radius < 1.0:
            raise ConfigError(f"spectral radius {res.radius} is not in (0, 1)")
        return 1.0 - res.radius
    raise ConfigError(f"cannot interpret epsilon {value!r}")


# ---------------------------------------------------------------- solve


@dataclass
class RunRecord:
    name: str
    kind: str
    iterations: int
    final_residual: float
    certified_error: float | None
    measured_rate: float | None
    wall_ns: int
    converged: bool
    status: str
    residuals: list
    config: dict
    outer: int | None = None
    error: str | None = None


def _affine_certificate(prob: AffineProblem, residual: float) -> float | None:
    # sup-norm contraction bound, available when ||P||_inf < 1
    norm = float(np.max(np.abs(prob.matrix().to_scipy()).sum(axis=1))) if prob.n else 0.0
    return residual / (1.0 - norm) if norm < 1.0 else None


def _solver_config(scfg: dict, defaults: dict, instance) -> AccelConfig:
    degree = int(scfg.get("degree", 2))
    delta = float(scfg.get("delta", defaults.get("delta", 1e-10)))
    max_iter = int(scfg.get("max_iter", defaults.get("max_iter", 1_000_000)))
    beta = float(scfg.get("beta", 1.0))
    if "alpha" in scfg:
        alpha = tuple(np.atleast_1d(np.asarray(scfg["alpha"], float)))
        return AccelConfig(degree, alpha, beta, None, delta, max_iter)
    eps = resolve_epsilon(scfg.get("epsilon", defaults.get("epsilon", "instance")), instance)
    return AccelConfig(degree, tuple(d_accel_alphas(degree, eps)), beta, eps, delta, max_iter)


def _default_name(scfg: dict) -> str:
    kind = scfg.get("kind", "")
    d = scfg.get("degree", 2)
    return {"vi": "VI", "davi": f"{d}A-VI", "dapi": f"{d}A-PI", "pi": "PI", "momentum": "momentum"}.get(kind, kind)


def run_solver(instance, scfg: dict, defaults: dict) -> RunRecord:
    kind = scfg.get("kind")
    name = scfg.get("name") or _default_name(scfg)
    is_mdp = isinstance(instance, MdpInstance)
    if kind == "vi":
        cfg = AccelConfig.plain(beta=float(scfg.get("beta", 1.0)), delta=float(scfg.get("delta", defaults.get("delta", 1e-10))),
                                max_iter=int(scfg.get("max_iter", defaults.get("max_iter", 1_000_000))))
        x0 = np.zeros(instance.n)
        trace = bellman_vi_solve(instance, x0, cfg) if is_mdp else vi_solve(instance, x0, cfg)
    elif kind == "davi":
        cfg = _solver_config(scfg, defaults, instance)
        x0 = np.zeros(instance.n)
        trace = bellman_davi_solve(instance, x0, cfg) if is_mdp else davi_solve(instance, x0, cfg)
    elif kind == "momentum":
        cfg = AccelConfig.plain(delta=float(scfg.get("delta", defaults.get("delta", 1e-10))),
                                max_iter=int(scfg.get("max_iter", defaults.get("max_iter", 1_000_000))))
        trace = momentum_solve(instance, np.zeros(instance.n), float(scfg.get("alpha", 0.0)), float(scfg.get("beta", 1.0)), cfg)
        if is_mdp:
            trace.certified_error = certify_error(instance, trace.final_point)
    elif kind in ("dapi", "pi"):
        if not is_mdp:
            raise ConfigError(f"solver kind {kind!r} needs an MDP instance")
        return _run_policy_solver(instance, scfg, defaults, kind, name)
    else:
        raise ConfigError(f"unknown solver kind {kind!r}")
    cert = trace.certified_error if is_mdp else _affine_certificate(instance, trace.final_residual)
    rate = trace.measured_rate if np.isfinite(trace.measured_rate) else None
    return RunRecord(name, kind, trace.iterations, trace.final_residual, cert, rate, trace.wall_ns,
                     trace.converged, trace.status, [float(r) for r in trace.residuals], trace.config)


def _run_policy_solver(mdp: MdpInstance, scfg, defaults, kind, name) -> RunRecord:
    import time

    t0 = time.perf_counter_ns()
    if kind == "pi":
        res = policy_iteration_exact(mdp, max_iter=int(scfg.get("max_outer", 1000)))
        residual = float(np.max(np.abs(res.value - bellman_apply(mdp, res.value)[0])))
        return RunRecord(name, kind, res.n_iter, residual, certify_error(mdp, res.value), None,
                         time.perf_counter_ns() - t0, res.converged, "converged" if res.converged else "max_iter",
                         [residual], {"max_outer": int(scfg.get("max_outer", 1000))}, outer=res.n_iter)
    cfg = _solver_config(scfg, defaults, mdp)
    delta_prime = float(scfg.get("delta_prime", defaults.get("delta_prime", 0.0)))
    try:
        res = dapi_solve(mdp, cfg, delta_prime, max_outer=int(scfg.get("max_outer", 1000)))
    except SolverDivergenceError as exc:
        tr = exc.trace
        return RunRecord(name, kind, tr.iterations, tr.final_residual, None, None, time.perf_counter_ns() - t0,
                         False, tr.status, [float(r) for r in tr.residuals], cfg.to_dict(), error=str(exc))
    residuals = [float(r) for t in res.traces for r in t.residuals]
    last = res.traces[-1]
    rate = last.measured_rate if np.isfinite(last.measured_rate) else None
    config = dict(cfg.to_dict(), delta_prime=delta_prime)
    return RunRecord(name, kind, res.total_iterations, last.final_residual, res.certified_error, rate,
                     time.perf_counter_ns() - t0, res.converged, res.status if not res.converged else "converged",
                     residuals, config, outer=res.n_outer)


def _slug(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_" else "_" for ch in name)


SUMMARY_COLUMNS = ["solver", "iterations", "final_residual", "certified_error", "measured_rate", "wall_ns", "converged", "outer"]


def _summary_rows(records, timing: bool):
    rows = []
    for r in records:
        row = {"solver": r.name, "iterations": r.iterations, "final_residual": r.final_residual,
               "certified_error": r.certified_error, "measured_rate": r.measured_rate,
               "wall_ns": r.wall_ns if timing else None, "converged": r.converged, "outer": r.outer}
        rows.append(row)
    return rows


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_summary(rows, out: str, fmt: str, timing: bool) -> None:
    cols = [c for c in SUMMARY_COLUMNS if timing or c != "wall_ns"]
    if fmt == "json":
        with open(os.path.join(out, "summary.json"), "w") as fh:
            json.dump([{c: row[c] for c in cols} for row in rows], fh, indent=1)
            fh.write("\n")
    else:
        with open(os.path.join(out, "summary.csv"), "w") as fh:
            fh.write(",".join(cols) + "\n")
            for row in rows:
                fh.write(",".join(_fmt(row[c]) for c in cols) + "\n")


def _print_table(rows, timing: bool) -> None:
    head = f"{'solver':<10} {'iters':>8} {'residual':>11} {'cert.err':>11} {'rate':>9} {'outer':>5} {'ok':>3}"
    if timing:
        head += f" {'wall[s]':>9}"
    print(head)
    for r in rows:
        cert = "-" if r["certified_error"] is None else f"{r['certified_error']:.3e}"
        rate = "-" if r["measured_rate"] is None else f"{r['measured_rate']:.6f}"
        outer = "-" if r["outer"] is None else str(r["outer"])
        line = (f"{r['solver']:<10} {r['iterations']:>8d} {r['final_residual']:>11.3e} {cert:>11} {rate:>9} "
                f"{outer:>5} {'y' if r['converged'] else 'n':>3}")
        if timing:
            line += f" {r['wall_ns'] / 1e9:>9.3f}"
        print(line)


def cmd_solve(args, cfg: dict) -> int:
    solvers = cfg.get("solvers")
    if not isinstance(solvers, list) or not solvers:
        raise ConfigError("config needs a non-empty 'solvers' list")
    names = [s.get("name") or _default_name(s) for s in solvers]
    if len(set(names)) != len(names):
        raise ConfigError(f"solver names must be unique, got {names}")
    instance = build_instance(cfg, args.seed)
    defaults = {k: cfg[k] for k in ("epsilon", "delta", "delta_prime", "max_iter") if k in cfg}
    # resolve configuration problems before any (possibly long) run starts
    for s in solvers:
        if s.get("kind") in ("davi", "dapi") and "alpha" not in s:
            _solver_config(s, defaults, instance)
    if args.parallel:
        with ThreadPoolExecutor(max_workers=len(solvers)) as pool:
            records = list(pool.map(lambda s: run_solver(instance, s, defaults), solvers))
    else:
        records = [run_solver(instance, s, defaults) for s in solvers]
    os.makedirs(args.out, exist_ok=True)
    timing = not args.no_timing
    for r in records:
        path = os.path.join(args.out, f"trace_{_slug(r.name)}.{args.format}")
        if args.format == "json":
            doc = {"solver": r.name, "kind": r.kind, "config": r.config, "iterations": r.iterations,
                   "converged": r.converged, "status": r.status, "final_residual": r.final_residual,
                   "measured_rate": r.measured_rate, "certified_error": r.certified_error, "outer": r.outer,
                   "residuals": r.residuals}
            if timing:
                doc["wall_ns"] = r.wall_ns
            with open(path, "w") as fh:
                json.dump(doc, fh, indent=1)
                fh.write("\n")
        else:
            with open(path, "w") as fh:
                fh.write("iter,residual\n")
                for k, v in enumerate(r.residuals):
                    fh.write(f"{k},{v!r}\n")
    rows = _summary_rows(records, timing)
    _write_summary(rows, args.out, args.format, timing)
    _print_table(rows, timing)
    failed = [r.name for r in records if not r.converged]
    if failed:
        _error("solver_failure", f"not converged: {', '.join(failed)}",
               failed=failed, status={r.name: r.status for r in records if not r.converged},
               detail={r.name: r.error for r in records if r.error})
        return EXIT_FAIL
    return EXIT_OK


# ---------------------------------------------------------------- spectrum


def cmd_spectrum(args, cfg: dict) -> int:
    instance = build_instance(cfg, args.seed)
    scfg = cfg.get("spectrum", {})
    P = _iteration_matrix(instance, scfg.get("policy", "greedy"))
    cap = int(scfg.get("cap", EIG_CAP))
    if P.n_rows > cap:
        raise ConfigError(f"matrix size {P.n_rows} exceeds the dense eigensolver cap {cap}")
    eig = dense_eigenvalues(P.toarray(), cap=cap)
    eig = eig[np.lexsort((eig.imag, eig.real))]
    rho = spectral_radius_of(eig)
    mode = scfg.get("epsilon", "spectral")
    if mode == "spectral":
        if not 0.0 < rho < 1.0:
            raise ConfigError(f"spectral radius {rho} is not in (0, 1)")
        eps = 1.0 - rho
    else:
        eps = resolve_epsilon(mode, instance)
    degrees = [int(d) for d in scfg.get("degrees", [2, 4])]
    r = scfg.get("r", "half")
    r = (1.0 - np.sqrt(eps) / 2.0) / (1.0 - np.sqrt(eps)) if r == "half" else float(r)
    band = float(scfg.get("band", 1e-9))
    samples = int(scfg.get("samples", 512))
    columns = {f"sigma_{d}": [in_sigma_d(z, d, eps, band).status for z in eig] for d in degrees}
    columns["sigma_r"] = [in_sigma_r_d2(z, eps, r, band).status for z in eig]
    os.makedirs(args.out, exist_ok=True)
    if args.format == "json":
        doc = [{"re": float(z.real), "im": float(z.imag), **{k: v[i] for k, v in columns.items()}} for i, z in enumerate(eig)]
        with open(os.path.join(args.out, "eigenvalues.json"), "w") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")
    else:
        with open(os.path.join(args.out, "eigenvalues.csv"), "w") as fh:
            fh.write(",".join(["re", "im", *columns]) + "\n")
            for i, z in enumerate(eig):
                fh.write(",".join([repr(float(z.real)), repr(float(z.imag)), *(v[i] for v in columns.values())]) + "\n")
    curves = {f"curve_sigma_{d}": RegionSpec("SigmaEps_d", d, eps) for d in degrees}
    curves["curve_sigma_r"] = RegionSpec("SigmaEpsR_d2", 2, eps, r=r)
    for fname, spec in curves.items():
        pts = boundary_curve(spec, samples)
        if args.format == "json":
            with open(os.path.join(args.out, fname + ".json"), "w") as fh:
                json.dump([[float(z.real), float(z.imag)] for z in pts], fh)
                fh.write("\n")
        else:
            write_points_csv(os.path.join(args.out, fname + ".csv"), pts)
    counts = {k: {s: v.count(s) for s in ("inside", "boundary_band", "outside")} for k, v in columns.items()}
    summary = {"n": int(eig.size), "spectral_radius": rho, "epsilon": eps, "r": r, "counts": counts}
    with open(os.path.join(args.out, "spectrum_summary.json"), "w") as fh:
        json.dump(summary, fh, indent=1)
        fh.write("\n")
    print(json.dumps(summary))
    return EXIT_OK


# ---------------------------------------------------------------- verify and gen


def cmd_verify(args, cfg: dict) -> int:
    only = args.check or cfg.get("checks")
    if only:
        unknown = set(only) - set(CHECKS)
        if unknown:
            raise ConfigError(f"unknown checks {sorted(unknown)}; available {sorted(CHECKS)}")
    perturb = args.perturb_alpha if args.perturb_alpha is not None else float(cfg.get("perturb_alpha", 0.0))
    results = run_checks(args.seed, perturb, only)
    for res in results:
        print(res.line())
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "verify.json"), "w") as fh:
            json.dump([{"name": r.name, "passed": r.passed, "measured": r.measured, "tolerance": r.tolerance,
                        "detail": r.detail} for r in results], fh, indent=1)
            fh.write("\n")
    failed = [r.name for r in results if not r.passed]
    if failed:
        _error("check_failure", f"{len(failed)} check(s) failed", failed=failed)
        return EXIT_FAIL
    return EXIT_OK


def cmd_gen(args, cfg: dict) -> int:
    instance = build_instance(cfg, args.seed)
    if not isinstance(instance, MdpInstance):
        raise ConfigError("gen writes MDP instances; use a 'random', 'hjb' or 'file' instance")
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "instance.json")
    instance.save(path)
    print(json.dumps({"path": path, "n": instance.n, "rows": int(instance.transitions.n_rows),
                      "nnz": int(instance.transitions.nnz)}))
    return EXIT_OK


# ---------------------------------------------------------------- entry point


def _error(kind: str, message: str, **extra) -> None:
    print(json.dumps({"error": kind, "message": message, **extra}), file=sys.stderr)


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="accelfp", description="Accelerated fixed-point iteration benchmarks.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment file (JSON or TOML)")
    common.add_argument("--seed", type=_u64, default=None, help="instance seed (overrides the config)")
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("--format", choices=("csv", "json"), default=None)
    common.add_argument("--parallel", action="store_true", help="run independent solvers concurrently")
    common.add_argument("--no-timing", action="store_true", help="omit wall-clock fields so outputs are byte-identical")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="run solvers on an instance")
    sub.add_parser("spectrum", parents=[common], help="classify an iteration-matrix spectrum")
    p = sub.add_parser("verify", parents=[common], help="run the oracle checks")
    p.add_argument("--perturb-alpha", type=float, default=None, help="shift the extrapolation weights of the rate checks")
    p.add_argument("--check", action="append", help="run only this check (repeatable)")
    sub.add_parser("gen", parents=[common], help="write a generated instance")
    return parser


COMMANDS = {"solve": cmd_solve, "spectrum": cmd_spectrum, "verify": cmd_verify, "gen": cmd_gen}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.config:
            cfg = load_config(args.config)
        elif args.command == "verify":
            cfg = {}
        else:
            raise ConfigError(f"{args.command} needs --config")
        if args.seed is None:
            args.seed = int(cfg.get("seed", 0))
        if args.out is None:
            args.out = cfg.get("out", "out" if args.command != "verify" else None)
            if args.out is not None and args.config:
                args.out = _path(cfg, args.out) if "out" in cfg else args.out
        if args.format is None:
            args.format = cfg.get("format", "csv")
        if args.format not in ("csv", "json"):
            raise ConfigError(f"format must be csv or json, got {args.format!r}")
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        _error("config", str(exc))
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
