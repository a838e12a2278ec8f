"""Command-line runner: presets, config documents, deterministic reports."""
import argparse
import copy
import csv
import glob
import hashlib
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import control, inequalities, sensors, symbols
from .errors import ConfigInvalid, QuadObsError, SchemaMismatch
from .hermite import weyl_galerkin

SCHEMA_VERSION = 1
COMMANDS = ("classify", "verify-spectral", "verify-dissipation", "verify-smoothing",
            "synthesize", "bounds", "report")

PRESETS = {
    "harmonic": {"symbol": {"oscillator": {"dim": 1, "I": [1], "J": [1]}}},
    "laplacian": {"symbol": {"oscillator": {"dim": 1, "I": [], "J": [1]}}},
    "kolmogorov": {
        "symbol": {"ou": {"kind": "kolmogorov", "m": 1}},
        "dissipation": {"N_cut": 24, "lambda": 7, "comparison_I": [],
                        "lambda_sweep": [5, 6, 7, 8, 9], "enforce_leakage": False},
        "smoothing": {"N_cut": 40, "init_degree": 20,
                      "orders": [[[0, 0], [1, 0]], [[0, 0], [0, 1]], [[0, 0], [2, 0]],
                                 [[0, 0], [1, 1]], [[0, 0], [0, 2]]]},
    },
    "kfp": {
        "symbol": {"ou": {"kind": "kfp", "m": 2, "I1": []}},
        "smoothing": {"symbol": {"ou": {"kind": "kfp", "m": 1, "I1": []}},
                      "N_cut": 40, "init_degree": 20,
                      "orders": [[[0, 0], [1, 0]], [[0, 0], [0, 1]], [[0, 1], [0, 0]],
                                 [[0, 0], [2, 0]], [[0, 0], [1, 1]], [[0, 2], [0, 0]],
                                 [[0, 1], [1, 0]], [[0, 1], [0, 1]], [[0, 0], [0, 2]]]},
    },
    "kfp-1": {"symbol": {"ou": {"kind": "kfp", "m": 2, "I1": [1]}}},
    "kfp-12": {"symbol": {"ou": {"kind": "kfp", "m": 2, "I1": [1, 2]}}},
    "decay-cubes": {
        "sensor": {"kind": "lattice_cubes", "dim": 1, "gamma": 0.5, "a": 0.5, "L": 1, "I": [1]},
        "spectral": {"lambdas": [1, 5, 9, 13, 17, 21, 25, 29, 33, 37, 41], "K": 10},
        "control": {"symbol": {"oscillator": {"dim": 1, "I": [1], "J": [1]}},
                    "N_cut": 11, "T": 1.0, "eps_reg": 1e-10},
    },
    "intro-balls": {
        "sensor": {"kind": "lattice_balls", "dim": 1, "L": 1, "I": [1]},
        "spectral": {"lambdas": [1, 5, 9, 13, 17, 21, 25, 29, 33, 37, 41], "K": 10},
    },
    "thick": {
        "sensor": {"kind": "thick_pattern", "dim": 1, "gamma": 0.5, "L": 1, "I": [1]},
        "spectral": {"lambdas": [1, 5, 9, 13, 17, 21, 25, 29, 33, 37, 41], "K": 10},
    },
}

BOUND_ALIASES = {
    "decay-cubes": "decay-cubes",
    "hermite": "hermite",
    "kovrijkine": "kovrijkine", "thick": "kovrijkine",
    "covering": "covering", "gen": "covering",
    "besicovitch": "besicovitch",
    "fractional": "fractional",
    "sharp-cost": "sharp-cost", "sharp": "sharp-cost",
}


# ---------------------------------------------------------------------------
# serialization

def _clean(obj):
    """JSON-ready copy with floats rounded to 12 significant digits."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": _clean(obj.real), "im": _clean(obj.imag)}
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        x = float(f"{x:.12g}")
        return 0.0 if x == 0 else x
    return obj


def dumps(obj):
    return json.dumps(_clean(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def config_hash(config):
    canon = json.dumps(_clean(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def atomic_write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in rows:
        writer.writerow([_fmt_cell(v) for v in row])
    return buf.getvalue()


def _fmt_cell(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    if isinstance(v, (tuple, list)):
        return " ".join(_fmt_cell(x) for x in v)
    return str(v)


# ---------------------------------------------------------------------------
# config handling

def _set_path(cfg, dotted, value):
    keys = dotted.split(".")
    node = cfg
    for k in keys[:-1]:
        if not isinstance(node.get(k, {}), dict):
            raise ConfigInvalid(f"cannot set {dotted}: {k} is not a section")
        node = node.setdefault(k, {})
    node[keys[-1]] = value


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def build_config(command, preset=None, config_path=None, seed=0, overrides=()):
    if command not in COMMANDS:
        raise ConfigInvalid(f"unknown command {command!r}")
    cfg = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigInvalid(f"unknown preset {preset!r}; known: {', '.join(sorted(PRESETS))}")
        cfg = copy.deepcopy(PRESETS[preset])
    if config_path is not None:
        try:
            doc = json.loads(Path(config_path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigInvalid(f"cannot read config {config_path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigInvalid("config document must be an object")
        cfg.update(doc)
    for item in overrides:
        if "=" not in item:
            raise ConfigInvalid(f"override {item!r} is not key=value")
        key, val = item.split("=", 1)
        _set_path(cfg, key.strip(), _parse_value(val))
    cfg["command"] = command
    cfg["seed"] = int(seed if seed is not None else cfg.get("seed", 0))
    if preset is not None:
        cfg["preset"] = preset
    return cfg


def _section(cfg, name, path=""):
    sec = cfg.get(name)
    if not isinstance(sec, dict):
        raise ConfigInvalid(f"missing section {path + name!r}")
    return sec


def _index_list(values, dim, where):
    out = []
    for v in values:
        if not isinstance(v, int) or not 1 <= v <= dim:
            raise ConfigInvalid(f"{where}: index {v!r} outside 1..{dim}")
        out.append(v - 1)
    return tuple(out)


def _ou_from_doc(doc):
    kind = doc.get("kind")
    if kind == "kolmogorov":
        return symbols.kolmogorov_spec(int(doc.get("m", 1)))
    if kind == "kfp":
        m = int(doc.get("m", 1))
        return symbols.kfp_spec(m, _index_list(doc.get("I1", []), m, "symbol.ou.I1"))
    try:
        return symbols.OUSpec(np.array(doc["Q"], float), np.array(doc["R"], float),
                              np.array(doc["B"], float))
    except KeyError as exc:
        raise ConfigInvalid(f"symbol.ou: missing {exc}") from exc


def resolve_symbol(doc):
    """``(symbol, ou_spec or None)`` from a symbol section."""
    if "ou" in doc:
        spec = _ou_from_doc(doc["ou"])
        return symbols.ou_symbol(spec), spec
    if "oscillator" in doc:
        o = doc["oscillator"]
        dim = int(o["dim"])
        return symbols.oscillator_symbol(dim, _index_list(o.get("I", []), dim, "oscillator.I"),
                                         _index_list(o.get("J", []), dim, "oscillator.J")), None
    if "terms" in doc:
        try:
            return symbols.symbol_from_document(doc), None
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigInvalid(f"symbol.terms: {exc}") from exc
    raise ConfigInvalid("symbol section needs 'ou', 'oscillator' or 'terms'")


def resolve_sensor(doc):
    try:
        return sensors.sensor_from_document(doc)
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid(f"sensor: {exc}") from exc


# ---------------------------------------------------------------------------
# commands

def cmd_classify(cfg):
    q, spec = resolve_symbol(_section(cfg, "symbol"))
    report = symbols.singular_space(q)
    doc = report.to_document()
    prod = report.product
    doc["I"] = [i + 1 for i in prod.I] if prod else None
    doc["J"] = [j + 1 for j in prod.J] if prod else None
    doc["dim"] = q.dim
    doc["singular_dim"] = int(report.basis.shape[1])
    doc["chain_dims"] = list(report.chain_dims)
    if spec is not None:
        doc["kalman_rank"] = symbols.kalman_rank(spec.Q, spec.B)
        doc["trace_B"] = spec.trace_B
        try:
            doc["predicted_I"] = [i + 1 for i in symbols.ou_predict_I(spec)]
        except QuadObsError as exc:
            doc["predicted_I"] = None
            doc["predicted_I_error"] = str(exc)
    lines = [f"dim {q.dim}, dim S = {doc['singular_dim']}, k0 = {report.k0}",
             f"I = {doc['I']}, J = {doc['J']}, flags = {list(report.flags)}"]
    return doc, None, lines


def cmd_verify_spectral(cfg):
    omega = resolve_sensor(_section(cfg, "sensor"))
    sp = cfg.get("spectral", {})
    lams = sp.get("lambdas", [1, 5, 9])
    K = float(sp.get("K", 10.0))
    I = sp.get("I")
    I = None if I is None else _index_list(I, omega.dim, "spectral.I")
    reports = [inequalities.spectral_ineq_empirical(float(l), omega, I=I, K=K) for l in lams]
    emp = [r.empirical_constant for r in reports]
    doc = {"rows": [r.to_document() for r in reports],
           "empirical": emp,
           "bound_log10": [r.bound_log10 for r in reports],
           "K_min": max((r.K_min for r in reports if r.K_min is not None), default=None),
           "positive": all(v > 0 for v in emp),
           "nonincreasing": all(b <= a * (1 + 1e-10) for a, b in zip(emp, emp[1:])),
           "bound_holds": all(r.bound_holds for r in reports)}
    rows = [("lambda", "subspace_dim", "empirical", "empirical_log10", "bound_log10", "K_min")]
    rows += [(r.lam, r.subspace_dim, r.empirical_constant, r.empirical_log10, r.bound_log10,
              r.K_min) for r in reports]
    lines = [f"lambda {r.lam:g}: lambda_min {r.empirical_constant:.6e}, "
             f"bound log10 {r.bound_log10:.4g}, K_min {r.K_min:.4g}" for r in reports]
    return doc, rows, lines


def cmd_verify_dissipation(cfg):
    q, spec = resolve_symbol(_section(cfg, "symbol"))
    dc = cfg.get("dissipation", {})
    lam = float(dc.get("lambda", 7))
    N = int(dc.get("N_cut", int(2 * lam + 10)))
    A = weyl_galerkin(q, N)
    comp = _index_list(dc.get("comparison_I", []), q.dim, "dissipation.comparison_I")
    seeds = tuple(int(cfg["seed"]) + i for i in range(int(dc.get("n_seeds", 3))))
    rep = inequalities.dissipation_experiment(
        A, comp, lam, seeds=seeds, times=dc.get("times"), t0=float(dc.get("t0", 1.0)),
        init_degree=dc.get("init_degree"),
        leakage_threshold=float(dc.get("leakage_threshold", 1e-6)),
        enforce_leakage=bool(dc.get("enforce_leakage", True)),
        lam_sweep=dc.get("lambda_sweep"))
    doc = rep.to_document()
    doc["N_cut"] = N
    lines = [f"k0 {rep.k0}, predicted exponent {rep.predicted_exponent}",
             f"fitted exponent {rep.exponent}, direct {rep.exponent_direct}",
             f"c_hat {rep.c_hat:.6g}, bound dominates {rep.dominated}, leakage {rep.leakage:.3e}"]
    if spec is not None and not np.any(spec.R) and not comp:
        exact = inequalities.fourier_dissipation_experiment(spec, lam, rep.k0, times=rep.times)
        doc["fourier_route"] = exact.to_document()
        lines.append(f"exact Fourier route: exponent {exact.exponent:.6g}, c_hat {exact.c_hat:.6g}, "
                     f"bound dominates {exact.dominated}")
    return doc, rep.csv_rows(), lines


def cmd_verify_smoothing(cfg):
    sc = cfg.get("smoothing", {})
    q, spec = resolve_symbol(sc.get("symbol") or _section(cfg, "symbol"))
    exact_ok = spec is not None and not np.any(spec.R)
    A = weyl_galerkin(q, int(sc.get("N_cut", 40)))
    rows = [("alpha", "beta", "t", "lhs", "leakage", "resolved")]
    out = []
    lines = []
    times = np.geomspace(0.1, 1.0, 9) if sc.get("times") is None else np.asarray(sc["times"], float)
    table = inequalities.semigroup_table(A, times)
    for alpha, beta in sc.get("orders", [[[0] * q.dim, [1] + [0] * (q.dim - 1)]]):
        rep = inequalities.smoothing_experiment(
            A, alpha, beta, times=times, init_degree=sc.get("init_degree"),
            leakage_threshold=float(sc.get("leakage_threshold", 1e-6)), semigroup=table)
        entry = rep.to_document()
        for t, v, lk, ok in zip(rep.times, rep.lhs, rep.leakage, rep.resolved):
            rows.append((tuple(alpha), tuple(beta), t, v, lk, bool(ok)))
        lines.append(f"alpha {alpha} beta {beta}: C_hat {rep.C_hat:.6g}, "
                     f"exponent {rep.exponent} (predicted {rep.predicted_exponent})")
        if exact_ok and not any(alpha):
            exact = inequalities.fourier_smoothing_experiment(spec, beta, rep.k0, times)
            entry["fourier_route"] = exact.to_document()
            lines.append(f"  exact Fourier route: C_hat {exact.C_hat:.6g}, exponent {exact.exponent:.6g}")
        out.append(entry)
    return {"orders": out}, rows, lines


def cmd_synthesize(cfg):
    cc = _section(cfg, "control")
    sym = cc.get("symbol") or cfg.get("symbol")
    if sym is None:
        raise ConfigInvalid("missing section 'control.symbol'")
    q, _ = resolve_symbol(sym)
    omega = resolve_sensor(_section(cfg, "sensor"))
    if omega.dim != q.dim:
        raise ConfigInvalid("sensor and symbol dimensions differ")
    N = int(cc.get("N_cut", 11))
    A = weyl_galerkin(q, N)
    M = inequalities.gram_matrix(A.basis, omega)
    rng = np.random.default_rng(int(cfg["seed"]))
    w0 = rng.standard_normal(A.size)
    prob = control.ControlProblem(A, M, float(cc.get("T", 1.0)), w0)
    res = control.hum_control(prob, eps_reg=cc.get("eps_reg"))
    obs = control.observability_check(prob.adjoint(), seed=int(cfg["seed"]))
    doc = res.to_document()
    doc.update({"N_cut": N, "modes": A.size, "w0_norm": float(np.linalg.norm(w0)),
                "observability": obs.to_document(),
                "duality_bound": obs.exact * float(np.linalg.norm(w0))})
    times = np.linspace(0, prob.T, 11)
    rows = [("t", "state_norm", "control_norm")] + control.trajectory(prob, res, times)
    lines = [f"residual {res.residual:.3e}, cost {res.cost:.6g}, eps {res.eps_reg:.3e}",
             f"C_obs exact {obs.exact:.6g}, empirical {obs.empirical:.6g}"]
    return doc, rows, lines


def _bound_args(cfg):
    return cfg.get("bounds", {})


def cmd_bounds(cfg):
    b = _bound_args(cfg)
    name = BOUND_ALIASES.get(str(b.get("name", "decay-cubes")))
    if name is None:
        raise ConfigInvalid(f"unknown bound {b.get('name')!r}")

    def get(key, default=None):
        if key in b:
            return float(b[key])
        if default is None:
            raise ConfigInvalid(f"bounds.{key} is required for {name}")
        return float(default)

    K = get("K", 10.0)
    if name == "decay-cubes":
        val = inequalities.bound_decay_cubes(get("gamma"), get("a", 0), get("L", 1), int(get("d", 1)), get("lambda"), K)
    elif name == "hermite":
        val = inequalities.bound_hermite(get("gamma"), get("a", 0), get("L", 1), int(get("d", 1)), get("lambda"), K)
    elif name == "kovrijkine":
        val = inequalities.bound_kovrijkine(get("gamma"), get("L", 1), int(get("d", 1)), get("lambda"), K)
    elif name == "fractional":
        val = inequalities.bound_fractional(get("theta"), get("gamma"), get("a", 0), get("L", 1),
                                            int(get("d", 1)), get("lambda"), K)
    elif name == "covering":
        val = inequalities.bound_gen(get("D"), get("eps", 1), get("a", 0), get("gamma"), get("kappa", 1),
                                     int(get("d", 1)), get("lambda"), b.get("shape", "general"))
    elif name == "besicovitch":
        val = inequalities.bound_besicovitch(get("gamma"), get("a", 0), get("eps", 1), get("R", 0), get("L", 1),
                                       int(get("d", 1)), get("lambda"), K)
    else:
        val = control.sharp_cost_bound(get("rho", 0), get("gamma"), get("T"), int(get("d", 1)),
                                       get("c1", 1), get("c2", 1))
    value = 10.0 ** val if val > -300 else 0.0
    doc = {"bound": name, "log10": val, "value": value, "parameters": b}
    return doc, None, [f"{name}: log10 = {val:.12g}, value = {value:.12g}"]


def cmd_report(cfg):
    paths = []
    for pattern in cfg.get("inputs", []):
        paths.extend(sorted(glob.glob(pattern)))
    docs = []
    for p in paths:
        try:
            docs.append(json.loads(Path(p).read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigInvalid(f"cannot read {p}: {exc}") from exc
    versions = {d.get("schema_version") for d in docs}
    if len(versions) > 1 or (versions and versions != {SCHEMA_VERSION}):
        raise SchemaMismatch(f"schema versions differ: {sorted(map(str, versions))}")
    tables = {}
    summary = []
    for d in sorted(docs, key=lambda d: (d.get("experiment", ""), d.get("config_hash", ""))):
        exp = d.get("experiment", "")
        key = d.get("config_hash", "")
        res = d.get("result", {})
        if exp == "verify-dissipation":
            t = tables.setdefault(exp, [("config_hash", "t", "decay")])
            t.extend((key, tt, v) for tt, v in zip(res.get("times", []), res.get("decay", [])))
        elif exp == "verify-spectral":
            t = tables.setdefault(exp, [("config_hash", "lambda", "empirical", "bound_log10", "K_min")])
            for r in res.get("rows", []):
                t.append((key, r["lambda"], r["empirical"], r["bound_log10"], r["K_min"]))
                summary.append(f"{key[:12]} lambda {r['lambda']}: log10 ratio {r['ratio_log10']}, "
                               f"K_min {r['K_min']}")
        else:
            t = tables.setdefault(exp, [("config_hash", "summary")])
            t.append((key, json.dumps(res, sort_keys=True)))
    doc = {"inputs": len(docs), "tables": sorted(tables), "summary": summary}
    return doc, tables, summary


HANDLERS = {
    "classify": cmd_classify,
    "verify-spectral": cmd_verify_spectral,
    "verify-dissipation": cmd_verify_dissipation,
    "verify-smoothing": cmd_verify_smoothing,
    "synthesize": cmd_synthesize,
    "bounds": cmd_bounds,
    "report": cmd_report,
}


def run(config, out_dir=None):
    """Execute a resolved config; returns ``(document, written paths)``."""
    command = config.get("command")
    if command not in HANDLERS:
        raise ConfigInvalid(f"unknown command {command!r}")
    result, rows, lines = HANDLERS[command](config)
    h = config_hash(config)
    doc = {"schema_version": SCHEMA_VERSION, "experiment": command, "config_hash": h,
           "seed": config.get("seed", 0), "config": config, "result": result}
    written = []
    if out_dir is not None:
        stem = command + (f"-{config['preset']}" if config.get("preset") else "") + f"-{h[:8]}"
        out = Path(out_dir)
        atomic_write(out / f"{stem}.json", dumps(doc))
        written.append(out / f"{stem}.json")
        if isinstance(rows, dict):
            for name, table in sorted(rows.items()):
                atomic_write(out / f"report-{name}.csv", csv_text(table))
                written.append(out / f"report-{name}.csv")
        elif rows:
            atomic_write(out / f"{stem}.csv", csv_text(rows))
            written.append(out / f"{stem}.csv")
        text = f"{command} (config {h[:12]}, seed {doc['seed']})\n" + "".join(f"  {l}\n" for l in lines)
        atomic_write(out / f"{stem}.txt", text)
        written.append(out / f"{stem}.txt")
    return doc, written


def make_parser():
    parser = argparse.ArgumentParser(prog="quadobs", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="command")
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--preset")
        p.add_argument("--config")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out")
        p.add_argument("--set", action="append", default=[], dest="overrides", metavar="KEY=VALUE")
        if name == "bounds":
            p.add_argument("--bound", "--thm", dest="b_name")
            for flag in ("gamma", "a", "L", "d", "lambda", "K", "theta", "D", "eps",
                         "kappa", "R", "shape", "rho", "T", "c1", "c2"):
                p.add_argument(f"--{flag}", dest=f"b_{flag}")
        if name == "report":
            p.add_argument("inputs", nargs="*")
    return parser


def main(argv=None):
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else ConfigInvalid.exit_code
    if args.command is None:
        parser.print_usage(sys.stderr)
        return ConfigInvalid.exit_code
    try:
        cfg = build_config(args.command, args.preset, args.config, args.seed, args.overrides)
        if args.command == "bounds":
            for key, val in vars(args).items():
                if key.startswith("b_") and val is not None:
                    cfg.setdefault("bounds", {})[key[2:]] = val if key == "b_shape" or key == "b_name" \
                        else _parse_value(val)
        if args.command == "report":
            cfg["inputs"] = list(cfg.get("inputs", [])) + list(args.inputs)
        out = args.out or os.environ.get("OUTPUT_DIR") or "results"
        doc, written = run(cfg, out)
    except QuadObsError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    for line in Path(written[-1]).read_text(encoding="utf-8").splitlines():
        print(line)
    return 0


if __name__ == "__main__":
    sys.exit(main())
