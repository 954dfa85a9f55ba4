"""qcap command line: compute single bounds, parameter sweeps, self-test.

Exit codes: 0 success, 1 usage error or failed self-test, 2 solver failure,
3 sweep finished with flagged rows.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import bounds as B
from . import channels as C
from .sdp import SolverError

log = logging.getLogger("qcap")

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_FLAGGED = 0, 1, 2, 3
COLUMNS = ("param", "value_log", "value_linear", "status", "gap")
FLOAT_FMT = "%.9g"
NALPHA_SNAP = 1e-4


class UsageError(ValueError):
    pass


# ------------------------------------------------------------ channel specs

def _load_matrix(path) -> np.ndarray:
    path = Path(path)
    if path.suffix == ".json":
        data = json.loads(path.read_text())
        return np.asarray(data["matrix"] if isinstance(data, dict) else data, dtype=float)
    return np.loadtxt(path, delimiter=",", ndmin=2)


def parse_channel(spec: str) -> C.QuantumChannel:
    """Channel from 'ad:<g>', 'cq:<a>', 'nalpha:<alpha>', 'identity:<d>',
    'classical:<path>', 'kraus:<path>' or '<spec> x <spec>'."""
    parts = [p.strip() for p in spec.split(" x ")]
    if len(parts) > 1:
        ch = parse_channel(parts[0])
        for p in parts[1:]:
            ch = C.tensor_channels(ch, parse_channel(p))
        return ch
    kind, sep, arg = spec.strip().partition(":")
    if not sep or not arg:
        raise UsageError(f"channel spec {spec!r} is not of the form kind:argument")
    try:
        if kind == "ad":
            return C.amplitude_damping(float(arg))
        if kind == "cq":
            return C.cq_two_state(float(arg))
        if kind == "nalpha":
            alpha = float(arg)
            # decimals of pi/4 such as 0.7854 overshoot the closed range by rounding
            if 0 < alpha - math.pi / 4 <= NALPHA_SNAP:
                alpha = math.pi / 4
            return C.n_alpha(alpha)
        if kind == "identity":
            d = int(arg)
            if str(d) != arg.strip():
                raise ValueError(f"dimension {arg!r} is not an integer")
            return C.identity(d)
        if kind == "classical":
            return C.classical_channel(_load_matrix(arg), label=f"classical:{Path(arg).stem}")
        if kind == "kraus":
            return C.load_channel(arg)
    except (ValueError, OSError, KeyError) as exc:
        raise UsageError(f"channel spec {spec!r}: {exc}") from exc
    raise UsageError(f"unknown channel kind {kind!r}")


def _classical_matrix(spec: str) -> np.ndarray:
    kind, _, arg = spec.strip().partition(":")
    if kind != "classical" or " x " in spec:
        raise UsageError("ppv needs a single classical:<path> channel")
    try:
        return C.check_stochastic(_load_matrix(arg))
    except (ValueError, OSError, KeyError) as exc:
        raise UsageError(f"channel spec {spec!r}: {exc}") from exc


# ------------------------------------------------------------------ bounds

@dataclass
class Query:
    channel: str
    eps: float = 0.01
    m: float = 2.0
    cls: str | None = None
    rate: float | None = None
    n: int = 50
    solver: dict = field(default_factory=dict)


def _cls(q: Query, default: str) -> str:
    return B.CodeClass.parse(q.cls or default).value


def _fns(q, ch, default):
    return B.success_prob(ch, q.m, _cls(q, default), **q.solver)


def _c1(q, ch, default):
    return B.one_shot_capacity(ch, q.eps, _cls(q, default), **q.solver)


def _m0(q, ch, default):
    return B.zero_error_m0(ch, _cls(q, default), **q.solver)


def _re(q, ch, ppt):
    return B.ht_bound(ch, q.eps, ppt=ppt, **q.solver)


def _ppv(q, ch):
    return B.ppv_lp(_classical_matrix(q.channel), q.eps, **q.solver)


def _adlower(q, ch):
    kind, _, arg = q.channel.strip().partition(":")
    if kind != "ad" or " x " in q.channel:
        raise UsageError("adlower needs a single ad:<gamma> channel")
    val = B.ad_holevo_lower(float(arg))
    return B.BoundResult("ad_holevo_lower", ch.label, {}, 2.0 ** val, val,
                         diagnostics={"status": "optimal", "gap": 0.0})


def _decay(q, ch):
    if q.rate is None:
        raise UsageError("decay needs --rate")
    val = B.strong_converse_decay(ch, q.rate, q.n, **q.solver)
    return B.BoundResult("decay", ch.label, {"rate": q.rate, "n": q.n}, val,
                         math.log2(val) if val > 0 else float("-inf"),
                         diagnostics={"status": "optimal", "gap": 0.0})


# name -> (description, callable(query, channel) -> BoundResult)
BOUNDS = {
    "fns": ("optimal NS success probability for m messages", lambda q, ch: _fns(q, ch, "NS")),
    "fnsppt": ("optimal NS∩PPT success probability for m messages", lambda q, ch: _fns(q, ch, "NS_PPT")),
    "c1ns": ("one-shot eps-error NS capacity", lambda q, ch: _c1(q, ch, "NS")),
    "c1nsppt": ("one-shot eps-error NS∩PPT capacity", lambda q, ch: _c1(q, ch, "NS_PPT")),
    "re": ("hypothesis-testing converse R_E", lambda q, ch: _re(q, ch, False)),
    "reppt": ("hypothesis-testing converse with PPT constraint", lambda q, ch: _re(q, ch, True)),
    "fplus": ("single-letter relaxation f+ of the success probability", lambda q, ch: B.f_plus(ch, q.m, **q.solver)),
    "ftildeplus": ("alternative relaxation f~+ of the success probability",
                   lambda q, ch: B.f_tilde_plus(ch, q.m, **q.solver)),
    "beta": ("strong converse bound C_beta = log2 beta", lambda q, ch: B.beta(ch, **q.solver)),
    "zeta": ("strong converse bound C_zeta = log2 zeta", lambda q, ch: B.zeta(ch, **q.solver)),
    "m0ns": ("one-shot zero-error NS message count", lambda q, ch: _m0(q, ch, "NS")),
    "m0nsppt": ("one-shot zero-error NS∩PPT message count", lambda q, ch: _m0(q, ch, "NS_PPT")),
    "ppv": ("finite-blocklength LP converse (classical channels)", _ppv),
    "eacap": ("entanglement-assisted capacity, numerical state search", lambda q, ch: B.ea_capacity_search(ch)),
    "adlower": ("Holevo lower bound for amplitude damping", _adlower),
    "decay": ("strong converse error lower bound 1 - f+(2^r)^n", _decay),
}

# bounds whose code class can be switched with --class
CLASS_FAMILIES = {"fns", "fnsppt", "c1ns", "c1nsppt", "m0ns", "m0nsppt"}


def evaluate(bound: str, q: Query) -> B.BoundResult:
    if bound not in BOUNDS:
        raise UsageError(f"unknown bound {bound!r}; see list-bounds")
    if q.cls is not None and bound not in CLASS_FAMILIES:
        raise UsageError(f"--class does not apply to bound {bound!r}")
    ch = parse_channel(q.channel)
    return BOUNDS[bound][1](q, ch)


# ------------------------------------------------------------------ output

def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "nan"
    return FLOAT_FMT % v


def _json_value(v):
    if isinstance(v, str) or v is None:
        return v
    v = float(v)
    # same 9 significant digits as the CSV; non-finite values become null
    return float(FLOAT_FMT % v) if math.isfinite(v) else None


def _row(param, result: B.BoundResult | None, status: str | None = None) -> dict:
    if result is None:
        return {"param": param, "value_log": float("nan"), "value_linear": float("nan"),
                "status": status, "gap": float("nan")}
    return {"param": param, "value_log": result.value_log, "value_linear": result.value_linear,
            "status": result.status, "gap": result.gap}


def render(rows, fmt: str) -> str:
    if fmt == "csv":
        lines = [",".join(COLUMNS)]
        lines += [",".join(_fmt(r[c]) if r[c] != "" else "" for c in COLUMNS) for r in rows]
        return "\n".join(lines) + "\n"
    out = [{c: _json_value(r[c]) for c in COLUMNS} for r in rows]
    return json.dumps(out, indent=1) + "\n"


def write_output(text: str, out: str | None):
    if out is None:
        sys.stdout.write(text)
        return
    with open(out, "w", newline="\n") as fh:
        fh.write(text)


PLOT_STUB = '''"""Plot {out}: {bound} against {param}."""
import csv

import matplotlib.pyplot as plt

with open({out!r}) as fh:
    rows = [r for r in csv.DictReader(fh) if r["status"] == "optimal"]
plt.plot([float(r["param"]) for r in rows], [float(r["value_log"]) for r in rows], label={bound!r})
plt.xlabel({param!r})
plt.ylabel("value_log")
plt.legend()
plt.savefig({png!r})
'''


def write_plot_stub(out: str, bound: str, param: str) -> Path:
    path = Path(out).with_suffix(".plot.py")
    path.write_text(PLOT_STUB.format(out=str(out), bound=bound, param=param,
                                     png=str(Path(out).with_suffix(".png"))))
    return path


# ------------------------------------------------------------------ sweeps

@dataclass
class SweepConfig:
    bound: str
    channel: str
    param: str
    start: float
    stop: float
    step: float
    eps: float = 0.01
    m: float = 2.0
    cls: str | None = None
    rate: float | None = None
    n: int = 50
    solver: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.step > 0:
            raise UsageError("sweep step must be positive")
        if self.start > self.stop:
            raise UsageError("sweep start exceeds stop")

    def grid(self) -> list[float]:
        count = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return [round(self.start + k * self.step, 12) for k in range(count)]

    def query(self, value: float) -> Query:
        q = Query(self.channel, self.eps, self.m, self.cls, self.rate, self.n, dict(self.solver))
        if self.param in ("eps", "m", "rate"):
            setattr(q, self.param, value)
        elif self.param == "n":
            q.n = int(round(value))
        elif "{" in self.channel:
            q.channel = self.channel.replace("{%s}" % self.param, repr(value))
        else:
            q.channel = f"{self.channel}:{value!r}"
        return q


def parse_param(text: str):
    try:
        name, start, stop, step = text.split(":")
        return name, float(start), float(stop), float(step)
    except ValueError as exc:
        raise UsageError(f"--param {text!r} is not name:start:stop:step") from exc


def _sweep_point(args):
    bound, q, value = args
    try:
        return _row(value, evaluate(bound, q))
    except SolverError as exc:
        return _row(value, None, exc.solution.status)
    except ValueError as exc:
        # bound and template were validated up front; this is a bad grid value
        log.warning("grid point %s: %s", value, exc)
        return _row(value, None, "invalid")


def run_sweep(cfg: SweepConfig, jobs: int = 1) -> list[dict]:
    # validate the template once so usage errors surface before any solve
    points = [(cfg.bound, cfg.query(v), v) for v in cfg.grid()]
    if cfg.bound not in BOUNDS:
        raise UsageError(f"unknown bound {cfg.bound!r}; see list-bounds")
    parse_channel(points[0][1].channel)
    if jobs <= 1:
        return [_sweep_point(p) for p in points]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        # map keeps grid order whatever the completion order
        return list(pool.map(_sweep_point, points))


# ------------------------------------------------------------------ commands

def _solver_opts(args) -> dict:
    opts = {}
    if args.feas_tol is not None:
        opts["feas_tol"] = args.feas_tol
    if args.gap_tol is not None:
        opts["gap_tol"] = args.gap_tol
    return opts


def cmd_compute(args) -> int:
    if not args.bound or not args.channel:
        raise UsageError("compute needs --bound and --channel")
    q = Query(args.channel, args.eps, args.m, args.cls, args.rate, args.n, _solver_opts(args))
    try:
        res = evaluate(args.bound, q)
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except UsageError:
        raise
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    print(f"value_log {_fmt(res.value_log)}")
    print(f"value_linear {_fmt(res.value_linear)}")
    diag = {k: v for k, v in res.diagnostics.items() if isinstance(v, (int, float, str, bool))}
    print(" ".join(f"{k}={_fmt(v) if isinstance(v, float) else v}" for k, v in diag.items()),
          file=sys.stderr)
    if args.out:
        write_output(render([_row("", res)], args.format), args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    if not args.bound or not args.channel or not args.param:
        raise UsageError("sweep needs --bound, --channel and --param")
    name, start, stop, step = parse_param(args.param)
    cfg = SweepConfig(args.bound, args.channel, name, start, stop, step, args.eps, args.m,
                      args.cls, args.rate, args.n, _solver_opts(args))
    rows = run_sweep(cfg, args.jobs)
    write_output(render(rows, args.format), args.out)
    if args.out and args.format == "csv":
        write_plot_stub(args.out, args.bound, name)
    flagged = [r for r in rows if r["status"] != "optimal"]
    for r in flagged:
        print(f"flagged: {name}={_fmt(r['param'])} status {r['status']}", file=sys.stderr)
    return EXIT_FLAGGED if flagged else EXIT_OK


def cmd_selftest(args) -> int:
    from . import acceptance

    only = None
    if args.criteria:
        try:
            only = [int(k) for k in args.criteria.split(",")]
        except ValueError as exc:
            raise UsageError(f"--criteria {args.criteria!r} is not a comma list of numbers") from exc
    try:
        outcomes = acceptance.run(only)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    for o in outcomes:
        print(o.line())
    passed = sum(o.passed for o in outcomes)
    print(f"{passed}/{len(outcomes)} criteria passed")
    return EXIT_OK if passed == len(outcomes) else EXIT_USAGE


def cmd_list_bounds(args) -> int:
    width = max(map(len, BOUNDS))
    for name, (desc, _) in BOUNDS.items():
        print(f"{name:<{width}}  {desc}")
    return EXIT_OK


COMMANDS = {"compute": cmd_compute, "sweep": cmd_sweep, "selftest": cmd_selftest,
            "list-bounds": cmd_list_bounds}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qcap", description="SDP bounds on classical capacities of quantum channels")
    ap.add_argument("command", nargs="?", choices=list(COMMANDS))
    ap.add_argument("--list-bounds", action="store_true", help="same as the list-bounds command")
    ap.add_argument("--bound")
    ap.add_argument("--channel", help="ad:<g> | cq:<a> | nalpha:<alpha> | identity:<d> | "
                                      "classical:<path> | kraus:<path> | <spec> x <spec>")
    ap.add_argument("--eps", type=float, default=0.01)
    ap.add_argument("--m", type=float, default=2.0)
    ap.add_argument("--class", dest="cls", choices=["ns", "nsppt"])
    ap.add_argument("--rate", type=float, help="rate in bits for the decay bound")
    ap.add_argument("--n", type=int, default=50, help="channel uses for the decay bound")
    ap.add_argument("--param", help="name:start:stop:step; name is eps, m, rate, n or a channel parameter")
    ap.add_argument("--out")
    ap.add_argument("--format", choices=["csv", "json"], default="csv")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--feas-tol", type=float)
    ap.add_argument("--gap-tol", type=float)
    ap.add_argument("--criteria", help="selftest: comma list of criterion numbers")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.list_bounds:
        args.command = "list-bounds"
    if args.command is None:
        print("qcap: a command is required", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"qcap: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
