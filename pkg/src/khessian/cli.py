"""Command line front end.

    khessian solve        --body ellipse:2,1 --k 2 --f const:1 --phi const:0 --grid 64x128
    khessian sweep-eps    --body ellipse:2,1 --k 1 --schedule 0.5,0.25,0.125
    khessian verify-af    --body fourier:1,a3=0.1 --k 1
    khessian verify-reilly --body ellipse:2,1 --k 1 --f const:2
    khessian suite

Bodies: ``ball:R`` (with ``--n``), ``circle:R``, ``ellipse:a,b``,
``fourier:c0[,aM=v][,bM=v]...``.  Fields: ``const:v``,
``poly:ij=c[,ij=c...]`` (coefficient of ``x^i y^j``), ``radial:a0[,a1...]``
(``sum a_j r^(2j)``).

Exit codes: 0 success, 1 solver or runtime failure, 2 usage error.  JSON
output is deterministic: sorted keys and 17 significant digits.  Every
output file embeds the configuration that produced it.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import re
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConvexityError, KHessianError, NonPositiveRadiusError
from .fields import parse_field
from .geometry import BallGeometry, make_body, quermassintegral_chain
from .grid import MappedGrid
from .radial import radial_solve
from .reilly import (
    af_inequality,
    minkowski_inequality,
    nm_bridge_checks,
    reilly_identity,
    reilly_inequality,
    third_term_III,
)
from .reports import dumps, reports_to_csv
from .solver import (
    DEFAULT_SCHEDULE,
    SolveProblem,
    augmented_solve,
    continuation_solve,
    lambda_lower_bound,
    newton_solve_eps,
)

COMMANDS = ("solve", "verify-af", "verify-reilly", "sweep-eps", "suite")
MIN_GRID = (16, 32)


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str
    body: str = "ellipse:2,1"
    n: int = 2
    k: int = 1
    f: str = "const:1"
    phi: str = "const:0"
    grid: str = "64x128"
    schedule: tuple = DEFAULT_SCHEDULE
    method: str = "augmented"
    eps: float | None = None
    output: str | None = None
    format: str = "json"
    criteria: tuple = ()

    def to_dict(self) -> dict:
        out = asdict(self)
        out["schedule"] = list(self.schedule)
        out["criteria"] = list(self.criteria)
        out["version"] = __version__
        return out

    @property
    def grid_shape(self) -> tuple[int, int]:
        ns, nt = self.grid.lower().split("x")
        return int(ns), int(nt)


def _parse_grid(text: str) -> str:
    m = re.fullmatch(r"\s*(\d+)\s*[xX]\s*(\d+)\s*", text)
    if not m:
        raise UsageError(f"--grid: expected NSxNT, got {text!r}")
    ns, nt = int(m.group(1)), int(m.group(2))
    if ns < MIN_GRID[0] or nt < MIN_GRID[1]:
        raise UsageError(f"--grid: resolution {ns}x{nt} below the minimum {MIN_GRID[0]}x{MIN_GRID[1]}")
    if nt % 2:
        raise UsageError(f"--grid: angular count {nt} must be even")
    return f"{ns}x{nt}"


def _parse_schedule(text: str) -> tuple:
    try:
        vals = tuple(float(t) for t in text.split(","))
    except ValueError:
        raise UsageError(f"--schedule: malformed number in {text!r}") from None
    if len(vals) < 2 or any(not math.isfinite(v) or v <= 0 for v in vals):
        raise UsageError(f"--schedule: need at least two positive values, got {text!r}")
    if any(b >= a for a, b in zip(vals, vals[1:])):
        raise UsageError(f"--schedule: values must be strictly decreasing, got {text!r}")
    return vals


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="khessian", description="k-Hessian Neumann solver and inequality checks")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, solve=True):
        p.add_argument("--body", default="ellipse:2,1", help="body spec, e.g. ellipse:2,1 or ball:1")
        p.add_argument("--n", type=int, default=2, help="dimension (n > 2 only for ball bodies)")
        p.add_argument("--k", type=int, default=1)
        if solve:
            p.add_argument("--f", default="const:1", help="right-hand side field")
            p.add_argument("--phi", default="const:0", help="Neumann data field")
            p.add_argument("--grid", default="64x128", help="NSxNT, at least 16x32")
            p.add_argument("--schedule", default=None, help="comma-separated decreasing eps values")
        p.add_argument("--output", "-o", default=None, help="output file (stdout when omitted)")
        p.add_argument("--format", choices=("json", "csv"), default="json")

    p = sub.add_parser("solve", help="solve the classical or perturbed problem")
    common(p)
    p.add_argument("--method", choices=("augmented", "continuation"), default="augmented")
    p.add_argument("--eps", type=float, default=None, help="solve the perturbed problem at this eps")
    common(sub.add_parser("sweep-eps", help="continuation sweep with a plot-data table"))
    common(sub.add_parser("verify-af", help="Alexandrov-Fenchel, Minkowski and quermassintegral checks"), solve=False)
    common(sub.add_parser("verify-reilly", help="Reilly identity and inequality on a computed solution"))
    s = sub.add_parser("suite", help="run the acceptance battery")
    s.add_argument("--criteria", default=None, help="comma-separated criterion numbers (default all)")
    s.add_argument("--output", "-o", default=None)
    s.add_argument("--format", choices=("json", "csv"), default="json")
    return parser


def parse_config(argv) -> RunConfig:
    """Parse argv (a list or a whitespace-separated string) into a validated config."""
    if isinstance(argv, str):
        argv = argv.split()
    parser = build_parser()
    ns = parser.parse_args(argv)
    if ns.command == "suite":
        crit = ()
        if ns.criteria:
            try:
                crit = tuple(int(c) for c in ns.criteria.split(","))
            except ValueError:
                raise UsageError(f"--criteria: malformed list {ns.criteria!r}") from None
        return RunConfig("suite", output=ns.output, format=ns.format, criteria=crit)
    try:
        body = make_body(ns.body, ns.n)
    except (ConvexityError, NonPositiveRadiusError):
        # well-formed spec of an invalid body: reported by run() with exit 1
        body = None
    except KHessianError as exc:
        raise UsageError(f"--body: {exc}") from None
    n = ns.n
    if n < 2:
        raise UsageError(f"--n: dimension must be >= 2, got {n}")
    top = n if ns.command in ("solve", "sweep-eps") else n - 1
    if not 1 <= ns.k <= top:
        raise UsageError(f"--k: {ns.k} outside [1, {top}] for n={n}")
    kwargs = dict(body=ns.body, n=n, k=ns.k, output=ns.output, format=ns.format)
    if ns.command == "verify-af":
        return RunConfig(ns.command, **kwargs)
    try:
        f = parse_field(ns.f)
        phi = parse_field(ns.phi)
    except KHessianError as exc:
        raise UsageError(f"field spec: {exc}") from None
    if f.spec.startswith("const:") and float(f(0.0, 0.0)) <= 0:
        raise UsageError(f"--f: right-hand side must be positive, got {ns.f!r}")
    if isinstance(body, BallGeometry) and not (f.is_radial and phi.is_radial):
        raise UsageError("--f/--phi: balls in n > 2 need const or radial fields")
    kwargs.update(f=ns.f, phi=ns.phi, grid=_parse_grid(ns.grid))
    if ns.schedule is not None:
        kwargs["schedule"] = _parse_schedule(ns.schedule)
    if ns.command == "solve":
        if ns.eps is not None and not (math.isfinite(ns.eps) and ns.eps > 0):
            raise UsageError(f"--eps: must be positive, got {ns.eps}")
        kwargs.update(method=ns.method, eps=ns.eps)
    if ns.command == "verify-reilly":
        if not phi.spec.startswith("const:"):
            raise UsageError("--phi: the Reilly inequality needs constant Neumann data")
        if n - 1 < ns.k:
            raise UsageError(f"--k: verify-reilly needs k <= n-1 = {n - 1}")
    return RunConfig(ns.command, **kwargs)


# -- command implementations ----------------------------------------------------
def _problem(cfg: RunConfig, eps: float = 0.0):
    body = make_body(cfg.body, cfg.n)
    ns, nt = cfg.grid_shape
    return body, SolveProblem(cfg.k, cfg.f, cfg.phi, MappedGrid(body, ns, nt), eps)


def _classical(cfg: RunConfig, body, problem):
    if cfg.method == "continuation":
        return continuation_solve(problem, cfg.schedule)
    return augmented_solve(problem)


def _radial_payload(cfg: RunConfig, body: BallGeometry) -> dict:
    phi = parse_field(cfg.phi)
    sol = radial_solve(cfg.n, cfg.k, body.R, cfg.f, eps=cfg.eps, phi=float(phi.radial_profile(body.R)))
    r, u, du, _ = sol.mesh(9)
    return {
        "lambda": sol.lam,
        "mode": "radial",
        "k": cfg.k,
        "n": cfg.n,
        "u_stats": {"min": float(u.min()), "max": float(u.max()), "mean": sol.mean()},
        "grad_sup": float(np.abs(du).max()),
        "profile": {"r": r, "u": u},
        "lambda_lower_bound": lambda_lower_bound(body, cfg.k, cfg.f, cfg.phi),
    }


def cmd_solve(cfg: RunConfig) -> dict:
    body = make_body(cfg.body, cfg.n)
    if isinstance(body, BallGeometry):
        return {"result": _radial_payload(cfg, body)}
    if cfg.eps is not None:
        _, p = _problem(cfg, cfg.eps)
        rep = newton_solve_eps(p)
    else:
        _, p = _problem(cfg)
        rep = _classical(cfg, body, p)
    out = rep.to_dict()
    out["lambda_lower_bound"] = lambda_lower_bound(body, cfg.k, cfg.f, cfg.phi)
    return {"result": out}


def cmd_sweep(cfg: RunConfig) -> dict:
    body, p = _problem(cfg)
    if isinstance(body, BallGeometry):
        raise UsageError("sweep-eps runs on planar grids; use solve for balls")
    rep = continuation_solve(p, cfg.schedule)
    trace = [s.to_dict() for s in rep.eps_schedule_trace]
    grads = [s["grad_sup"] for s in trace]
    return {
        "result": rep.to_dict(),
        "grad_ratio": max(grads) / min(grads),
        "plot": trace,
    }


def cmd_verify_af(cfg: RunConfig) -> dict:
    body = make_body(cfg.body, cfg.n)
    reports = [af_inequality(body, cfg.k)]
    if cfg.k == 1:
        reports.append(minkowski_inequality(body))
    reports.append(quermassintegral_chain(body))
    return {"reports": reports}


def cmd_verify_reilly(cfg: RunConfig) -> dict:
    body = make_body(cfg.body, cfg.n)
    phi0 = float(parse_field(cfg.phi)(0.0, 0.0))
    f = parse_field(cfg.f)
    if isinstance(body, BallGeometry):
        sol = radial_solve(cfg.n, cfg.k, body.R, cfg.f, phi=phi0)
        subject, c = sol, float(sol.du(body.R))
    else:
        _, p = _problem(cfg)
        subject = _classical(cfg, body, p)
        c = subject.lambda_est + phi0
    reports = [reilly_identity(subject, cfg.k), reilly_inequality(subject, cfg.k, c=c)]
    extra = {"III": third_term_III(subject, cfg.k), "c": c}
    standard = f.spec == f"const:{float(math.comb(cfg.n, cfg.k))!r}" and phi0 == 0.0
    if standard:
        reports.extend(nm_bridge_checks(subject, c=c, k=cfg.k))
    return {"reports": reports, **extra}


def cmd_suite(cfg: RunConfig) -> tuple[dict, bool]:
    from .acceptance import run_all

    results = run_all(cfg.criteria or None)
    for r in results:
        print(r.line(), flush=True)
    passed = all(r.passed for r in results)
    print(f"{sum(r.passed for r in results)}/{len(results)} criteria passed")
    return {"criteria": [{k: v for k, v in r.to_dict().items() if k != "seconds"} for r in results]}, passed


# -- output ------------------------------------------------------------------------
def _csv_lines(cfg: RunConfig, payload: dict) -> str:
    head = "# config: " + json.dumps(cfg.to_dict(), sort_keys=True) + "\n"
    if "reports" in payload:
        rows = []
        for rep in payload["reports"]:
            row = rep.to_dict()
            row.update(body=cfg.body, k=cfg.k)
            rows.append(row)
        return head + reports_to_csv(rows)
    if "plot" in payload:
        return head + plot_table(payload["plot"])
    if "criteria" in payload:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["number", "title", "passed", "detail"])
        for c in payload["criteria"]:
            w.writerow([c["number"], c["title"], c["passed"], c["detail"]])
        return head + buf.getvalue()
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["key", "value"])
    for key, val in sorted(_flatten(payload).items()):
        w.writerow([key, format(val, ".17g") if isinstance(val, float) else val])
    return head + buf.getvalue()


def _flatten(obj, prefix=""):
    out = {}
    if isinstance(obj, dict):
        for k, v in obj.items():
            out.update(_flatten(v, f"{prefix}{k}."))
    elif isinstance(obj, (list, tuple, np.ndarray)):
        for i, v in enumerate(obj):
            out.update(_flatten(v, f"{prefix}{i}."))
    else:
        out[prefix.rstrip(".")] = obj
    return out


def plot_table(trace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["eps", "lambda_eps", "grad_sup"])
    for s in trace:
        w.writerow([format(float(s[c]), ".17g") for c in ("eps", "lambda_eps", "grad_sup")])
    return buf.getvalue()


def _write(cfg: RunConfig, payload: dict) -> None:
    text = dumps({"config": cfg.to_dict(), **payload}) if cfg.format == "json" else _csv_lines(cfg, payload)
    if cfg.output is None:
        if cfg.command != "suite" or cfg.format == "csv":
            sys.stdout.write(text)
        return
    Path(cfg.output).write_text(text)
    if cfg.command == "sweep-eps" and "plot" in payload:
        plot = Path(cfg.output).with_suffix(".plot.csv")
        plot.write_text("# config: " + json.dumps(cfg.to_dict(), sort_keys=True) + "\n" + plot_table(payload["plot"]))


HANDLERS = {"solve": cmd_solve, "sweep-eps": cmd_sweep, "verify-af": cmd_verify_af, "verify-reilly": cmd_verify_reilly}


def run(cfg: RunConfig) -> int:
    try:
        if cfg.command != "suite":
            make_body(cfg.body, cfg.n)
        if cfg.command == "suite":
            payload, ok = cmd_suite(cfg)
            _write(cfg, payload)
            return 0 if ok else 1
        payload = HANDLERS[cfg.command](cfg)
    except UsageError as exc:
        print(f"khessian: usage error: {exc}", file=sys.stderr)
        return 2
    except (KHessianError, ArithmeticError, np.linalg.LinAlgError) as exc:
        error = {"type": type(exc).__name__, "message": str(exc)}
        trace = getattr(exc, "trace", None)
        if trace:
            error["trace"] = trace
        if getattr(exc, "condition", None) is not None:
            error["condition"] = exc.condition
        _write(cfg, {"error": error})
        print(f"khessian: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    _write(cfg, payload)
    return 0


def main(argv=None) -> int:
    try:
        cfg = parse_config(sys.argv[1:] if argv is None else argv)
    except UsageError as exc:
        print(f"khessian: usage error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # argparse reports its own usage errors
        return int(exc.code or 0)
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
