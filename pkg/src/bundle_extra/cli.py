"""Command-line driver for trajectory runs and step-size sweeps.

Configuration is a flat ``key = value`` text file; ``#`` starts a comment.
Recognized keys (defaults in brackets):

    n [20]              number of agents
    d [100]             dimension of the decision variable
    eta [6]             rows of each agent's least-squares block
    edges [32]          edges of the random connected graph
    seed [0]            seeds the graph, the data and a random x0
    weights [metropolis]  metropolis | laplacian
    tau                 Laplacian weight, required for ``weights = laplacian``
    alpha [theorem]     step size, or ``theorem`` for lambda_min(Wt) / L
    alphas              comma-separated step sizes for ``sweep``
    arms [extra]        comma-separated arms, see below
    iters [1000]        iterations per arm for ``run`` (0 allowed)
    budget [20000]      iteration budget per sweep point
    tol [1e-6]          rel_error threshold that counts as converged
    x0 [zeros]          zeros | random
    inner_tol [1e-10]   duality-gap tolerance of the proximal solves
    max_inner_iters [10000]
    threads [1]

An arm is ``extra`` or ``bundle_extra:<model>[:<m>]`` with ``<model>`` one
of the bundle model kinds and ``<m>`` the cutting-plane window (default 0).
Appending ``@<alpha>`` pins the step size of that arm in ``run``.

``run`` writes ``<arm>.csv`` per arm; ``sweep`` writes ``sweep.csv``. Both
leave ``config_snapshot.txt`` next to them: a re-runnable config whose
comment header carries the problem fingerprint and a timestamp.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import math
import sys
import warnings
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .algorithms import Algorithm, RunConfig, RunResult, run
from .bundle import ModelKind
from .graph import random_connected_graph
from .mixing import laplacian_weights, make_pair, metropolis_weights
from .problem import least_squares_instance

TRAJECTORY_COLUMNS = (
    "k",
    "consensus_residual",
    "grad_residual",
    "rel_error",
    "cumulative_kkt_sum",
    "inner_iters_total",
)
SWEEP_COLUMNS = ("arm", "alpha", "final_rel_error", "iters_to_tol", "diverged")
NOT_REACHED = "not reached"


class ConfigError(ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class Arm:
    algorithm: Algorithm
    model: ModelKind = ModelKind.SINGLE_CUT
    window: int = 0
    alpha: float | None = None

    @property
    def name(self) -> str:
        if self.algorithm == Algorithm.EXTRA:
            return "extra"
        return f"bundle_extra-{self.model.value}-m{self.window}"

    def spec(self) -> str:
        s = "extra" if self.algorithm == Algorithm.EXTRA else f"bundle_extra:{self.model.value}:{self.window}"
        return s if self.alpha is None else f"{s}@{self.alpha!r}"


def parse_arm(text: str) -> Arm:
    text = text.strip()
    alpha = None
    if "@" in text:
        text, a = text.split("@", 1)
        alpha = _positive_float("arms", a)
    parts = text.split(":")
    try:
        algo = Algorithm(parts[0])
    except ValueError:
        raise ConfigError("arms", f"unknown algorithm {parts[0]!r}") from None
    if algo == Algorithm.EXTRA:
        if len(parts) > 1:
            raise ConfigError("arms", "extra takes no model")
        return Arm(algo, alpha=alpha)
    if len(parts) < 2 or len(parts) > 3:
        raise ConfigError("arms", f"expected bundle_extra:<model>[:<m>], got {text!r}")
    try:
        model = ModelKind(parts[1])
    except ValueError:
        raise ConfigError("arms", f"unknown model {parts[1]!r}") from None
    window = _int("arms", parts[2], lo=0) if len(parts) == 3 else 0
    return Arm(algo, model, window, alpha)


def _int(name, text, lo=None) -> int:
    try:
        v = int(str(text).strip())
    except ValueError:
        raise ConfigError(name, f"expected an integer, got {text!r}") from None
    if lo is not None and v < lo:
        raise ConfigError(name, f"must be >= {lo}, got {v}")
    return v


def _positive_float(name, text) -> float:
    try:
        v = float(str(text).strip())
    except ValueError:
        raise ConfigError(name, f"expected a number, got {text!r}") from None
    if not (math.isfinite(v) and v > 0):
        raise ConfigError(name, f"must be a positive finite number, got {text!r}")
    return v


@dataclass
class ExperimentSpec:
    n: int = 20
    d: int = 100
    eta: int = 6
    edges: int = 32
    seed: int = 0
    weights: str = "metropolis"
    tau: float | None = None
    alpha: float | str = "theorem"
    alphas: list = field(default_factory=list)
    arms: list = field(default_factory=lambda: [Arm(Algorithm.EXTRA)])
    iters: int = 1000
    budget: int = 20000
    tol: float = 1e-6
    x0: str = "zeros"
    inner_tol: float = 1e-10
    max_inner_iters: int = 10000
    threads: int = 1

    def validate(self) -> ExperimentSpec:
        for name in ("n", "d", "eta", "max_inner_iters", "threads"):
            _int(name, getattr(self, name), lo=1)
        _int("edges", self.edges, lo=0)
        _int("iters", self.iters, lo=0)
        _int("budget", self.budget, lo=0)
        lo, hi = self.n - 1, self.n * (self.n - 1) // 2
        if not lo <= self.edges <= hi:
            raise ConfigError("edges", f"a connected graph on {self.n} nodes needs {lo}..{hi} edges")
        if self.weights not in ("metropolis", "laplacian"):
            raise ConfigError("weights", f"expected metropolis or laplacian, got {self.weights!r}")
        if self.weights == "laplacian" and self.tau is None:
            raise ConfigError("tau", "required with laplacian weights")
        if self.alpha != "theorem":
            _positive_float("alpha", self.alpha)
        for a in self.alphas:
            _positive_float("alphas", a)
        if not self.arms:
            raise ConfigError("arms", "at least one arm is required")
        _positive_float("tol", self.tol)
        _positive_float("inner_tol", self.inner_tol)
        if self.x0 not in ("zeros", "random"):
            raise ConfigError("x0", f"expected zeros or random, got {self.x0!r}")
        return self

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "arms":
                v = ", ".join(a.spec() for a in v)
            elif f.name == "alphas":
                if not v:
                    continue
                v = ", ".join(repr(float(a)) for a in v)
            elif v is None:
                continue
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


_CONVERTERS = {
    "n": _int,
    "d": _int,
    "eta": _int,
    "edges": _int,
    "seed": _int,
    "iters": _int,
    "budget": _int,
    "max_inner_iters": _int,
    "threads": _int,
    "tau": _positive_float,
    "tol": _positive_float,
    "inner_tol": _positive_float,
}


def parse_config(text: str) -> ExperimentSpec:
    """Build an :class:`ExperimentSpec` from ``key = value`` lines."""
    spec = ExperimentSpec()
    known = {f.name for f in fields(ExperimentSpec)}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected key = value, got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise ConfigError(key, "unknown key")
        if key in _CONVERTERS:
            value = _CONVERTERS[key](key, value)
        elif key == "alpha":
            value = "theorem" if value == "theorem" else _positive_float(key, value)
        elif key == "alphas":
            value = [_positive_float(key, a) for a in value.split(",") if a.strip()]
            if not value:
                raise ConfigError("alphas", "sweep list is empty")
        elif key == "arms":
            value = [parse_arm(a) for a in value.split(",") if a.strip()]
        setattr(spec, key, value)
    return spec.validate()


def load_config(path) -> ExperimentSpec:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text)


def build_instance(spec: ExperimentSpec):
    """Problem and mixing pair shared by every arm of ``spec``."""
    g = random_connected_graph(spec.n, spec.edges, spec.seed)
    if spec.weights == "metropolis":
        W = metropolis_weights(g)
    else:
        W = laplacian_weights(g, spec.tau)
    return least_squares_instance(spec.n, spec.d, spec.eta, spec.seed), make_pair(W, g)


def theorem_alpha(problem, pair) -> float:
    return pair.lambda_min_Wt / problem.L


def _run_arm(spec, problem, pair, arm: Arm, alpha, max_iters, stop_tol=None) -> RunResult:
    cfg = RunConfig(
        problem,
        pair,
        alpha,
        algorithm=arm.algorithm,
        model_kind=arm.model,
        window=arm.window,
        max_iters=max_iters,
        inner_tol=spec.inner_tol,
        max_inner_iters=spec.max_inner_iters,
        seed=spec.seed,
        x0=spec.x0,
        stop_tol=stop_tol,
        threads=spec.threads,
    )
    return run(cfg)


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_trajectory(result: RunResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORY_COLUMNS)
        for m in result.trajectory:
            w.writerow([_fmt(getattr(m, c)) for c in TRAJECTORY_COLUMNS])


def write_snapshot(spec: ExperimentSpec, out: Path, problem, extra: dict | None = None) -> Path:
    stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    head = [
        f"# created {stamp}",
        f"# problem fingerprint {problem.fingerprint()}",
        f"# convergence: rel_error <= tol within the iteration budget",
    ]
    for k, v in (extra or {}).items():
        head.append(f"# {k} {v}")
    path = out / "config_snapshot.txt"
    path.write_text("\n".join(head) + "\n" + spec.to_text())
    return path


def _prepare_out(out) -> Path:
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ConfigError("out", f"cannot write to {out}: {exc.strerror}") from None
    return out


def cmd_run(spec: ExperimentSpec, out) -> dict:
    """One trajectory CSV per arm; returns ``{arm name: RunResult}``."""
    out = _prepare_out(out)
    problem, pair = build_instance(spec)
    default_alpha = theorem_alpha(problem, pair) if spec.alpha == "theorem" else float(spec.alpha)
    results = {}
    for arm in spec.arms:
        if arm.name in results:
            raise ConfigError("arms", f"duplicate arm {arm.name}")
        alpha = default_alpha if arm.alpha is None else arm.alpha
        res = _run_arm(spec, problem, pair, arm, alpha, spec.iters)
        write_trajectory(res, out / f"{arm.name}.csv")
        results[arm.name] = res
    write_snapshot(spec, out, problem, {"resolved alpha": repr(default_alpha)})
    return results


def cmd_sweep(spec: ExperimentSpec, out) -> list[dict]:
    """Robustness table over ``spec.alphas`` for every arm.

    Each point stops once ``rel_error <= tol`` or after ``budget`` iterations.
    """
    if not spec.alphas:
        raise ConfigError("alphas", "sweep list is empty")
    out = _prepare_out(out)
    problem, pair = build_instance(spec)
    rows = []
    for arm in spec.arms:
        for alpha in spec.alphas:
            res = _run_arm(spec, problem, pair, arm, alpha, spec.budget, stop_tol=spec.tol)
            reached = res.iters_to_tol(spec.tol)
            rows.append(
                {
                    "arm": arm.name,
                    "alpha": float(alpha),
                    "final_rel_error": res.trajectory[-1].rel_error,
                    "iters_to_tol": NOT_REACHED if reached is None else reached,
                    "diverged": res.diverged,
                }
            )
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for row in rows:
            w.writerow(
                [
                    row["arm"],
                    _fmt(row["alpha"]),
                    _fmt(row["final_rel_error"]),
                    row["iters_to_tol"],
                    "true" if row["diverged"] else "false",
                ]
            )
    write_snapshot(spec, out, problem)
    return rows


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bundle-extra", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (("run", "write one trajectory CSV per arm"), ("sweep", "step-size robustness table")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", metavar="PATH", help="key = value config file (defaults if omitted)")
        p.add_argument("--out", metavar="DIR", required=True, help="output directory")
        p.add_argument("--seed", metavar="N", type=int, help="override the config seed")
        p.add_argument("--threads", metavar="N", type=int, help="override the config thread count")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = load_config(args.config) if args.config else ExperimentSpec()
        if args.seed is not None:
            spec.seed = args.seed
        if args.threads is not None:
            spec.threads = args.threads
        spec.validate()
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            if args.command == "run":
                cmd_run(spec, args.out)
            else:
                cmd_sweep(spec, args.out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
