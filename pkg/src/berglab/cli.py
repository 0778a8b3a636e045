"""Command line experiment runner: ``berglab <command> [options]``.

Every command writes CSV (one ``#`` provenance line, then a header row) to
``--out`` or stdout.  Exit codes: 0 success, 2 invalid configuration,
3 numerical degeneracy, 4 a ``--check`` threshold failed.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__
from . import closed_forms as cf
from . import domains as D
from . import geometry as geo
from . import kernel as ker
from . import normalization as nrm
from . import rescaling as rs
from .errors import (BerglabError, ConfigError, DegeneratePolyhedronError, DimensionError,
                     EmptyDomainError, ExtrapolationWarning, NumericDegeneracy, PoleError, StepTooLargeError)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CHECK = 0, 2, 3, 4

# thresholds used by --check
CHECK = {
    "headline_rel_err": 0.06,
    "invariants_spread": 0.03,
    "ramadanov_dilation": 0.02,
    "localization_final": 0.1,
}


class CheckFailed(Exception):
    pass


@dataclass
class ExperimentConfig:
    command: str
    n: int = 2
    m: int = 2
    delta: list[float] = field(default_factory=list)
    degree: int | None = None
    samples: int | None = None
    seed: int = 0
    out: str | None = None
    check: bool = False
    plot_script: str | None = None
    extra: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.n < 1 or self.m < 1:
            raise ConfigError("n and m must be positive")
        if self.degree is not None and self.degree < 0:
            raise ConfigError("degree must be non-negative")
        if self.samples is not None and self.samples <= 0:
            raise ConfigError("samples must be positive")
        for d in self.delta:
            if not 0 < d < 1:
                raise ConfigError(f"delta values must lie in (0, 1): {d}")


# --------------------------------------------------------------------------
# output helpers

def provenance_line(cfg: ExperimentConfig, **more) -> str:
    items = {"berglab": __version__, "command": cfg.command, "seed": cfg.seed,
             "samples": cfg.samples, "degree": cfg.degree}
    items.update(more)
    return "# " + " ".join(f"{k}={v}" for k, v in items.items() if v is not None)


def render_csv(cfg: ExperimentConfig, header: Sequence[str], rows: Sequence[Sequence[Any]],
               **more) -> str:
    buf = io.StringIO()
    buf.write(provenance_line(cfg, **more) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    return buf.getvalue()


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return f"{x:.12g}"
    return str(x)


def emit(cfg: ExperimentConfig, text: str, header: Sequence[str] = (), xcol: int = 1,
         ycols: Sequence[int] = ()) -> None:
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if cfg.plot_script and ycols:
        data = cfg.out or "data.csv"
        lines = ["set datafile separator ','", "set datafile commentschars '#'",
                 "set key autotitle columnhead", f"set xlabel '{header[xcol - 1]}'"]
        plots = [f"'{data}' using {xcol}:{c} with linespoints" for c in ycols]
        lines.append("plot " + ", \\\n     ".join(plots))
        with open(cfg.plot_script, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")


def _require(ok: bool, msg: str) -> None:
    if not ok:
        raise CheckFailed(msg)


# --------------------------------------------------------------------------
# commands

def cmd_constants(cfg: ExperimentConfig) -> None:
    n_max = int(cfg.extra.get("n_max", 500))
    pairs = int(cfg.extra.get("pairs_n_max", min(100, n_max)))
    table_n = int(cfg.extra.get("table_n", 8))
    rep = cf.lemma52_verify(n_max, pairs)
    rows = [[r["n"], r["m"], r["j_ball"], r["j_product"], r["equal"],
             r["j_ball_float"], r["j_product_float"]] for r in cf.constants_table(table_n)]
    header = ["n", "m", "j_ball", "j_product", "equal", "j_ball_float", "j_product_float"]
    text = render_csv(cfg, header, rows, n_max=n_max, monotone=rep.monotone,
                      distinct=rep.distinct, pairs_checked=rep.pairs_checked)
    emit(cfg, text)
    # exact checks always decide the exit status of this command
    _require(rep.ok, f"exact checks failed: {rep}")


def _domain_by_name(name: str, n: int, m: int) -> D.DomainSpec:
    if name == "ball":
        return D.ball(n)
    if name == "polydisk":
        return D.polydisk(n)
    if name == "product":
        return D.product_domain(n, m)
    if name == "ellipsoid":
        return D.ellipsoid([1.0] + [2.0] * (n - 1))
    if name == "thullen":
        return D.thullen(2.0)
    if name == "dumbbell":
        return D.dumbbell_hartogs()
    raise ConfigError(f"unknown domain {name!r}")


def _parse_points(text: str, n: int) -> list[np.ndarray]:
    pts = []
    for chunk in text.split(";"):
        vals = [complex(v.strip().replace(" ", "")) for v in chunk.split(",")]
        if len(vals) != n:
            raise DimensionError(f"point {chunk!r} does not have {n} coordinates")
        pts.append(np.array(vals))
    return pts


def cmd_invariants(cfg: ExperimentConfig) -> None:
    name = cfg.extra.get("domain", "ball")
    spec = _domain_by_name(name, cfg.n, cfg.m)
    n = spec.dim
    if cfg.extra.get("points"):
        pts = _parse_points(cfg.extra["points"], n)
    else:
        pts = [np.array([t] + [0.0] * (n - 1), complex) for t in np.linspace(0, 0.4, 5)]
    u = cfg.extra.get("u")
    u = _parse_points(u, n)[0] if u else np.eye(n)[0]
    how = cfg.extra.get("ricci", "stencil")
    outside = [p for p in pts if not spec.contains(p[None, :])[0]]
    if outside:
        raise ConfigError(f"points outside {spec.name}: {outside}")
    closed = bool(cfg.extra.get("closed_form")) and spec.closed_form is not None
    if closed:
        model = spec.closed_form
        prov = {"method": "closed-form"}
        if how == "extremal":
            raise ConfigError("the extremal Ricci route needs a numerical kernel")
    else:
        model = ker.build_kernel(spec, cfg.degree, cfg.samples or ker.DEFAULT_SAMPLES, cfg.seed,
                                 cfg.extra.get("method", "auto"))
        prov = model.provenance
    rows = geo.invariant_scan(model, pts, None if how == "none" else u, how)
    header = geo.csv_header(n)
    body = [r.as_list(prov) for r in rows]
    text = render_csv(cfg, header, body, domain=spec.name)
    emit(cfg, text, header, 1, [header.index("J") + 1])
    if cfg.check:
        J = np.array([r.sample.J for r in rows])
        spread = (J.max() - J.min()) / J.mean()
        _require(spread < CHECK["invariants_spread"], f"J spread {spread:.3g}")
        if spec.closed_form is not None:
            target = spec.closed_form.j_exact().float_value
            _require(abs(J[0] - target) / target < 0.03, f"J(0) {J[0]} vs {target}")


def cmd_sandwich(cfg: ExperimentConfig) -> None:
    deltas = cfg.delta or [0.3, 0.1, 0.03, 0.01, 0.003, 0.001]
    eps = float(cfg.extra.get("epsilon_hat", 0.1))
    samples = cfg.samples or 100_000
    reps = rs.sandwich_sweep(cfg.n, cfg.m, deltas, eps, samples, cfg.seed,
                             float(cfg.extra.get("eps0", 0.2)))
    header = ["delta", "epsilon_hat", "inner_violations", "outer_violations", "samples", "seed",
              "inner_count", "outer_count", "superset_violations"]
    rows = [[r.delta, r.epsilon_hat, r.inner_violations, r.outer_violations, r.samples, r.seed,
             r.inner_count, r.outer_count, r.superset_violations] for r in reps]
    emit(cfg, render_csv(cfg, header, rows, n=cfg.n, m=cfg.m), header, 1, [3, 4])
    if cfg.check:
        counts = [r.inner_violations + r.outer_violations for r in reps]
        _require(all(b <= a for a, b in zip(counts, counts[1:])), f"counts not monotone: {counts}")
        _require(reps[-1].ok, f"violations at delta={reps[-1].delta}: "
                              f"inner {reps[-1].inner_violations}, outer {reps[-1].outer_violations}")


@dataclass(frozen=True)
class HeadlineRow:
    delta: float | None
    K: float
    J: float
    origin_inside: bool = True


def headline_rows(n: int, m: int, deltas: Sequence[float], degree: int | None, samples: int,
                  seed: int) -> list[HeadlineRow]:
    out = []
    for d in deltas:
        spec = rs.rescaled_quadric(n, m, d).to_domain()
        inside = bool(spec.contains(np.zeros((1, n)))[0])
        model = ker.build_kernel(spec, degree, samples, seed)
        with warnings.catch_warnings():
            # pre-asymptotic deltas may put the origin outside the domain
            warnings.simplefilter("ignore", ExtrapolationWarning)
            s = geo.invariant_at(model, np.zeros(n))
        out.append(HeadlineRow(d, s.K, s.J, inside))
    return out


def cmd_headline(cfg: ExperimentConfig) -> None:
    n, m = cfg.n, cfg.m
    if not 2 <= m <= n:
        raise ConfigError(f"need 2 <= m <= n, got n={n}, m={m}")
    deltas = cfg.delta or [0.3, 0.1, 0.03]
    samples = cfg.samples or ker.DEFAULT_SAMPLES
    tp = cf.j_product(n, m).float_value
    tb = cf.j_ball(n).float_value
    rows = headline_rows(n, m, deltas, cfg.degree, samples, cfg.seed)
    prod = ker.build_kernel(D.product_domain(n, m), cfg.degree)
    ps = geo.invariant_at(prod, np.zeros(n))
    header = ["delta", "K0", "J0", "j_product", "j_ball", "rel_err_product", "rel_err_ball",
              "origin_inside"]
    body = [[r.delta, r.K, r.J, tp, tb, abs(r.J - tp) / tp, abs(r.J - tb) / tb, r.origin_inside]
            for r in rows]
    body.append(["product-model", ps.K, ps.J, tp, tb, abs(ps.J - tp) / tp, abs(ps.J - tb) / tb,
                 True])
    emit(cfg, render_csv(cfg, header, body, n=n, m=m), header, 1, [3, 4, 5])
    if cfg.check:
        last = rows[-1].J
        _require(abs(last - tp) / tp < CHECK["headline_rel_err"], f"final J {last} vs {tp}")
        _require(abs(last - tp) < abs(last - tb), "final J not closer to the product constant")


def cmd_ramadanov(cfg: ExperimentConfig) -> None:
    mode = cfg.extra.get("mode", "dilation")
    samples = cfg.samples or ker.DEFAULT_SAMPLES
    if mode == "dilation":
        params = [float(s) for s in cfg.extra.get("s", [1, 2, 4, 8])]
        k0 = 2 / math.pi ** 2
        rows = rs.ramadanov_harness(lambda s: D.ball(2, 1 + 1 / s).as_generic(), params,
                                    np.zeros(2), lambda s: k0 * (1 + 1 / s) ** -4,
                                    cfg.degree or 6, samples, cfg.seed)
        limit = [k0] * len(rows)
    elif mode == "rescaled":
        params = cfg.delta or [0.3, 0.1, 0.03]
        n, m = cfg.n, cfg.m
        ref = cf.product_model(n, m).kernel(np.zeros(n))
        rows = rs.ramadanov_harness(lambda d: rs.rescaled_quadric(n, m, d).to_domain(), params,
                                    np.zeros(n), ref, cfg.degree, samples, cfg.seed)
        limit = [ref] * len(rows)
    else:
        raise ConfigError(f"unknown ramadanov mode {mode!r}")
    header = ["param", "K", "reference", "ratio", "deviation", "limit_ratio"]
    body = [[r.param, r.K, r.reference, r.ratio, r.deviation, r.K / L] for r, L in zip(rows, limit)]
    emit(cfg, render_csv(cfg, header, body, mode=mode), header, 1, [4])
    if cfg.check:
        if mode == "dilation":
            worst = max(r.deviation for r in rows)
            _require(worst < CHECK["ramadanov_dilation"], f"scaling law deviation {worst:.3g}")
        else:
            dev = [r.deviation for r in rows]
            _require(all(b < a for a, b in zip(dev, dev[1:])), f"deviations not decreasing: {dev}")


def localization_rows(ts: Sequence[float], degree: int | None, samples: int, seed: int):
    full = ker.build_kernel(D.dumbbell_hartogs(), degree, samples, seed)
    cut = ker.build_kernel(D.dumbbell_hartogs(cut=True), degree, samples, seed)
    out = []
    for t in ts:
        z = np.array([D.DUMBBELL_CENTER, t], complex)
        a, b = full.eval(z), cut.eval(z)
        out.append((t, a, b, a / b, abs(a / b - 1)))
    return out


def cmd_localization(cfg: ExperimentConfig) -> None:
    ts = [float(t) for t in cfg.extra.get("t", [0.5, 0.7, 0.8, 0.9])]
    rows = localization_rows(ts, cfg.degree, cfg.samples or ker.DEFAULT_SAMPLES, cfg.seed)
    header = ["t", "K_full", "K_cut", "ratio", "deviation"]
    emit(cfg, render_csv(cfg, header, rows, preset="dumbbell-hartogs"), header, 1, [5])
    if cfg.check:
        dev = [r[4] for r in rows]
        _require(all(b < a for a, b in zip(dev, dev[1:])), f"deviation not decreasing: {dev}")
        _require(dev[-1] < CHECK["localization_final"], f"final deviation {dev[-1]:.3g}")


def cmd_normalize(cfg: ExperimentConfig) -> None:
    src = cfg.extra.get("input")
    if src:
        try:
            with open(src, encoding="utf-8") as fh:
                raw = nrm.RawPolyhedron.from_json(fh.read())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read polyhedron: {exc}") from exc
    else:
        raw = nrm.random_raw(cfg.n, cfg.m, cfg.seed)
    res = nrm.normalize(raw)
    err = nrm.check_round_trip(res, seed=cfg.seed)
    doc = json.loads(res.to_json())
    doc["round_trip_error"] = err
    text = json.dumps(doc, indent=2) + "\n"
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


COMMANDS: dict[str, Callable[[ExperimentConfig], None]] = {
    "constants": cmd_constants,
    "invariants": cmd_invariants,
    "sandwich": cmd_sandwich,
    "headline": cmd_headline,
    "ramadanov": cmd_ramadanov,
    "localization": cmd_localization,
    "normalize": cmd_normalize,
}

# command-specific keys accepted in --config files and on the command line
EXTRA_KEYS = {
    "constants": {"n_max", "pairs_n_max", "table_n"},
    "invariants": {"domain", "points", "u", "ricci", "closed_form", "method"},
    "sandwich": {"epsilon_hat", "eps0"},
    "headline": set(),
    "ramadanov": {"mode", "s"},
    "localization": {"t"},
    "normalize": {"input"},
}
BASE_KEYS = {"n", "m", "delta", "degree", "samples", "seed", "out", "check", "plot_script"}


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="berglab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"berglab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON file with option values")
        sp.add_argument("--n", type=int)
        sp.add_argument("--m", type=int)
        sp.add_argument("--delta", type=_float_list, help="comma separated list")
        sp.add_argument("--degree", type=int)
        sp.add_argument("--samples", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out")
        sp.add_argument("--plot-script", dest="plot_script")
        sp.add_argument("--check", action="store_true", default=None)

    sp = sub.add_parser("constants", help="exact constants and the monotonicity lemma")
    common(sp)
    sp.add_argument("--n-max", dest="n_max", type=int)
    sp.add_argument("--pairs-n-max", dest="pairs_n_max", type=int)
    sp.add_argument("--table-n", dest="table_n", type=int)

    sp = sub.add_parser("invariants", help="J and Ricci scans")
    common(sp)
    sp.add_argument("--domain", choices=["ball", "polydisk", "product", "ellipsoid",
                                         "thullen", "dumbbell"])
    sp.add_argument("--points", help="points separated by ';', coordinates by ','")
    sp.add_argument("--u", help="direction, coordinates separated by ','")
    sp.add_argument("--ricci", choices=["stencil", "extremal", "none"])
    sp.add_argument("--closed-form", dest="closed_form", action="store_true", default=None)
    sp.add_argument("--method", choices=["auto", "qmc", "radial", "exact"])

    sp = sub.add_parser("sandwich", help="sandwich sweep over delta")
    common(sp)
    sp.add_argument("--epsilon-hat", dest="epsilon_hat", type=float)
    sp.add_argument("--eps0", type=float)

    sp = sub.add_parser("headline", help="J of the rescaled domains at the origin")
    common(sp)

    sp = sub.add_parser("ramadanov", help="kernel convergence under domain convergence")
    common(sp)
    sp.add_argument("--mode", choices=["dilation", "rescaled"])
    sp.add_argument("--s", type=_float_list)

    sp = sub.add_parser("localization", help="K ratio along a sequence tending to a peak point")
    common(sp)
    sp.add_argument("--t", type=_float_list)

    sp = sub.add_parser("normalize", help="normal form of a polyhedral 2-jet")
    common(sp)
    sp.add_argument("--input", help="RawPolyhedron JSON file")
    return p


def make_config(args: argparse.Namespace) -> ExperimentConfig:
    cmd = args.command
    allowed = BASE_KEYS | EXTRA_KEYS[cmd]
    values: dict[str, Any] = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        doc.pop("experiment", None)
        unknown = set(doc) - allowed
        if unknown:
            raise ConfigError(f"unknown config keys for {cmd}: {sorted(unknown)}")
        values.update(doc)
    for k, v in vars(args).items():
        if k in allowed and v is not None:
            values[k] = v
    base = {k: values.pop(k) for k in list(values) if k in BASE_KEYS}
    if "delta" in base and not isinstance(base["delta"], list):
        base["delta"] = [float(base["delta"])]
    try:
        cfg = ExperimentConfig(cmd, **base, extra=values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    cfg.validate()
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        cfg = make_config(args)
        COMMANDS[cfg.command](cfg)
    except CheckFailed as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except (ConfigError, DimensionError, DegeneratePolyhedronError, EmptyDomainError,
            PoleError, StepTooLargeError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericDegeneracy, BerglabError) as exc:
        print(f"numerical degeneracy: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
