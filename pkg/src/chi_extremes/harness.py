"""Config-driven experiments and the command line interface.

A config is a flat ``key = value`` text file (``#`` starts a comment); list
values are comma separated.  Command line flags and ``--set key=value``
overrides win over the file.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, fields
from typing import Sequence

import numpy as np
from scipy import stats

from . import asymptotics as asy
from .chi import ChiExperiment, simulate_field_sup, simulate_sup, tail_estimate
from .constants import (ConstantEstimate, ConstantSpec, adjudicate_P21, estimate_windowed, pickands_anchor,
                        pickands_limit, piterbarg_anchor, piterbarg_limit)
from .covmodels import NonstationaryModel, StationaryModel, TrendSpec, local_expansion_params, verify_expansion
from .errors import ConfigError, HypothesisError, MissingConstantError, SamplerError
from .samplers import SeedSpec, resolve_threads

CSV_HEADER = ("scenario", "u", "phat", "ci_lo", "ci_hi", "asymptotic", "ratio", "regime", "nsim", "walltime_ms")
KINDS = ("tail-vs-asymptotic", "constant-ladder", "expansion-check", "field-check")
STATIONARY = ("exp_power", "fgn", "lamperti")
NONSTATIONARY = ("fbm", "bifbm", "subfbm", "meanint_fbm")

EXIT_CONFIG = 2
EXIT_HYPOTHESIS = 3
EXIT_SAMPLER = 4


def _floats(text):
    if isinstance(text, (list, tuple)):
        return tuple(float(x) for x in text)
    return tuple(float(x) for x in str(text).split(",") if x.strip())


@dataclass
class ScenarioConfig:
    scenario: str
    model: str
    name: str = ""
    # model parameters
    alpha: float = 1.0
    d0: float = 1.0
    hurst: float = 0.25
    K: float = 1.0
    T: float = 1.0
    T1: float = 0.0
    # trend
    trend: str = "zero"
    c: float = 0.0
    beta: float = 1.0
    gT: float = 0.0
    c_tilde: float = 0.0
    beta_tilde: float = 1.0
    # tail experiment
    n: int = 2
    u: tuple = ()
    points_per_cluster: int = 8
    nsim: int = 100_000
    seed: int = 0
    confidence: float = 0.99
    threads: int | None = None
    block_size: int = 1024
    # constants: a number, "anchor", or "estimate"
    pickands_constant: str = "anchor"
    piterbarg_constant: str = "anchor"
    constant_nsim: int = 200_000
    # constant ladder
    family: str = "pickands"
    d: float = 1.0
    S: tuple = (0.5, 1.0, 2.0, 5.0, 10.0, 20.0)
    delta_fractions: tuple = (1 / 256, 1 / 1024)
    # expansion check
    scales: tuple = (1e-2, 1e-3, 1e-4)
    # field check
    alphas: tuple = (1.0,)
    ds: tuple = (1.0,)
    S1: float = 2.0
    S2: float = 2.0
    m_time: int = 32
    m_space: int = 32
    # output
    out: str = ""
    json: str = ""

    _PARSERS = {
        "n": int, "points_per_cluster": int, "nsim": int, "seed": int, "block_size": int, "constant_nsim": int,
        "m_time": int, "m_space": int, "threads": lambda v: None if v in (None, "", "none") else int(v),
        "u": _floats, "S": _floats, "delta_fractions": _floats, "scales": _floats, "alphas": _floats, "ds": _floats,
        "scenario": str, "model": str, "name": str, "trend": str, "family": str, "out": str, "json": str,
        "pickands_constant": str, "piterbarg_constant": str,
    }

    @classmethod
    def from_mapping(cls, values: dict):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        if "scenario" not in values or "model" not in values:
            raise ConfigError("config needs 'scenario' and 'model'")
        parsed = {}
        for k, v in values.items():
            try:
                parsed[k] = cls._PARSERS.get(k, float)(v)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {k}: {v!r}") from exc
        cfg = cls(**parsed)
        cfg.validate()
        return cfg

    def validate(self):
        if self.scenario not in KINDS:
            raise ConfigError(f"scenario must be one of {', '.join(KINDS)}")
        if self.scenario != "constant-ladder" and self.model not in STATIONARY + NONSTATIONARY + ("field",):
            raise ConfigError(f"unknown model {self.model!r}")
        if self.n < 1 or self.nsim < 1 or self.points_per_cluster < 1:
            raise ConfigError("n, nsim and points_per_cluster must be positive")
        if not 0 < self.confidence < 1:
            raise ConfigError("confidence must lie in (0, 1)")
        if self.trend not in ("zero", "g1", "g2"):
            raise ConfigError("trend must be zero, g1 or g2")
        if any(x <= 0 for x in self.u):
            raise ConfigError("u levels must be positive")
        if list(self.u) != sorted(self.u):
            raise ConfigError("u ladder must be increasing")

    @property
    def scenario_id(self):
        return self.name or f"{self.scenario}:{self.model}"


def read_config(path):
    """Parse a flat ``key = value`` file into a dict of strings."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, value = (x.strip() for x in line.split("=", 1))
            out[key] = value
    return out


# ---------------------------------------------------------------------------
# building blocks
# ---------------------------------------------------------------------------


def build_model(cfg: ScenarioConfig):
    m = cfg.model
    if m == "exp_power":
        return StationaryModel.exp_power(cfg.alpha, cfg.d0)
    if m == "fgn":
        return StationaryModel.fgn(cfg.alpha)
    if m == "lamperti":
        return StationaryModel.lamperti(cfg.alpha)
    if m == "fbm":
        return NonstationaryModel.fbm(cfg.alpha, cfg.T)
    if m == "bifbm":
        return NonstationaryModel.bifbm(cfg.K, cfg.hurst, cfg.T)
    if m == "subfbm":
        return NonstationaryModel.subfbm(cfg.hurst, cfg.T)
    if m == "meanint_fbm":
        return NonstationaryModel.meanint_fbm(cfg.hurst, cfg.T)
    raise ConfigError(f"model {m!r} has no process form")


def build_trend(cfg: ScenarioConfig):
    if cfg.trend == "g1":
        return TrendSpec.g1(cfg.c, cfg.beta)
    if cfg.trend == "g2":
        return TrendSpec.g2(cfg.gT, cfg.c_tilde, cfg.beta_tilde, cfg.T)
    return TrendSpec.zero()


def _constant_choice(text, estimate, summary, key):
    """A user number, ``anchor`` (None: the evaluator looks it up) or ``estimate``."""
    text = str(text).strip().lower()
    if text in ("", "anchor"):
        return None
    if text == "estimate":
        est = estimate()
        summary.setdefault("constants_estimated", {})[key] = {"value": est.value, "stderr": est.stderr,
                                                              "flags": list(est.flags)}
        return est
    try:
        return float(text)
    except ValueError as exc:
        raise ConfigError(f"constant must be a number, 'anchor' or 'estimate', got {text!r}") from exc


def asymptotic_for(cfg: ScenarioConfig, model, trend, summary=None):
    """A callable ``u -> AsymptoticEval`` matching the experiment, plus a description."""
    summary = {} if summary is None else summary
    cache = {}

    def H(alpha):
        if "H" not in cache:
            cache["H"] = _constant_choice(cfg.pickands_constant, lambda: pickands_limit(
                alpha, nsim=cfg.constant_nsim, seed=cfg.seed, threads=cfg.threads), summary, f"H_{alpha:g}")
        return cache["H"]

    def P(alpha, beta, d):
        if "P" not in cache:
            cache["P"] = _constant_choice(cfg.piterbarg_constant, lambda: piterbarg_limit(
                alpha, beta, d, nsim=cfg.constant_nsim, seed=cfg.seed, threads=cfg.threads), summary,
                f"P^{d:g}_{alpha:g},{beta:g}")
        return cache["P"]

    if isinstance(model, StationaryModel):
        a, D0 = model.alpha, model.d0
        if cfg.T1 == cfg.T:
            if trend.form != "zero":
                raise ConfigError("single-point experiments take no trend")
            return lambda u: asy._assemble(1.0, 0.0, u, asy._log_upsilon_marginal(cfg.n, u), cfg.n - 2, "marginal",
                                           {})
        if trend.form == "zero":
            h = H(a)
            return lambda u: asy.prop21_tail(cfg.T - cfg.T1, a, D0, cfg.n, u, h)
        if trend.form == "g1":
            if cfg.T1 != 0:
                raise ConfigError("a G1 trend needs the window to start at 0")
            regime = asy.thm21_regime(a, trend.beta)
            h = H(a) if regime == "alpha<2beta" else None
            p = P(a, a / 2, trend.c * D0 ** (-trend.beta / a)) if regime == "alpha=2beta" else None
            asy.thm21_tail(a, trend.beta, trend.c, cfg.n, 1.0, D0, 1.0, 1.0)  # hypothesis check up front
            return lambda u: asy.thm21_tail(a, trend.beta, trend.c, cfg.n, u, D0, h, p)
        raise ConfigError("stationary models take a zero or G1 trend")
    params = local_expansion_params(model)
    if not math.isclose(cfg.T, model.T):
        raise ConfigError("the window must end at the variance maximum T")
    regime = asy.thm22_regime(params.nu, params.mu)
    h = H(params.nu) if regime == "nu<mu" else None
    p = P(params.nu, params.nu, params.A / params.D) if regime == "nu=mu" else None
    if trend.form == "zero":
        return lambda u: asy.thm22_tail(params.nu, params.mu, params.A, params.D, cfg.n, u, h, p)
    if trend.form == "g2":
        asy.thm23_tail(params.nu, params.mu, params.A, params.D, cfg.n, 1.0, trend.gT, trend.beta_tilde, 1.0, 1.0)
        return lambda u: asy.thm23_tail(params.nu, params.mu, params.A, params.D, cfg.n, u, trend.gT,
                                        trend.beta_tilde, h, p)
    raise ConfigError("non-stationary models take a zero or G2 trend")


def default_u_ladder(evaluate, lo=1e-4, hi=1e-2, count=3):
    """Levels where the asymptotic prediction lies in ``[lo, hi]``."""
    grid = np.arange(1.0, 12.0001, 0.25)
    ok = [u for u in grid if lo <= evaluate(u).value <= hi]
    if len(ok) < count:
        return (3.0, 3.5, 4.0)
    idx = np.linspace(0, len(ok) - 1, count).round().astype(int)
    return tuple(float(ok[i]) for i in idx)


@dataclass
class RatioDiagnostic:
    label: str
    deviations: tuple
    levels: tuple
    skipped: tuple = ()
    reason: str = ""


def compare_ratio_trend(rows: Sequence[dict]) -> RatioDiagnostic:
    """PASS when ``|ratio - 1|`` is non-increasing over the levels with exceedances, SOFT-FAIL otherwise."""
    used, skipped = [], []
    for r in sorted(rows, key=lambda r: r["u"]):
        if r.get("ratio") is None or not r.get("phat"):
            skipped.append(r["u"])
        else:
            used.append(r)
    levels = tuple(r["u"] for r in used)
    dev = tuple(abs(r["ratio"] - 1) for r in used)
    if len(used) < 3:
        return RatioDiagnostic("SOFT-FAIL", dev, levels, tuple(skipped), "fewer than 3 levels with exceedances")
    tol = 1e-12
    ok = all(b <= a + tol for a, b in zip(dev, dev[1:]))
    return RatioDiagnostic("PASS" if ok else "SOFT-FAIL", dev, levels, tuple(skipped),
                           "" if ok else "|ratio - 1| increases somewhere along the ladder")


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


class RowWriter:
    """Writes CSV rows one at a time and flushes each, so partial results survive errors."""

    def __init__(self, path=None, stream=None):
        self.rows = []
        self._fh = None
        if path:
            self._fh = open(path, "w", newline="")
        elif stream is not None:
            self._fh = stream
        self._owns = bool(path)
        self._csv = csv.writer(self._fh, lineterminator="\n") if self._fh else None
        if self._csv:
            self._csv.writerow(CSV_HEADER)
            self._fh.flush()

    def write(self, row: dict):
        self.rows.append(row)
        if self._csv:
            self._csv.writerow([_fmt(row.get(k)) for k in CSV_HEADER])
            self._fh.flush()

    def close(self):
        if self._fh is not None and self._owns:
            self._fh.close()
        self._fh = None


def _row(scenario, u, phat=None, ci=(None, None), asymptotic=None, regime="", nsim=None, walltime_ms=None,
         with_ratio=True):
    ratio = phat / asymptotic if (with_ratio and phat is not None and asymptotic) else None
    return {"scenario": scenario, "u": float(u), "phat": phat, "ci_lo": ci[0], "ci_hi": ci[1],
            "asymptotic": asymptotic, "ratio": ratio, "regime": regime, "nsim": nsim, "walltime_ms": walltime_ms}


# ---------------------------------------------------------------------------
# scenarios
# ---------------------------------------------------------------------------


def run_tail(cfg: ScenarioConfig, writer: RowWriter, simulate=True, asymptotics=True):
    summary = {"scenario": cfg.scenario_id, "kind": "tail-vs-asymptotic"}
    model = build_model(cfg)
    trend = build_trend(cfg)
    if trend.experimental:
        summary["flags"] = ["EXPERIMENTAL_TREND"]
    evaluate = asymptotic_for(cfg, model, trend, summary) if asymptotics else None
    levels = cfg.u or (default_u_ladder(evaluate) if evaluate else (3.0, 3.5, 4.0))
    summary["u"] = list(levels)
    sups = None
    wall = None
    if simulate:
        exp = ChiExperiment(model, cfg.n, levels, cfg.T, cfg.T1, trend, cfg.nsim, cfg.seed, cfg.points_per_cluster,
                            confidence=cfg.confidence, block_size=cfg.block_size, threads=cfg.threads)
        grid = exp.resolved_grid()
        summary["grid"] = {"start": grid.start, "end": grid.end, "m": grid.m}
        t0 = time.perf_counter()
        sups = simulate_sup(model, cfg.n, grid, [trend], cfg.nsim, SeedSpec(cfg.seed, cfg.block_size),
                            cfg.threads)[0]
        wall = round((time.perf_counter() - t0) * 1000)
    for u in levels:
        a = evaluate(u) if evaluate else None
        if a is not None:
            summary["regime"] = a.regime
            summary["constants"] = a.constants
        if sups is not None:
            est = tail_estimate(sups, u, cfg.confidence)
            row = _row(cfg.scenario_id, u, est.phat, est.ci, a.value if a else None, a.regime if a else "",
                       cfg.nsim, wall)
        else:
            row = _row(cfg.scenario_id, u, asymptotic=a.value, regime=a.regime)
        writer.write(row)
    if simulate and asymptotics:
        diag = compare_ratio_trend(writer.rows)
        summary["ratio_trend"] = asdict(diag)
    return summary


def run_constant_ladder(cfg: ScenarioConfig, writer: RowWriter):
    summary = {"scenario": cfg.scenario_id, "kind": "constant-ladder", "family": cfg.family}
    z = stats.norm.ppf(0.5 + cfg.confidence / 2)
    anchor = None
    try:
        if cfg.family == "pickands":
            anchor = pickands_anchor(cfg.alpha)
        elif cfg.family == "piterbarg":
            anchor = piterbarg_anchor(cfg.alpha, cfg.beta, cfg.d)
    except MissingConstantError:
        pass
    t0 = time.perf_counter()

    def on_row(r):
        v = r["ratio"] if cfg.family == "pickands" else r["value"]
        se = r["stderr"] / r["S"] if cfg.family == "pickands" else r["stderr"]
        writer.write(_row(cfg.scenario_id, r["S"], v, (v - z * se, v + z * se), anchor,
                          f"ladder:delta={r['delta']:.6g}", cfg.nsim, round((time.perf_counter() - t0) * 1000)))

    if cfg.family == "pickands":
        est = pickands_limit(cfg.alpha, cfg.S, cfg.delta_fractions, cfg.nsim, cfg.seed, cfg.threads, on_row=on_row)
    elif cfg.family in ("piterbarg", "piterbarg_two_sided"):
        est = piterbarg_limit(cfg.alpha, cfg.beta, cfg.d, cfg.S, cfg.delta_fractions, cfg.nsim, cfg.seed,
                              cfg.threads, two_sided=cfg.family == "piterbarg_two_sided", on_row=on_row)
    else:
        raise ConfigError(f"unknown constant family {cfg.family!r}")
    label = "final" + ("".join(f":{f}" for f in est.flags))
    writer.write(_row(cfg.scenario_id, est.S, est.value, (est.value - z * est.stderr, est.value + z * est.stderr),
                      anchor, label, cfg.nsim, round((time.perf_counter() - t0) * 1000)))
    summary.update(value=est.value, stderr=est.stderr, flags=list(est.flags),
                   windows_used=list(est.diagnostics["windows_used"]), anchor=anchor)
    if cfg.family == "piterbarg" and math.isclose(cfg.alpha, 2) and math.isclose(cfg.beta, 1):
        summary["closed_form"] = adjudicate_P21(est, cfg.d)
    return summary


def run_expansion(cfg: ScenarioConfig, writer: RowWriter):
    model = build_model(cfg)
    if not isinstance(model, NonstationaryModel):
        raise ConfigError("expansion checks apply to non-stationary models")
    params = local_expansion_params(model)
    report = verify_expansion(model, params, cfg.scales)
    label = "expansion:" + ("PASS" if report.passed else "FAIL")
    # the scale goes in the u column, the std residual in phat and the correlation residual in asymptotic
    for h, rs, rc in zip(report.scales, report.sigma_residuals, report.corr_residuals):
        writer.write(_row(cfg.scenario_id, h, float(rs), asymptotic=float(rc), regime=label,
                          with_ratio=False))
    return {"scenario": cfg.scenario_id, "kind": "expansion-check", "params": params._asdict(),
            "passed": report.passed, "failures": list(report.failures)}


def field_constants(cfg: ScenarioConfig, u):
    """Windowed constants for the field check, on the grid steps the simulation uses."""
    w0 = cfg.d0 ** (1 / cfg.alpha) * cfg.S1
    d_eff = cfg.c * cfg.d0 ** (-cfg.beta / cfg.alpha)
    P = estimate_windowed(ConstantSpec("piterbarg", cfg.alpha, w0, w0 / (cfg.m_time - 1), cfg.constant_nsim,
                                       cfg.seed, cfg.beta, d_eff))
    Hs = []
    for a, d in zip(cfg.alphas, cfg.ds):
        w = d ** (1 / a) * cfg.S2
        Hs.append(estimate_windowed(ConstantSpec("pickands", a, w, w / (cfg.m_space - 1), cfg.constant_nsim,
                                                 cfg.seed)))
    return P, Hs


def run_field(cfg: ScenarioConfig, writer: RowWriter):
    summary = {"scenario": cfg.scenario_id, "kind": "field-check"}
    if len(cfg.alphas) != len(cfg.ds):
        raise ConfigError("alphas and ds must have the same length")
    if cfg.c <= 0:
        raise ConfigError("field check needs c > 0")
    levels = cfg.u or (4.0,)
    for u in levels:
        P, Hs = field_constants(cfg, u)
        a = asy.thm31_field_tail(cfg.alpha, cfg.beta, cfg.c, cfg.d0, cfg.alphas, cfg.ds, cfg.S1, cfg.S2, u, P, Hs)
        t0 = time.perf_counter()
        sups = simulate_field_sup(cfg.alpha, cfg.d0, cfg.alphas, cfg.ds, cfg.c, cfg.beta, u, cfg.S1, cfg.S2,
                                  cfg.nsim, SeedSpec(cfg.seed, cfg.block_size), cfg.m_time, cfg.m_space, cfg.threads)
        wall = round((time.perf_counter() - t0) * 1000)
        est = tail_estimate(sups, u, cfg.confidence)
        writer.write(_row(cfg.scenario_id, u, est.phat, est.ci, a.value, a.regime, cfg.nsim, wall))
        summary.setdefault("constants", []).append(a.constants)
    return summary


def run_scenario(cfg: ScenarioConfig, writer: RowWriter | None = None, mode="compare"):
    """Run one scenario; returns ``(rows, summary)``.

    ``mode`` selects what a tail scenario computes: ``compare`` (both sides),
    ``simulate`` (Monte Carlo only) or ``asymptotics`` (evaluators only).
    """
    writer = writer or RowWriter()
    if cfg.scenario == "tail-vs-asymptotic":
        summary = run_tail(cfg, writer, simulate=mode != "asymptotics", asymptotics=mode != "simulate")
    elif cfg.scenario == "constant-ladder":
        summary = run_constant_ladder(cfg, writer)
    elif cfg.scenario == "expansion-check":
        summary = run_expansion(cfg, writer)
    else:
        summary = run_field(cfg, writer)
    summary["seed"] = cfg.seed
    summary["nsim"] = cfg.nsim
    return writer.rows, summary


# ---------------------------------------------------------------------------
# command line
# ---------------------------------------------------------------------------

SUBCOMMANDS = {
    "simulate-tail": ("tail-vs-asymptotic", "simulate"),
    "eval-asymptotics": ("tail-vs-asymptotic", "asymptotics"),
    "compare": ("tail-vs-asymptotic", "compare"),
    "estimate-constant": ("constant-ladder", "compare"),
    "expansion-check": ("expansion-check", "compare"),
    "field-check": ("field-check", "compare"),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="chi-extremes", description="Chi-process extremes: simulation and checks.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--nsim", type=int)
        p.add_argument("--out", help="CSV output path (default: stdout)")
        p.add_argument("--threads", type=int)
        p.add_argument("--confidence", type=float)
        p.add_argument("--json", help="write a JSON summary here")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override any config key")
    return parser


def config_from_args(args):
    scenario, mode = SUBCOMMANDS[args.command]
    values = read_config(args.config) if args.config else {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        values[k.strip()] = v.strip()
    for key in ("seed", "nsim", "out", "threads", "confidence", "json"):
        v = getattr(args, key)
        if v is not None:
            values[key] = str(v)
    if values.get("scenario", scenario) != scenario:
        raise ConfigError(f"config scenario {values['scenario']!r} does not match '{args.command}'")
    values["scenario"] = scenario
    if scenario == "constant-ladder":
        values.setdefault("model", "fbm")
    elif scenario == "field-check":
        values.setdefault("model", "field")
    if "threads" not in values:
        values["threads"] = str(resolve_threads(None))
    return ScenarioConfig.from_mapping(values), mode


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, ConstantEstimate):
        return {"value": o.value, "stderr": o.stderr}
    return str(o)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    writer = None
    summary = {"command": args.command}
    code = 0
    try:
        cfg, mode = config_from_args(args)
        summary["config"] = {k: v for k, v in asdict(cfg).items()}
        writer = RowWriter(cfg.out or None, None if cfg.out else sys.stdout)
        _, result = run_scenario(cfg, writer, mode)
        summary.update(result)
        diag = result.get("ratio_trend")
        if diag:
            print(f"ratio trend: {diag['label']}", file=sys.stderr)
        if "closed_form" in result:
            print(f"P^d_(2,1) estimate supports the {result['closed_form']['supports']} closed form",
                  file=sys.stderr)
    except (ConfigError, MissingConstantError) as exc:
        code, summary["error"] = EXIT_CONFIG, str(exc)
    except HypothesisError as exc:
        code, summary["error"] = EXIT_HYPOTHESIS, str(exc)
    except SamplerError as exc:
        code, summary["error"] = EXIT_SAMPLER, str(exc)
    finally:
        if writer is not None:
            summary["rows"] = writer.rows
            writer.close()
    if "error" in summary:
        print(f"error: {summary['error']}", file=sys.stderr)
    json_path = args.json or summary.get("config", {}).get("json")
    if json_path:
        summary["exit_code"] = code
        with open(json_path, "w") as fh:
            json.dump(summary, fh, indent=2, default=_json_default)
    return code


if __name__ == "__main__":
    sys.exit(main())
