"""Pipelines behind the CLI and the report document they produce.

A report is a plain dictionary-backed object so that it can be dumped as
JSON, read back, and re-run from its input echo.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Any, Sequence

from . import decomposition as dec
from . import krengel
from .documents import FiniteSystem, SourceSystem, parse_document
from .dynamics import ams_horizon, is_ams, orbit_constant, stationary_mean
from .measure import SignedMeasure, event_sup_deviation, members, radon_nikodym, tv_norm
from .numeric import close, format_scalar, fsum_exact
from . import sources as srcmod

DEFAULT_EPSILON = 1e-3
DEFAULT_SOURCE_DEPTH = 4
DEFAULT_VERIFY_SCHEDULE = tuple(2**k for k in range(11))
SOURCE_Q_TERMS = 64


def json_scalar(x):
    if isinstance(x, bool) or x is None:
        return x
    if isinstance(x, Rational):
        x = Fraction(x)
        return x.numerator if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
    if isinstance(x, float):
        return float(f"{x:.12g}")
    return x


def text_scalar(x) -> str:
    if x is None:
        return "-"
    if isinstance(x, bool):
        return "yes" if x else "no"
    if isinstance(x, (Rational, float)):
        return format_scalar(x)
    return str(x)


@dataclass
class ReportDocument:
    command: str
    input: dict
    numeric_mode: str
    options: dict = field(default_factory=dict)
    components: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    profiles: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c["pass"] for c in self.checks)

    def add_checks(self, checks: dec.CheckMap):
        for r in checks.values():
            self.add_check(r.name, r.passed, r.max_deviation)

    def add_check(self, name: str, passed: bool, deviation=0):
        if any(c["name"] == name for c in self.checks):
            raise KeyError(f"check {name!r} already in report")
        self.checks.append({"name": name, "pass": bool(passed), "max_deviation": json_scalar(deviation)})

    def check_outcomes(self) -> dict:
        return {c["name"]: c["pass"] for c in self.checks}

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "numeric_mode": self.numeric_mode,
            "options": self.options,
            "input": self.input,
            "summary": self.summary,
            "components": self.components,
            "checks": self.checks,
            "profiles": self.profiles,
            "status": "pass" if self.passed else "fail",
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "ReportDocument":
        return cls(
            d["command"], d["input"], d["numeric_mode"], d.get("options", {}),
            d.get("components", []), d.get("checks", []), d.get("profiles", {}), d.get("summary", {}),
        )

    @classmethod
    def from_json(cls, text: str) -> "ReportDocument":
        return cls.from_dict(json.loads(text))


# -- finite systems ---------------------------------------------------------


def _measure_json(m: SignedMeasure) -> list:
    return [json_scalar(w) for w in m.weights]


def decompose_system(sys_: FiniteSystem, schedule=krengel.DEFAULT_SCHEDULE) -> ReportDocument:
    p, t = sys_.p, sys_.t
    rep = ReportDocument("decompose", sys_.raw, sys_.mode, {"schedule": list(schedule)})
    result = dec.decompose(p, t, schedule)
    for c in result.components:
        rep.components.append(
            {
                "atom": sys_.space.labels(c.atom),
                "weight": json_scalar(c.weight),
                "conditional": _measure_json(c.p_omega),
                "stationary_mean": _measure_json(c.p_bar_omega),
                "dominating": _measure_json(c.q_omega),
                "ergodic": c.ergodic,
            }
        )
    rep.summary = {
        "points": list(sys_.space.points),
        "E": sys_.space.labels(result.E),
        "residual": sys_.space.labels(result.residual),
        "stationary_mean": _measure_json(stationary_mean(p, t)),
        "dominating": _measure_json(result.q),
    }
    rep.add_checks(result.checks)
    rep.add_checks(dec.verify_theorem1(result, p, t))
    rep.add_checks(dec.appendix_identity_suite(p, t, schedule))
    return rep


def verify_system(sys_: FiniteSystem, schedule: Sequence[int], eps: float) -> ReportDocument:
    p, t = sys_.p, sys_.t
    rep = ReportDocument("verify", sys_.raw, sys_.mode, {"schedule": list(schedule), "epsilon": eps})
    rows = dec.theorem4_profile(p, t, schedule, eps)
    l1_ok = all(close(r["l1_density_distance"], r["tv_distance"]) for r in rows)
    l1_dev = max(abs(r["l1_density_distance"] - r["tv_distance"]) for r in rows)
    sup_ok = all(close(r["tv_distance"], 2 * r["sup_deviation"]) for r in rows)
    sup_dev = max(abs(r["tv_distance"] - 2 * r["sup_deviation"]) for r in rows)
    rep.add_check("thm4_l1_equals_tv", l1_ok, l1_dev)
    rep.add_check("thm4_tv_equals_twice_sup", sup_ok, sup_dev)
    bound_ok, worst = dec.orbit_bound_check(p, t, schedule)
    rep.add_check("lemma2_orbit_bound", bound_ok, worst)
    horizon = ams_horizon(p, t, eps)
    rep.add_check("ams_within_horizon", is_ams(p, t, eps, horizon))
    profile = [(r["n"], r["sup_deviation"]) for r in rows]
    rep.summary = {
        "orbit_constant": json_scalar(orbit_constant(p, t)),
        "ams_horizon": horizon,
        "N_epsilon": dec.first_certified(profile, eps),
        "rate_note": "O(1/n) bound specific to finite deterministic systems",
    }
    rep.profiles["uniform_convergence"] = [
        {k: json_scalar(r[k]) for k in ("n", "sup_deviation", "l1_density_distance", "exceedance_mass")}
        for r in rows
    ]
    return rep


def trace_system(sys_: FiniteSystem, schedule: Sequence[int], eps: float) -> ReportDocument:
    p, t = sys_.p, sys_.t
    state = krengel.contraction_state(p, t)
    f1 = radon_nikodym(p, state.q)
    trace = krengel.krengel_average(f1, state, schedule)
    conv = krengel.classify_convergence(trace, state, eps)
    rep = ReportDocument("trace", sys_.raw, sys_.mode, {"schedule": list(schedule), "epsilon": eps})
    rows = []
    for n, avg, l1c, exd in zip(trace.schedule, trace.averages, conv.l1_on_C, conv.exceedance_on_D):
        for i, label in enumerate(sys_.space.points):
            rows.append(
                {
                    "n": n,
                    "point": label,
                    "value": json_scalar(avg.values[i]),
                    "part": "C" if state.hopf_C >> i & 1 else "D",
                    "null": state.q.weights[i] == 0,
                    "L1_dist_C": json_scalar(l1c),
                    "exceedance_mass_D": json_scalar(exd),
                }
            )
    rep.profiles["trace"] = rows
    rep.summary = {
        "dominating": _measure_json(state.q),
        "hopf_C": sys_.space.labels(state.hopf_C),
        "hopf_D": sys_.space.labels(state.hopf_D),
        "limit": [json_scalar(v) for v in trace.limit.values],
        "stochastic_certificates": {str(k): v for k, v in conv.certificates.items()},
    }
    f_bar = radon_nikodym(stationary_mean(p, t), state.q)
    rep.add_check("limit_equals_stationary_density", trace.limit.isclose(f_bar))
    rep.add_check("liminf_identity", krengel.liminf_identity_check(trace, state))
    ok, _ = krengel.u_power_identity(p, state, 64)
    rep.add_check("u_power_identity", ok)
    rep.add_check("l1_on_C_nonincreasing", conv.l1_decreasing)
    return rep


# -- sources ----------------------------------------------------------------


def _class_json(src: srcmod.MarkovSource, c: srcmod.RecurrentClass) -> dict:
    return {
        "class": [src.states[s] for s in c.states],
        "weight": json_scalar(c.weight),
        "stationary": [json_scalar(v) for v in c.stationary],
        "entropy_rate": json_scalar(c.entropy_rate),
        "ergodic": True,
    }


def decompose_source(sys_: SourceSystem, depth: int, budget: int) -> ReportDocument:
    src = sys_.source
    if len(src.alphabet) ** depth > budget:
        raise srcmod.BudgetError(depth, len(src.alphabet), budget)
    d = srcmod.recurrent_classes(src)
    mean = srcmod.stationary_mean_source(src, d)
    rep = ReportDocument("decompose", sys_.raw, sys_.mode, {"max_depth": depth, "budget": budget})
    rep.components = [_class_json(src, c) for c in d.classes]
    rep.summary = {
        "transient": [src.states[s] for s in d.transient],
        "stationary_mean_initial": [json_scalar(v) for v in mean.initial],
    }
    w = fsum_exact(d.weights)
    rep.add_check("weights_sum_to_one", close(w, 1), abs(w - 1))
    worst, ok = 0, True
    for c in d.classes:
        for j_pos, j in enumerate(c.states):
            lhs = fsum_exact(c.stationary[k] * src.transition[s][j] for k, s in enumerate(c.states))
            worst = max(worst, abs(lhs - c.stationary[j_pos]))
            ok &= close(lhs, c.stationary[j_pos])
    rep.add_check("class_stationary", ok, worst)
    gaps = [srcmod.marginal_consistency(src, L, budget) for L in range(1, depth)] or [0]
    rep.add_check("marginal_consistency", all(close(g, 0) for g in gaps), max(gaps))
    L8 = min(depth, 8)
    g = srcmod.shift_stationarity_gap(mean, L8, budget=budget)
    rep.add_check("mean_shift_stationary", close(g, 0), g)
    gm = max(srcmod.mixture_marginal_gap(src, L, d, budget) for L in range(1, depth + 1))
    rep.add_check("thm1b_mean_mixture", close(gm, 0), gm)
    if not d.transient:
        worst = 0
        for L in range(1, depth + 1):
            orig = srcmod.marginal(src, L, budget)
            mix: dict = {}
            for c in d.classes:
                if close(c.weight, 0):
                    continue
                for s, pr in srcmod.marginal(srcmod.conditioned_source(src, c), L, budget).dist.items():
                    mix[s] = mix.get(s, 0) + c.weight * pr
            keys = set(mix) | set(orig.dist)
            worst = max([worst] + [abs(mix.get(k, 0) - orig.prob(k)) for k in keys])
        rep.add_check("thm1b_source_mixture", close(worst, 0), worst)
    return rep


def _source_dominating(src: srcmod.MarkovSource, L: int, budget: int, n_terms: int = SOURCE_Q_TERMS):
    """Depth-``L`` dominating measure; the series is truncated with error ``2^-n_terms``."""
    mean = srcmod.marginal(srcmod.stationary_mean_source(src), L, budget).dist
    q: dict = {k: v / 2 for k, v in mean.items()}
    P = src.matrix()
    v = src.initial_vector()
    for n in range(n_terms):
        coef = Fraction(1, 2 ** (n + 2)) if src.exact else 2.0 ** -(n + 2)
        for k, pr in srcmod.marginal(src, L, budget, start=v).dist.items():
            q[k] = q.get(k, 0) + coef * pr
        v = v.dot(P)
    return q, 2.0**-n_terms


def verify_source(sys_: SourceSystem, schedule: Sequence[int], eps: float, depth: int, budget: int) -> ReportDocument:
    src = sys_.source
    rep = ReportDocument("verify", sys_.raw, sys_.mode, {"schedule": list(schedule), "epsilon": eps, "max_depth": depth})
    mean = srcmod.marginal(srcmod.stationary_mean_source(src), depth, budget)
    q, qerr = _source_dominating(src, depth, budget)
    P = src.matrix()
    v = src.initial_vector()
    total = v * 0
    step = 0
    rows = []
    for n in sorted(schedule):
        while step < n:
            total = total + v
            v = v.dot(P)
            step += 1
        avg = total * Fraction(1, n) if src.exact else total / n
        pn = srcmod.marginal(src, depth, budget, start=avg)
        keys = set(pn.dist) | set(mean.dist)
        diffs = {k: pn.prob(k) - mean.prob(k) for k in keys}
        tv = fsum_exact(abs(x) for x in diffs.values())
        sup = max(fsum_exact([x for x in diffs.values() if x > 0] or [0]), fsum_exact([-x for x in diffs.values() if x < 0] or [0]))
        l1 = fsum_exact(abs(diffs[k] / q[k]) * q[k] for k in keys if q.get(k, 0) != 0)
        exceed = fsum_exact([q[k] for k in keys if q.get(k, 0) != 0 and abs(diffs[k] / q[k]) > eps] or [0])
        rows.append({"n": n, "sup_deviation": sup, "l1_density_distance": l1, "tv_distance": tv, "exceedance_mass": exceed})
    rep.add_check("thm4_l1_equals_tv", all(close(r["l1_density_distance"], r["tv_distance"]) for r in rows),
                  max(abs(r["l1_density_distance"] - r["tv_distance"]) for r in rows))
    rep.add_check("thm4_tv_equals_twice_sup", all(close(r["tv_distance"], 2 * r["sup_deviation"]) for r in rows),
                  max(abs(r["tv_distance"] - 2 * r["sup_deviation"]) for r in rows))
    K = srcmod.cesaro_constant(src)
    worst = max(float(r["n"] * r["sup_deviation"]) for r in rows)
    rep.add_check("lemma2_cesaro_bound", worst <= K + 1e-9, worst)
    profile = [(r["n"], r["sup_deviation"]) for r in rows]
    rep.summary = {
        "cesaro_constant": json_scalar(float(K)),
        "N_epsilon": dec.first_certified(profile, eps),
        "dominating_truncation_error": qerr,
    }
    rep.profiles["uniform_convergence"] = [
        {k: json_scalar(r[k]) for k in ("n", "sup_deviation", "l1_density_distance", "exceedance_mass")}
        for r in rows
    ]
    return rep


def entropy_source(sys_: SourceSystem, max_depth: int, budget: int, depth: int | None = None) -> ReportDocument:
    src = sys_.source
    k = len(src.alphabet)
    if k**max_depth > budget:
        raise srcmod.BudgetError(max_depth, k, budget)
    d = srcmod.recurrent_classes(src)
    hdepth = depth or max_depth
    rates = srcmod.entropy_rate(src, d, hdepth, budget)
    mean = srcmod.stationary_mean_source(src, d)
    rep = ReportDocument("entropy", sys_.raw, sys_.mode, {"max_depth": max_depth, "budget": budget})
    rep.components = []
    for c, r in zip(d.classes, rates.per_class):
        row = _class_json(src, c)
        if rates.is_bound:
            row["entropy_rate"] = None
            row["entropy_lower"], row["entropy_upper"] = json_scalar(r[0]), json_scalar(r[1])
        else:
            row["entropy_rate"] = json_scalar(r)
        rep.components.append(row)
    rep.summary = {"jacobs_average": json_scalar(rates.jacobs_average), "bits_per_symbol": True}
    if rates.is_bound:
        rep.summary["jacobs_bounds"] = [json_scalar(rates.bounds[0]), json_scalar(rates.bounds[1])]
        rep.summary["bound_depth"] = rates.depth
    rows = []
    prev = 0.0
    for L in range(1, max_depth + 1):
        h = srcmod.block_entropy(mean, L, budget)
        row = {"L": L, "H_L": json_scalar(h), "H_L_over_L": json_scalar(h / L), "conditional": json_scalar(h - prev)}
        if rates.is_bound:
            lo = math.fsum(float(c.weight) * srcmod.hidden_entropy_bounds(srcmod.class_source(src, c), L, budget)[0] for c in d.classes)
            hi = math.fsum(float(c.weight) * srcmod.hidden_entropy_bounds(srcmod.class_source(src, c), L, budget)[1] for c in d.classes)
            row["lower_bound"], row["upper_bound"] = json_scalar(lo), json_scalar(hi)
        rows.append(row)
        prev = h
    rep.profiles["block_entropy"] = rows
    hl = [float(r["H_L_over_L"]) for r in rows]
    rep.add_check("block_entropy_nonincreasing", all(b <= a + 1e-9 for a, b in zip(hl, hl[1:])))
    floor = rates.bounds[0] if rates.is_bound else rates.jacobs_average
    rep.add_check("block_entropy_above_rate", all(h >= floor - 1e-9 for h in hl), min(h - floor for h in hl))
    if rates.is_bound:
        rep.add_check("bounds_ordered", rates.bounds[0] <= rates.bounds[1] + 1e-12, rates.bounds[1] - rates.bounds[0])
    return rep


# -- dispatch ---------------------------------------------------------------


def run(command: str, system, options: dict) -> ReportDocument:
    """Run ``command`` on a parsed document with resolved options."""
    schedule = options.get("schedule")
    eps = options.get("epsilon", DEFAULT_EPSILON)
    if isinstance(system, FiniteSystem):
        if command == "decompose":
            return decompose_system(system, schedule or krengel.DEFAULT_SCHEDULE)
        if command == "verify":
            return verify_system(system, schedule or DEFAULT_VERIFY_SCHEDULE, eps)
        if command == "trace":
            return trace_system(system, schedule or krengel.DEFAULT_SCHEDULE, eps)
        raise ValueError(f"{command} needs a source document")
    budget = options["budget"]
    depth = options.get("max_depth", DEFAULT_SOURCE_DEPTH)
    if command == "decompose":
        return decompose_source(system, depth, budget)
    if command == "verify":
        return verify_source(system, schedule or DEFAULT_VERIFY_SCHEDULE, eps, depth, budget)
    if command == "entropy":
        return entropy_source(system, depth, budget)
    raise ValueError(f"{command} needs a finite-system document")


def rerun(report: ReportDocument) -> ReportDocument:
    """Recompute a report from its input echo and recorded options."""
    system = parse_document(report.input, report.numeric_mode)
    opts = dict(report.options)
    if isinstance(system, SourceSystem):
        opts.setdefault("budget", srcmod.DEFAULT_BUDGET)
    return run(report.command, system, opts)


# -- rendering --------------------------------------------------------------


def _table(rows: list[dict], columns: Sequence[str] | None = None) -> str:
    if not rows:
        return "(empty)\n"
    columns = list(columns or rows[0].keys())
    cells = [[text_scalar(_unjson(r.get(c))) for c in columns] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(columns)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(columns, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(lines) + "\n"


def _unjson(v):
    if isinstance(v, list):
        return "(" + ", ".join(text_scalar(_unjson(x)) for x in v) + ")"
    if isinstance(v, dict):
        return ", ".join(f"{k}={text_scalar(_unjson(x))}" for k, x in v.items())
    return v


def render_table(rep: ReportDocument) -> str:
    out = io.StringIO()
    out.write(f"# {rep.command} ({rep.numeric_mode})\n")
    if rep.summary:
        out.write("\n")
        for k, v in rep.summary.items():
            out.write(f"{k}: {text_scalar(_unjson(v))}\n")
    if rep.components:
        out.write("\ncomponents\n")
        out.write(_table(rep.components))
    for name, rows in rep.profiles.items():
        out.write(f"\n{name}\n")
        out.write(_table(rows))
    out.write("\nchecks\n")
    out.write(_table(rep.checks, ["name", "pass", "max_deviation"]))
    out.write(f"\nstatus: {'pass' if rep.passed else 'fail'}\n")
    return out.getvalue()


def render_csv(rows: list[dict], columns: Sequence[str] | None = None) -> str:
    if not rows:
        return ""
    columns = list(columns or rows[0].keys())
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([text_scalar(_unjson(r.get(c))) for c in columns])
    return buf.getvalue()


def primary_rows(rep: ReportDocument) -> list[dict]:
    """Rows that the CSV format emits for a report."""
    if rep.command == "trace":
        return rep.profiles["trace"]
    if rep.command == "verify":
        return rep.profiles["uniform_convergence"]
    if rep.command == "entropy":
        return rep.profiles["block_entropy"]
    return rep.components
