"""Files in and out: dataset CSVs, JSON reports, text tables, run configs.

Datasets travel as CSV with a small JSON sidecar (``<name>.meta.json``)
carrying the dataset-level metadata a CSV row cannot: kind, threshold,
objective alpha, outcome scale and group order.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .domain import (BERNOULLI, KINDS, OUTCOME_SCALES, Dataset, GroupId,
                     validate_dataset)
from .simulator import (BernoulliViewer, BetaQualification, Calibrated,
                        ClassificationAllocation, ConfigError,
                        DiscreteQualification, GroupShift, GroupSpec,
                        InvertedForGroup, NoisyCalibrated, PiecewiseLinear,
                        RankingAllocation, ScenarioConfig, ThreeLevelViewer,
                        ThresholdViewer, UniformQualification)

COLUMNS = ("record_id", "query_id", "group", "score", "treated", "outcome",
           "rank", "true_qualification")
REQUIRED = COLUMNS[:5]
FORMATS = ("json", "csv", "table")


class DataError(ValueError):
    """Malformed or invariant-violating input data."""


# -- datasets --------------------------------------------------------------


def sidecar_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".meta.json")


def _fmt(x: float) -> str:
    return "" if math.isnan(x) else repr(float(x))


def emit_dataset(d: Dataset, path: str | Path) -> None:
    path = Path(path)
    labels = d.labels
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for i in range(len(d)):
            w.writerow([
                d.record_id[i], d.query_id[i], labels[i], repr(float(d.score[i])),
                "1" if d.treated[i] else "0", _fmt(d.outcome[i]),
                str(int(d.rank[i])) if d.rank[i] > 0 else "",
                _fmt(d.true_qualification[i]),
            ])
    meta = {"kind": d.kind, "threshold": d.threshold, "objective_alpha": d.objective_alpha,
            "outcome_scale": d.outcome_scale, "groups": list(d.group_labels)}
    sidecar_path(path).write_text(json.dumps(meta, indent=2) + "\n")


_TRUE = {"1", "true", "t", "yes", "y"}
_FALSE = {"0", "false", "f", "no", "n"}


def ingest_dataset(path: str | Path, kind: str | None = None, *,
                   threshold: float | None = None, objective_alpha: float | None = None,
                   outcome_scale: str | None = None,
                   groups: list[str] | None = None) -> Dataset:
    """Parse a dataset CSV and validate it.

    Metadata comes from the sidecar when present; explicit arguments win.
    Every problem is reported as ``file:line: message``.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: no such file")
    meta: dict[str, Any] = {}
    side = sidecar_path(path)
    if side.is_file():
        try:
            meta = json.loads(side.read_text())
        except json.JSONDecodeError as exc:
            raise DataError(f"{side}: invalid JSON ({exc})") from None
    kind = kind or meta.get("kind")
    if kind not in KINDS:
        raise DataError(f"{path}: dataset kind must be one of {KINDS}, got {kind!r}")
    threshold = threshold if threshold is not None else meta.get("threshold")
    objective_alpha = objective_alpha if objective_alpha is not None else meta.get("objective_alpha")
    outcome_scale = outcome_scale or meta.get("outcome_scale") or BERNOULLI
    if outcome_scale not in OUTCOME_SCALES:
        raise DataError(f"{path}: outcome_scale must be one of {OUTCOME_SCALES}")

    cols: dict[str, list] = {c: [] for c in COLUMNS}
    line_of: dict[str, int] = {}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}:1: missing header row")
        header = [h.strip() for h in header]
        missing = [c for c in REQUIRED if c not in header]
        if missing:
            raise DataError(f"{path}:1: missing column(s) {missing}")
        unknown = [h for h in header if h not in COLUMNS]
        if unknown:
            raise DataError(f"{path}:1: unknown column(s) {unknown}")
        pos = {h: i for i, h in enumerate(header)}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")

            def get(c):
                return row[pos[c]].strip() if c in pos else ""

            def num(c, cast=float, optional=True):
                v = get(c)
                if v == "":
                    if optional:
                        return None
                    raise DataError(f"{path}:{lineno}: column {c} is empty")
                try:
                    return cast(v)
                except ValueError:
                    raise DataError(f"{path}:{lineno}: cannot parse {c}={v!r}") from None

            t = get("treated").lower()
            if t not in _TRUE | _FALSE:
                raise DataError(f"{path}:{lineno}: cannot parse treated={get('treated')!r}")
            rid = get("record_id")
            if rid in line_of:
                raise DataError(f"{path}:{lineno}: duplicate record_id {rid!r} "
                                f"(first on line {line_of[rid]})")
            line_of[rid] = lineno
            cols["record_id"].append(rid)
            cols["query_id"].append(get("query_id"))
            cols["group"].append(get("group"))
            cols["score"].append(num("score", optional=False))
            cols["treated"].append(t in _TRUE)
            cols["outcome"].append(num("outcome"))
            cols["rank"].append(num("rank", int))
            cols["true_qualification"].append(num("true_qualification"))

    labels = groups or meta.get("groups") or sorted(set(cols["group"]))
    code = {g: i for i, g in enumerate(labels)}
    unknown_groups = sorted(set(cols["group"]) - set(code))
    if unknown_groups:
        rid = next(r for r, g in zip(cols["record_id"], cols["group"]) if g in unknown_groups)
        raise DataError(f"{path}:{line_of[rid]}: group(s) {unknown_groups} not declared")
    nan = float("nan")
    d = Dataset(
        record_id=np.array(cols["record_id"], dtype=str),
        query_id=np.array(cols["query_id"], dtype=str),
        group=np.array([code[g] for g in cols["group"]], dtype=np.int64),
        score=np.array(cols["score"], dtype=float),
        treated=np.array(cols["treated"], dtype=bool),
        outcome=np.array([nan if v is None else v for v in cols["outcome"]], dtype=float),
        true_qualification=np.array([nan if v is None else v
                                     for v in cols["true_qualification"]], dtype=float),
        rank=np.array([0 if v is None else v for v in cols["rank"]], dtype=np.int64),
        groups=tuple(GroupId(i, g) for i, g in enumerate(labels)),
        kind=kind,
        threshold=None if threshold is None else float(threshold),
        objective_alpha=None if objective_alpha is None else float(objective_alpha),
        outcome_scale=outcome_scale,
    )
    problems = validate_dataset(d)
    if problems:
        msgs = [f"{path}:{line_of.get(v.record_id, 1)}: {v.invariant}: {v.message}"
                for v in problems[:20]]
        more = f"\n... and {len(problems) - 20} more" if len(problems) > 20 else ""
        raise DataError("\n".join(msgs) + more)
    return d


# -- JSON ------------------------------------------------------------------


def jsonable(obj: Any) -> Any:
    """Recursively convert to JSON-safe values: NaN -> null, +/-inf -> "inf"/"-inf"."""
    if hasattr(obj, "to_dict"):
        return jsonable(obj.to_dict())
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def dumps(obj: Any) -> str:
    return json.dumps(jsonable(obj), indent=2, allow_nan=False) + "\n"


# -- tables ----------------------------------------------------------------


def _f(x, nd=4) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "-"
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.{nd}f}"


def _pct(x) -> str:
    return "-" if x is None or math.isnan(x) else f"{x:.1f}%"


def _grid(header: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(str(r[i])) for r in [header, *rows]) for i in range(len(header))]
    fmt = "  ".join(f"{{:>{w}}}" for w in widths)
    lines = [fmt.format(*header), fmt.format(*["-" * w for w in widths])]
    lines += [fmt.format(*map(str, r)) for r in rows]
    return "\n".join(lines)


def audit_rows(report) -> tuple[list[str], list[list]]:
    """Per-bin table: group effects relative to the reference with 95% +/- bars."""
    others = [t for r in report.bins if r.fit for t in r.fit.coefficients
              if t.startswith("group[")]
    others = list(dict.fromkeys(others))
    header = ["bin", "lower", "upper", "n", "mean_y"]
    for t in others:
        header += [f"beta {t[6:-1]}", "+/-", "p"]
    header += ["reject", "note"]
    rows = []
    for r in report.bins:
        b = r.bin
        row = [b.index, _f(b.lower), _f(b.upper) + ("]" if b.closed else ")"),
               sum(r.n_by_group.values()), _f(r.mean_outcome)]
        for t in others:
            if r.fit is None:
                row += ["-", "-", "-"]
            else:
                row += [_f(r.fit.coefficients[t]), _f(1.96 * r.fit.standard_errors[t]),
                        _f(r.fit.p_values[t])]
        note = []
        if b.is_marginal:
            note.append("marginal")
        if r.error:
            note.append("not fitted")
        if r.low_power_groups:
            note.append("low power: " + ",".join(r.low_power_groups))
        row += ["-" if r.verdict is None else ("yes" if r.verdict.reject else "no"),
                "; ".join(note)]
        rows.append(row)
    return header, rows


def render_audit(report) -> str:
    header, rows = audit_rows(report)
    verdict = "BIASED" if report.biased else "no bias detected"
    head = [f"{report.kind} audit (reference group {report.reference}, level {report.level}, "
            f"{report.covariance} standard errors): {verdict}"]
    if report.biased_bonferroni is not None:
        head.append(f"Bonferroni-adjusted verdict: "
                    f"{'BIASED' if report.biased_bonferroni else 'no bias detected'}")
    if report.excluded_off_support:
        head.append(f"excluded off common support: {report.excluded_off_support}")
    tail = [f"warning: {w}" for w in report.warnings]
    return "\n".join(head + [_grid(header, rows)] + tail)


def counterfactual_rows(summary) -> tuple[list[str], list[list]]:
    header = ["group", "N_before", "N_after", "N_pct_delta"]
    ranking = bool(summary.mean_rank_before)
    if ranking:
        header += ["mean_rank_before", "mean_rank_after", "mean_rank_delta"]
    rows = []
    for g in summary.n_before:
        row = [g, summary.n_before[g], summary.n_after[g], _pct(summary.n_pct_delta[g])]
        if ranking:
            row += [_f(summary.mean_rank_before[g]), _f(summary.mean_rank_after[g]),
                    _f(summary.mean_rank_delta[g])]
        rows.append(row)
    return header, rows


def render_counterfactual(summary) -> str:
    header, rows = counterfactual_rows(summary)
    out = [f"{summary.kind} counterfactual", _grid(header, rows)]
    if summary.y_before is not None:
        out.append(f"Y realized (before) = {_f(summary.y_before)}; "
                   f"Y predicted (after) = {_f(summary.y_after)}; "
                   f"Y_pct_delta = {_pct(summary.y_pct_delta)}")
    if summary.n_unavailable:
        out.append(f"records without a prediction (kept in place): {summary.n_unavailable}")
    if summary.n_far_below_threshold:
        out.append(f"records more than one marginal-bin width below the threshold "
                   f"(predicted with the marginal fit): {summary.n_far_below_threshold}")
    out += [f"warning: {w}" for w in summary.warnings]
    return "\n".join(out)


def render_verdicts(verdicts: dict) -> str:
    rows = []
    for name, v in verdicts.items():
        d = v.detail
        stat = d.get("max_total_variation", d.get("max_gap"))
        rows.append([name, "fair" if v.fair else "UNFAIR", v.tolerance,
                     "-" if stat is None else _f(stat)])
    return _grid(["metric", "verdict", "tolerance", "statistic"], rows)


def write_text(text: str, path: str | Path | None) -> None:
    if path is None:
        print(text, end="" if text.endswith("\n") else "\n")
        return
    try:
        Path(path).write_text(text if text.endswith("\n") else text + "\n")
    except OSError as exc:
        raise DataError(f"{path}: cannot write ({exc.strerror})") from None


def to_csv(header: list[str], rows: list[list]) -> str:
    import io as _io
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def emit_report(obj, fmt: str = "json", path: str | Path | None = None) -> None:
    """Write an audit report, counterfactual summary, verdict dict or demo report."""
    from .baselines import DemoReport, MetricVerdict
    from .counterfactual import CounterfactualSummary
    from .outcome_test import AuditReport

    if fmt not in FORMATS:
        raise ConfigError(f"format must be one of {FORMATS}")
    if fmt == "json":
        write_text(dumps(obj), path)
        return
    if isinstance(obj, AuditReport):
        text = render_audit(obj) if fmt == "table" else to_csv(*audit_rows(obj))
    elif isinstance(obj, CounterfactualSummary):
        text = render_counterfactual(obj) if fmt == "table" else to_csv(*counterfactual_rows(obj))
    elif isinstance(obj, DemoReport):
        if fmt == "table":
            text = obj.render()
        else:
            rows = [[g, s.treated_mass, str(s.conditional_mean), str(s.marginal_outcome)]
                    for g, s in obj.groups.items()]
            text = to_csv(["group", "treated_mass", "conditional_mean", "marginal_outcome"], rows)
    elif isinstance(obj, dict) and all(isinstance(v, MetricVerdict) for v in obj.values()):
        if fmt == "table":
            text = render_verdicts(obj)
        else:
            text = to_csv(["metric", "fair", "tolerance"],
                          [[k, v.fair, v.tolerance] for k, v in obj.items()])
    elif isinstance(obj, dict):
        text = "\n\n".join(_render_any(v, fmt) for v in obj.values())
    else:
        raise TypeError(f"cannot emit {type(obj).__name__}")
    write_text(text, path)


def _render_any(obj, fmt) -> str:
    import io as _io
    from contextlib import redirect_stdout
    buf = _io.StringIO()
    with redirect_stdout(buf):
        emit_report(obj, fmt, None)
    return buf.getvalue().rstrip("\n")


# -- scenario configs ------------------------------------------------------


def _one_key(d: Any, what: str) -> tuple[str, Any]:
    if isinstance(d, str):
        return d, None
    if not isinstance(d, dict) or len(d) != 1:
        raise ConfigError(f"{what} must be a string or a single-key object, got {d!r}")
    return next(iter(d.items()))


def _check_keys(d: dict, allowed: set[str], what: str) -> None:
    if not isinstance(d, dict):
        raise ConfigError(f"{what} must be an object")
    unknown = sorted(set(d) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {what}: {unknown}")


def _curve(v, what) -> PiecewiseLinear:
    try:
        return PiecewiseLinear(tuple((float(x), float(y)) for x, y in v))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{what} must be a list of [q, probability] knots ({exc})") from None


def distribution_from_dict(d) -> Any:
    name, v = _one_key(d, "distribution")
    try:
        if name == "discrete":
            return DiscreteQualification(tuple((q, m) for q, m in v))
        if name == "beta":
            return BetaQualification(float(v[0]), float(v[1]))
        if name == "uniform":
            return UniformQualification(float(v[0]), float(v[1]))
    except (TypeError, ValueError, IndexError) as exc:
        raise ConfigError(f"bad {name} distribution parameters {v!r}: {exc}") from None
    raise ConfigError(f"unknown distribution {name!r}")


def scorer_from_dict(d) -> Any:
    name, v = _one_key(d, "scorer")
    if name == "calibrated":
        return Calibrated()
    if name == "group_shift":
        if not isinstance(v, dict):
            raise ConfigError("group_shift needs an object mapping group -> shift")
        return GroupShift({str(k): float(x) for k, x in v.items()})
    if name == "inverted_for_group":
        return InvertedForGroup(str(v))
    if name == "noisy_calibrated":
        return NoisyCalibrated(float(v))
    raise ConfigError(f"unknown scorer {name!r}")


def viewer_from_dict(d) -> Any:
    name, v = _one_key(d, "viewer")
    if name == "bernoulli_q":
        return BernoulliViewer()
    if name == "threshold_q":
        return ThresholdViewer(float(v))
    if name == "three_level":
        v = v or {}
        _check_keys(v, {"apply_prob", "attention_prob", "alpha"}, "three_level viewer")
        kw = {}
        if "apply_prob" in v:
            kw["apply_prob"] = _curve(v["apply_prob"], "apply_prob")
        if "attention_prob" in v:
            kw["attention_prob"] = _curve(v["attention_prob"], "attention_prob")
        if "alpha" in v:
            kw["alpha"] = float(v["alpha"])
        return ThreeLevelViewer(**kw)
    raise ConfigError(f"unknown viewer {name!r}")


def allocation_from_dict(d) -> Any:
    name, v = _one_key(d, "allocation")
    v = v or {}
    if name == "classification":
        _check_keys(v, {"threshold", "candidates_per_query"}, "classification allocation")
        if "threshold" not in v:
            raise ConfigError("classification allocation needs a threshold")
        return ClassificationAllocation(float(v["threshold"]),
                                        int(v.get("candidates_per_query", 10)))
    if name == "ranking":
        _check_keys(v, {"candidates_per_query", "scroll_depth"}, "ranking allocation")
        depth = v.get("scroll_depth")
        if depth is not None:
            try:
                depth = {int(k): float(p) for k, p in depth.items()}
            except (AttributeError, ValueError):
                raise ConfigError("scroll_depth must map depth -> probability") from None
        return RankingAllocation(int(v.get("candidates_per_query", 10)), depth)
    raise ConfigError(f"unknown allocation {name!r}")


def scenario_from_dict(d: dict) -> ScenarioConfig:
    _check_keys(d, {"groups", "scorer", "viewer", "allocation", "n_queries", "seed"}, "scenario")
    if "groups" not in d or not d["groups"]:
        raise ConfigError("scenario needs groups")
    groups = {}
    for g, spec in d["groups"].items():
        _check_keys(spec, {"distribution", "share"}, f"group {g}")
        if "distribution" not in spec or "share" not in spec:
            raise ConfigError(f"group {g} needs distribution and share")
        groups[str(g)] = GroupSpec(distribution_from_dict(spec["distribution"]),
                                   float(spec["share"]))
    cfg = ScenarioConfig(
        groups=groups,
        scorer=scorer_from_dict(d.get("scorer", "calibrated")),
        viewer=viewer_from_dict(d.get("viewer", "bernoulli_q")),
        allocation=allocation_from_dict(d.get("allocation", {"classification": {"threshold": 0.5}})),
        n_queries=int(d.get("n_queries", 1000)),
        seed=int(d.get("seed", 0)),
    )
    cfg.validate()
    return cfg


def scenario_to_dict(cfg: ScenarioConfig) -> dict:
    def dist(x):
        if isinstance(x, DiscreteQualification):
            return {"discrete": [list(p) for p in x.points]}
        if isinstance(x, BetaQualification):
            return {"beta": [x.a, x.b]}
        return {"uniform": [x.lo, x.hi]}

    s = cfg.scorer
    scorer = ("calibrated" if isinstance(s, Calibrated)
              else {"group_shift": dict(s.shifts)} if isinstance(s, GroupShift)
              else {"inverted_for_group": s.group} if isinstance(s, InvertedForGroup)
              else {"noisy_calibrated": s.sigma})
    v = cfg.viewer
    viewer = ("bernoulli_q" if isinstance(v, BernoulliViewer)
              else {"threshold_q": v.tau} if isinstance(v, ThresholdViewer)
              else {"three_level": {"apply_prob": [list(k) for k in v.apply_prob.knots],
                                    "attention_prob": [list(k) for k in v.attention_prob.knots],
                                    "alpha": v.alpha}})
    a = cfg.allocation
    alloc = ({"classification": {"threshold": a.threshold,
                                 "candidates_per_query": a.candidates_per_query}}
             if isinstance(a, ClassificationAllocation)
             else {"ranking": {"candidates_per_query": a.candidates_per_query,
                               "scroll_depth": None if a.scroll_depth is None
                               else {str(k): p for k, p in a.scroll_depth.items()}}})
    return {
        "groups": {g: {"distribution": dist(s.distribution), "share": s.share}
                   for g, s in cfg.groups.items()},
        "scorer": scorer, "viewer": viewer, "allocation": alloc,
        "n_queries": cfg.n_queries, "seed": cfg.seed,
    }


# -- run configs -----------------------------------------------------------

SUBCOMMANDS = ("simulate", "audit", "counterfactual", "compare-metrics", "demo")


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    input: Path | None = None
    output: Path | None = None
    format: str = "json"
    scenario: ScenarioConfig | None = None
    n_bins: int = 10
    reference: str | None = None
    level: float = 0.05
    covariance: str = "HC1"
    kind: str | None = None
    threshold: float | None = None
    objective_alpha: float | None = None
    outcome_scale: str | None = None
    eo_bins: int = 10
    eo_tolerance: float = 0.1
    precision_tolerance: float = 0.01
    below_threshold: str = "extrapolate"
    fixture: str | None = None


_TOP_KEYS = {"input", "output", "format", "dataset", "audit", "metrics", "counterfactual",
             "scenario", "fixture"}


def load_config_file(path: str | Path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"{path}: config file not found")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    _check_keys(raw, _TOP_KEYS, f"config {path}")
    base = path.parent
    for key in ("input", "output"):
        if raw.get(key) is not None:
            p = Path(raw[key])
            raw[key] = p if p.is_absolute() else base / p
    return raw


def build_run_config(subcommand: str, file_cfg: dict, overrides: dict) -> RunConfig:
    """Merge a parsed config file with command-line overrides (flags win)."""
    if subcommand not in SUBCOMMANDS:
        raise ConfigError(f"unknown subcommand {subcommand!r}")
    ds = file_cfg.get("dataset", {}) or {}
    _check_keys(ds, {"kind", "threshold", "objective_alpha", "outcome_scale"}, "dataset")
    au = file_cfg.get("audit", {}) or {}
    _check_keys(au, {"n_bins", "reference", "level", "covariance"}, "audit")
    me = file_cfg.get("metrics", {}) or {}
    _check_keys(me, {"eo_bins", "eo_tolerance", "precision_tolerance"}, "metrics")
    cf = file_cfg.get("counterfactual", {}) or {}
    _check_keys(cf, {"below_threshold"}, "counterfactual")

    scenario = None
    if file_cfg.get("scenario") is not None:
        sc = dict(file_cfg["scenario"])
        if overrides.get("seed") is not None:
            sc["seed"] = overrides["seed"]
        scenario = scenario_from_dict(sc)

    def pick(key, section, default):
        v = overrides.get(key)
        return v if v is not None else section.get(key, default)

    out = overrides.get("output")
    cfg = RunConfig(
        subcommand=subcommand,
        input=Path(overrides["input"]) if overrides.get("input") else file_cfg.get("input"),
        output=Path(out) if out else file_cfg.get("output"),
        format=overrides.get("format") or file_cfg.get("format") or "json",
        scenario=scenario,
        n_bins=int(pick("n_bins", au, 10)),
        reference=pick("reference", au, None),
        level=float(pick("level", au, 0.05)),
        covariance=pick("covariance", au, "HC1"),
        kind=ds.get("kind"),
        threshold=ds.get("threshold"),
        objective_alpha=ds.get("objective_alpha"),
        outcome_scale=ds.get("outcome_scale"),
        eo_bins=int(me.get("eo_bins", 10)),
        eo_tolerance=float(me.get("eo_tolerance", 0.1)),
        precision_tolerance=float(me.get("precision_tolerance", 0.01)),
        below_threshold=cf.get("below_threshold", "extrapolate"),
        fixture=overrides.get("fixture") or file_cfg.get("fixture"),
    )
    validate_run_config(cfg)
    return cfg


def validate_run_config(cfg: RunConfig) -> None:
    if cfg.format not in FORMATS:
        raise ConfigError(f"format must be one of {FORMATS}")
    if cfg.n_bins < 2:
        raise ConfigError("n_bins must be at least 2")
    if not 0 < cfg.level < 1:
        raise ConfigError("level must lie in (0, 1)")
    if cfg.covariance not in ("HC1", "classical"):
        raise ConfigError("covariance must be HC1 or classical")
    if cfg.below_threshold not in ("extrapolate", "at_threshold"):
        raise ConfigError("counterfactual.below_threshold must be extrapolate or at_threshold")
    if cfg.kind is not None and cfg.kind not in KINDS:
        raise ConfigError(f"dataset kind must be one of {KINDS}")
    if cfg.output is not None and not Path(cfg.output).parent.is_dir():
        raise ConfigError(f"output directory {Path(cfg.output).parent} does not exist")
    if (cfg.output is not None and cfg.input is not None
            and Path(cfg.output).resolve() == Path(cfg.input).resolve()):
        raise ConfigError("output path would overwrite the input dataset")
    if cfg.subcommand == "simulate":
        if cfg.scenario is None:
            raise ConfigError("simulate needs a scenario")
        if cfg.output is None:
            raise ConfigError("simulate needs an output path")
    elif cfg.subcommand in ("audit", "counterfactual", "compare-metrics"):
        if cfg.input is None and cfg.scenario is None:
            raise ConfigError(f"{cfg.subcommand} needs an input dataset or a scenario")
        if cfg.input is not None and not Path(cfg.input).is_file():
            raise ConfigError(f"input file {cfg.input} not found")
    elif cfg.subcommand == "demo":
        from .fixtures import FIXTURES
        if cfg.fixture is None:
            raise ConfigError(f"demo needs a fixture: one of {sorted(FIXTURES)}")
        if cfg.fixture not in FIXTURES:
            raise ConfigError(f"unknown fixture {cfg.fixture!r}; choose from {sorted(FIXTURES)}")
