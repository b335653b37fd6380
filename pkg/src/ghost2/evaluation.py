"""Metrics, treatment recipes, and the ablation runner."""

from __future__ import annotations

import csv
import io
import logging
import os
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .dataset import TrainTestSplit, normalize
from .errors import Ghost2Error, LengthMismatch
from .learners import TRADITIONAL, HyperParamSpace, fit, predict
from .treatments import TreatmentPlan, apply_plan
from .tuner import BUDGET, EPSILON, dodge, inner_split, objective

log = logging.getLogger(__name__)

METRICS = ("precision", "auc", "false_alarm", "recall")
LOWER_IS_BETTER = {"false_alarm"}
RESULT_FIELDS = ("project", "treatment", "seed", "precision", "auc", "false_alarm", "recall",
                 "labels_used", "status")


# --- metrics ---------------------------------------------------------------

@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def confusion(y_true, y_pred) -> ConfusionCounts:
    y_true = np.asarray(y_true).astype(np.int64)
    y_pred = np.asarray(y_pred).astype(np.int64)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise LengthMismatch(f"{y_true.shape} vs {y_pred.shape}")
    if len(y_true) == 0:
        raise LengthMismatch("need at least one prediction")
    pos, hit = y_true == 1, y_pred == 1
    return ConfusionCounts(
        tp=int(np.sum(pos & hit)),
        fp=int(np.sum(~pos & hit)),
        tn=int(np.sum(~pos & ~hit)),
        fn=int(np.sum(pos & ~hit)),
    )


def _ratio(num, den):
    return (num / den, False) if den else (0.0, True)


def metrics(counts: ConfusionCounts) -> dict:
    """precision, recall and false-alarm rate; zero denominators give 0 plus a flag."""
    precision, p_undef = _ratio(counts.tp, counts.tp + counts.fp)
    recall, r_undef = _ratio(counts.tp, counts.tp + counts.fn)
    false_alarm, f_undef = _ratio(counts.fp, counts.fp + counts.tn)
    undefined = tuple(name for name, flag in
                      (("precision", p_undef), ("recall", r_undef), ("false_alarm", f_undef)) if flag)
    return {"precision": precision, "recall": recall, "false_alarm": false_alarm, "undefined": undefined}


def auc(y_true, scores) -> float:
    """Rank-sum (Mann-Whitney) AUC with ties counted as one half.

    Returns 0.5 when one class is absent; see ``auc_defined``.
    """
    y_true = np.asarray(y_true)
    scores = np.asarray(scores, dtype=np.float64)
    if y_true.shape != scores.shape:
        raise LengthMismatch(f"{y_true.shape} vs {scores.shape}")
    n_pos = int(np.sum(y_true == 1))
    n_neg = len(y_true) - n_pos
    if n_pos == 0 or n_neg == 0:
        return 0.5
    order = np.argsort(scores, kind="mergesort")
    s = scores[order]
    ranks = np.empty(len(s))
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and s[j + 1] == s[i]:
            j += 1
        ranks[i:j + 1] = (i + j) / 2.0 + 1.0
        i = j + 1
    pos_rank_sum = ranks[y_true[order] == 1].sum()
    u = pos_rank_sum - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def auc_defined(y_true) -> bool:
    y_true = np.asarray(y_true)
    return bool(np.any(y_true == 1) and np.any(y_true != 1))


def median(values, mode: str = "lower") -> float:
    """Median; for even counts ``lower`` takes the lower middle value, ``mean`` averages the two."""
    v = sorted(values)
    if not v:
        return float("nan")
    mid = (len(v) - 1) // 2
    if mode == "mean" and len(v) % 2 == 0:
        return (v[mid] + v[mid + 1]) / 2.0
    return float(v[mid])


# --- treatment recipes -------------------------------------------------------

A1_STEPS = ("smooth", "smote", "ghost", "ghost", "smote")


@dataclass(frozen=True)
class Recipe:
    boundary: bool
    label: bool
    learner: str  # "F" feedforward, "T" traditional
    parameter: bool
    instance: bool
    label_percent: int
    description: str

    def plan(self) -> TreatmentPlan:
        drop = set()
        if not self.boundary:
            drop.add("ghost")
        if not self.label:
            drop.add("smooth")
        if not self.instance:
            drop.add("smote")
        return TreatmentPlan(tuple(s for s in A1_STEPS if s not in drop), tune=self.parameter)


TREATMENTS = {
    "A1": Recipe(True, True, "F", True, True, 10, "full pipeline on the feedforward net"),
    "A2": Recipe(True, True, "F", True, False, 10, "A1 minus SMOTE"),
    "A3": Recipe(True, True, "F", False, True, 10, "A1 minus DODGE"),
    "A4": Recipe(False, True, "F", True, True, 10, "A1 minus GHOST"),
    "A5": Recipe(True, False, "F", True, True, 100, "A1 minus SMOOTH, all labels"),
    "A6": Recipe(True, False, "T", True, True, 100, "A5 on traditional learners"),
    "A7": Recipe(True, True, "T", True, True, 10, "A1 on traditional learners"),
    "B1": Recipe(False, True, "T", True, True, 10, "A4 on traditional learners"),
    "C1": Recipe(False, False, "T", True, True, 100, "SMOTE then DODGE on traditional learners"),
    "D1": Recipe(False, False, "T", False, False, 100, "baseline: default traditional learners, raw data"),
}


@dataclass
class EvalReport:
    project: str
    treatment: str
    seed: int
    precision: float = 0.0
    auc: float = 0.0
    false_alarm: float = 0.0
    recall: float = 0.0
    labels_used: int = 0
    runtime: float = 0.0
    status: str = "ok"
    undefined: tuple = ()
    learner: str = ""
    counts: ConfusionCounts | None = None
    synthetic_rows: int = 0

    def row(self) -> dict:
        return {k: getattr(self, k) for k in RESULT_FIELDS}


@dataclass
class RunOptions:
    budget: int = BUDGET
    epsilon: float = EPSILON
    lenient: bool = False
    auc_from: str = "scores"  # or "labels"
    ffnet: dict = field(default_factory=dict)  # epochs / learning_rate / momentum overrides
    space: HyperParamSpace | None = None
    plan: TreatmentPlan | None = None  # overrides the recipe's plan; learner stays feedforward


def _choose_untuned(train, kinds, space, rng, options):
    """Default config per kind; with several kinds keep the best on an inner split."""
    configs = [space.default(kind, seed=int(rng.integers(2**31))) for kind in kinds]
    if len(configs) == 1:
        return configs[0]
    halves = inner_split(train, rng)
    if halves is None:
        return configs[0]
    inner_train, inner_val = halves
    best, best_score = configs[0], -np.inf
    for config in configs:
        model = fit(inner_train, config, **options.ffnet)
        score = objective(inner_val.labels, predict(model, inner_val.features)[1])
        if score > best_score:
            best, best_score = config, score
    return best


def run_treatment(split: TrainTestSplit, treatment: str, rng_seed=0,
                  options: RunOptions | None = None) -> EvalReport:
    """Treat and tune on the training half only, then score once on the test half."""
    options = options or RunOptions()
    if options.plan is not None:
        base = TREATMENTS.get(treatment, TREATMENTS["A1"])
        recipe = Recipe(base.boundary, base.label, base.learner if treatment in TREATMENTS else "F",
                        options.plan.tune, base.instance, base.label_percent, "custom plan")
    else:
        recipe = TREATMENTS[treatment]
    started = time.perf_counter()
    report = EvalReport(split.train.project, treatment, int(rng_seed) if np.isscalar(rng_seed) else 0)
    test_digest = split.test.digest()
    try:
        rng = np.random.default_rng(rng_seed)
        plan_rng, tune_rng, fit_rng = rng.spawn(3)
        scaled, norm = normalize(split)
        plan = recipe.plan() if options.plan is None else TreatmentPlan(
            options.plan.steps, options.plan.tune, options.plan.smote_k, options.plan.ghost)
        treated = apply_plan(scaled.train, plan, plan_rng, lenient=options.lenient)
        report.labels_used = plan.labels_used
        report.synthetic_rows = treated.n - plan.labels_used
        kinds = ("ffnet",) if recipe.learner == "F" else TRADITIONAL
        space = HyperParamSpace(options.space.table if options.space else None, kinds=kinds)
        if recipe.parameter:
            state = dodge(space, treated, options.budget, options.epsilon, tune_rng, **options.ffnet)
            config = state.best
        else:
            config = _choose_untuned(treated, kinds, space, tune_rng, options)
        model = fit(treated, config, rng_seed=fit_rng, **options.ffnet)
        model.norm = norm
        scores, labels = predict(model, scaled.test.features)
        counts = confusion(scaled.test.labels, labels)
        m = metrics(counts)
        report.counts = counts
        report.precision, report.recall, report.false_alarm = m["precision"], m["recall"], m["false_alarm"]
        ranked = scores if options.auc_from == "scores" else labels
        report.auc = auc(scaled.test.labels, ranked)
        report.undefined = m["undefined"] + (() if auc_defined(scaled.test.labels) else ("auc",))
        report.learner = config.label()
    except Ghost2Error as exc:
        log.error("%s/%s seed %s failed: %s", split.train.project, treatment, rng_seed, exc)
        report.status = f"error: {type(exc).__name__}"
    if split.test.digest() != test_digest:  # pragma: no cover - guarded by immutability
        raise RuntimeError("test data changed during a treatment run")
    report.runtime = time.perf_counter() - started
    return report


# --- seeds and the ablation grid ------------------------------------------

def cell_seed(master: int, project: str, treatment: str, repeat: int) -> int:
    """Per-cell seed that depends only on the cell's own coordinates."""
    ss = np.random.SeedSequence([int(master), zlib.crc32(project.encode()),
                                 zlib.crc32(treatment.encode()), int(repeat)])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def _run_cell(args):
    split, treatment, seed, options = args
    return run_treatment(split, treatment, seed, options)


def run_cells(cells, options: RunOptions | None = None, jobs: int | None = None) -> list[EvalReport]:
    """Evaluate (split, treatment, seed) cells, in parallel when ``jobs`` > 1.

    Output order follows input order regardless of completion order.
    """
    options = options or RunOptions()
    work = [(split, t, seed, options) for split, t, seed in cells]
    jobs = jobs or os.cpu_count() or 1
    if jobs <= 1 or len(work) <= 1:
        return [_run_cell(w) for w in work]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_cell, work))


@dataclass
class AblationTable:
    projects: list[str]
    treatments: list[str]
    values: dict  # (treatment, metric) -> [per-project value]
    medians: dict  # (treatment, metric) -> median over projects
    better: dict  # (treatment, metric) -> count better than A1 or None
    worse: dict  # (treatment, metric) -> [bool per project]
    cells: list[EvalReport]

    def summary_rows(self):
        for metric in METRICS:
            for t in self.treatments:
                row = {"metric": metric, "treatment": t}
                row.update(dict(zip(self.projects, self.values[(t, metric)])))
                row["median"] = self.medians[(t, metric)]
                row["better_than_A1"] = self.better[(t, metric)]
                yield row


def _better(metric, a, b) -> bool:
    return a < b if metric in LOWER_IS_BETTER else a > b


def aggregate(cells: list[EvalReport], median_mode: str = "lower") -> AblationTable:
    projects = list(dict.fromkeys(c.project for c in cells))
    treatments = list(dict.fromkeys(c.treatment for c in cells))
    values, medians, better, worse = {}, {}, {}, {}
    for t in treatments:
        for metric in METRICS:
            per_project = []
            for p in projects:
                got = [getattr(c, metric) for c in cells if c.project == p and c.treatment == t and c.status == "ok"]
                per_project.append(median(got, median_mode) if got else float("nan"))
            values[(t, metric)] = per_project
            ok = [v for v in per_project if v == v]
            medians[(t, metric)] = median(ok, median_mode) if ok else float("nan")
    for t in treatments:
        for metric in METRICS:
            if "A1" not in treatments:
                better[(t, metric)] = None
                worse[(t, metric)] = [False] * len(projects)
                continue
            mine, ref = values[(t, metric)], values[("A1", metric)]
            better[(t, metric)] = sum(_better(metric, a, b) for a, b in zip(mine, ref))
            worse[(t, metric)] = [_better(metric, b, a) for a, b in zip(mine, ref)]
    return AblationTable(projects, treatments, values, medians, better, worse, cells)


def ablation(splits: list[TrainTestSplit], treatments: list[str], seeds: list[int],
             options: RunOptions | None = None, jobs: int | None = None, median_mode="lower",
             master_seed: int | None = None) -> AblationTable:
    """Run every (project, treatment, seed) cell and aggregate.

    With ``master_seed`` each listed seed is treated as a repeat index and
    fanned out through ``cell_seed``; otherwise seeds are used verbatim.
    """
    if not splits or not treatments or not seeds:
        raise ValueError("ablation needs at least one dataset, treatment and seed")
    cells = []
    for split in splits:
        for t in treatments:
            for s in seeds:
                seed = s if master_seed is None else cell_seed(master_seed, split.train.project, t, s)
                cells.append((split, t, seed))
    reports = run_cells(cells, options, jobs)
    return aggregate(reports, median_mode)


# --- output ----------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, float):
        return "nan" if v != v else f"{v:.6g}"
    return str(v)


def results_csv(cells: list[EvalReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULT_FIELDS)
    for c in cells:
        w.writerow([_fmt(v) for v in c.row().values()])
    return buf.getvalue()


def summary_csv(table: AblationTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = ["metric", "treatment"] + table.projects + ["median", "better_than_A1"]
    w.writerow(header)
    for row in table.summary_rows():
        w.writerow([_fmt(row.get(h, "")) if row.get(h) is not None else "-" for h in header])
    return buf.getvalue()


def render(table: AblationTable) -> str:
    """Four metric blocks; ``*`` marks a cell worse than A1 for that project."""
    width = max([9] + [len(p) + 1 for p in table.projects])
    lines = []
    for metric in METRICS:
        arrow = "lower is better" if metric in LOWER_IS_BETTER else "higher is better"
        lines.append(f"## {metric} ({arrow})")
        head = "treatment".ljust(10) + "".join(p.rjust(width) for p in table.projects)
        head += "median".rjust(9) + "  #>A1"
        lines.append(head)
        for t in table.treatments:
            cells = []
            for v, bad in zip(table.values[(t, metric)], table.worse[(t, metric)]):
                txt = "nan" if v != v else f"{v:.2f}"
                cells.append((txt + ("*" if bad else " ")).rjust(width))
            med = table.medians[(t, metric)]
            count = table.better[(t, metric)]
            tail = f"{'nan' if med != med else f'{med:.2f}':>9}  {'-' if t == 'A1' or count is None else count}"
            lines.append(t.ljust(10) + "".join(cells) + tail)
        lines.append("")
    errors = [c for c in table.cells if c.status != "ok"]
    if errors:
        lines.append(f"{len(errors)} cell(s) failed:")
        lines += [f"  {c.project}/{c.treatment} seed {c.seed}: {c.status}" for c in errors]
    return "\n".join(lines).rstrip() + "\n"


def report_dict(report: EvalReport) -> dict:
    out = asdict(report)
    out["counts"] = asdict(report.counts) if report.counts else None
    return out
