"""ghost2 command line: run, ablate, landscape, stability."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import evaluation as ev
from .dataset import Schema, TrainTestSplit, discover, load_csv, normalize, time_split
from .errors import Ghost2Error
from .landscape import loss_surface, smooth_stability, smoothness, smoothness_change
from .learners import HyperParamSpace, fit
from .synthetic import bumpy
from .treatments import A1_PLAN, TreatmentPlan, apply_plan
from .tuner import dodge

log = logging.getLogger("ghost2")

EXIT_OK, EXIT_CELL_ERROR, EXIT_CONFIG = 0, 1, 2
SYNTHETIC = "synthetic"


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    data: str | None = None
    out: str = "ghost2-out"
    treatments: list = field(default_factory=lambda: ["A1"])
    plan: str | None = None
    seed: int = 0
    repeats: int = 1
    split: float = 0.8
    budget: int = 30
    epsilon: float = 0.2
    jobs: int | None = None
    svg: str | None = None
    lenient: bool = False
    project: str | None = None
    auc_from: str = "scores"
    grid: int = 25
    alpha: float = 1.0

    @classmethod
    def from_sources(cls, args: argparse.Namespace) -> RunConfig:
        """Defaults, then the optional JSON config file, then explicit flags."""
        values = {}
        if getattr(args, "config", None):
            try:
                values.update(json.loads(Path(args.config).read_text()))
            except (OSError, ValueError) as exc:
                raise ConfigError(f"cannot read config file {args.config}: {exc}") from None
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        for name in known:
            flag = getattr(args, name, None)
            if flag is not None:
                values[name] = flag
        if isinstance(values.get("treatments"), str):
            values["treatments"] = [t.strip() for t in values["treatments"].split(",") if t.strip()]
        if not values.get("data"):
            values["data"] = os.environ.get("GHOST2_DATA")
        config = cls(**values)
        config.validate()
        return config

    def validate(self):
        if not self.data:
            raise ConfigError("no data given: pass --data DIR (or set GHOST2_DATA)")
        if self.data != SYNTHETIC and not Path(self.data).exists():
            raise ConfigError(f"data path {self.data} does not exist")
        bad = [t for t in self.treatments if t not in ev.TREATMENTS]
        if bad:
            raise ConfigError(f"unknown treatment(s): {', '.join(bad)}")
        if not 0.0 < self.split < 1.0:
            raise ConfigError("--split must lie in (0, 1)")
        if self.budget < 1 or self.epsilon <= 0 or self.repeats < 1:
            raise ConfigError("--budget and --repeats must be >= 1 and --epsilon > 0")
        if self.plan is not None:
            try:
                TreatmentPlan.parse(self.plan)
            except Ghost2Error as exc:
                raise ConfigError(str(exc)) from None

    def run_options(self) -> ev.RunOptions:
        plan = TreatmentPlan.parse(self.plan) if self.plan else None
        return ev.RunOptions(budget=self.budget, epsilon=self.epsilon, lenient=self.lenient,
                             auc_from=self.auc_from, plan=plan)


def synthetic_projects() -> list:
    """Bundled generated projects, used when ``--data synthetic``."""
    return [bumpy(seed=s, project=f"bumpy{s}") for s in (7, 11, 13)]


def load_projects(config: RunConfig) -> list:
    if config.data == SYNTHETIC:
        data = synthetic_projects()
    else:
        path = Path(config.data)
        files = [path] if path.is_file() else discover(path)
        if not files:
            raise ConfigError(f"no *.csv files in {path}")
        data = [load_csv(f, Schema()).replace(project=f.stem) for f in files]
    if config.project:
        data = [d for d in data if d.project == config.project]
        if not data:
            raise ConfigError(f"project {config.project!r} not found")
    return data


def _out_dir(config: RunConfig) -> Path:
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _run_grid(config: RunConfig, treatments) -> tuple[ev.AblationTable, int]:
    projects = load_projects(config)
    splits = [time_split(d, config.split) for d in projects]
    options = config.run_options()
    names = ["custom"] if options.plan is not None and treatments == ["custom"] else treatments
    cells = []
    for split in splits:
        for t in names:
            for r in range(config.repeats):
                cells.append((split, t, ev.cell_seed(config.seed, split.train.project, t, r)))
    reports = ev.run_cells(cells, options, config.jobs)
    table = ev.aggregate(reports)
    failed = sum(c.status != "ok" for c in reports)
    return table, failed


def _write_results(config: RunConfig, table: ev.AblationTable, summary: bool = False):
    out = _out_dir(config)
    (out / "results.csv").write_text(ev.results_csv(table.cells))
    text = ev.render(table)
    (out / "report.md").write_text(text)
    if summary:
        (out / "summary.csv").write_text(ev.summary_csv(table))
    sys.stdout.write(text)


def cmd_run(config: RunConfig) -> int:
    treatments = ["custom"] if config.plan else config.treatments
    table, failed = _run_grid(config, treatments)
    _write_results(config, table)
    return EXIT_CELL_ERROR if failed else EXIT_OK


def cmd_ablate(config: RunConfig) -> int:
    table, failed = _run_grid(config, config.treatments)
    _write_results(config, table, summary=True)
    return EXIT_CELL_ERROR if failed else EXIT_OK


def landscape_pair(split: TrainTestSplit, seed: int, G: int = 25, alpha: float = 1.0,
                   budget: int = 30, epsilon: float = 0.2, lenient: bool = True):
    """Before/after loss grids for one project.

    Before: the default feedforward net on the scaled, untreated training
    data. After: the A1 pipeline (treatments, then DODGE) on the same
    data. Both slices use the same direction seed.
    """
    rng = np.random.default_rng(seed)
    plan_rng, tune_rng, fit_rng, dir_seed = rng.spawn(4)
    scaled, _ = normalize(split)
    space = HyperParamSpace(kinds=("ffnet",))
    before_model = fit(scaled.train, space.default("ffnet"), rng_seed=fit_rng)
    plan = TreatmentPlan.parse(A1_PLAN)
    treated = apply_plan(scaled.train, plan, plan_rng, lenient=lenient)
    state = dodge(space, treated, budget, epsilon, tune_rng)
    after_model = fit(treated, state.best, rng_seed=fit_rng)
    direction_seed = int(dir_seed.integers(2**31))
    before = loss_surface(before_model, scaled.train, G, alpha, direction_seed)
    after = loss_surface(after_model, treated, G, alpha, direction_seed)
    return before, after


def cmd_landscape(config: RunConfig) -> int:
    projects = load_projects(config)
    data = projects[0]
    if len(projects) > 1:
        log.info("several projects found; using %s (pick one with --project)", data.project)
    split = time_split(data, config.split)
    before, after = landscape_pair(split, ev.cell_seed(config.seed, data.project, "landscape", 0),
                                   config.grid, config.alpha, config.budget, config.epsilon)
    out = _out_dir(config)
    before.to_csv(out / f"{data.project}_before.csv")
    after.to_csv(out / f"{data.project}_after.csv")
    if config.svg:
        stem = Path(config.svg).name.removesuffix(".svg")
        before.to_svg(out / f"{stem}_before.svg")
        after.to_svg(out / f"{stem}_after.svg")
    change = smoothness_change(before, after)
    line = (f"{data.project}: smoothness before={smoothness(before):.6g} "
            f"after={smoothness(after):.6g} change={change:+.2f}%")
    (out / "landscape.txt").write_text(line + "\n")
    print(line)
    return EXIT_OK


def cmd_stability(config: RunConfig) -> int:
    projects = load_projects(config)
    out = _out_dir(config)
    lines = []
    for data in projects:
        split = time_split(data, config.split)
        scaled, _ = normalize(split)
        result = smooth_stability(scaled.train, config.repeats,
                                  ev.cell_seed(config.seed, data.project, "stability", 0))
        medians = out / f"{data.project}_medians.csv"
        medians.write_text("".join(",".join(repr(float(v)) for v in row) + "\n" for row in result.medians))
        meta = {"project": data.project, "repeats": result.repeats, "k": result.k,
                "l1_norm": result.l1_norm, "cluster_seed": result.cluster_seed,
                "headline_percent": result.headline}
        (out / f"{data.project}_stability.json").write_text(json.dumps(meta, indent=2) + "\n")
        lines.append(f"{data.project}: {result.headline:.2f}% ({result.repeats} repeats x {result.k} leaves)")
    text = "\n".join(lines) + "\n"
    (out / "stability.txt").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "ablate": cmd_ablate, "landscape": cmd_landscape, "stability": cmd_stability}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ghost2", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON file of settings; flags override it")
        p.add_argument("--data", help=f"CSV file, directory of CSVs, or '{SYNTHETIC}'")
        p.add_argument("--out", help="output directory (nothing is written elsewhere)")
        p.add_argument("--treatment", "--treatments", dest="treatments",
                       help="treatment id(s), comma separated (A1..A7, B1, C1, D1)")
        p.add_argument("--plan", help="custom plan, e.g. smooth>smote>ghost+dodge")
        p.add_argument("--project", help="only this project")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--repeats", type=int, help="seeds per cell (stability: SMOOTH repeats)")
        p.add_argument("--split", type=float, help="training fraction of the time split")
        p.add_argument("--budget", type=int, help="DODGE evaluations")
        p.add_argument("--epsilon", type=float, help="DODGE epsilon")
        p.add_argument("--jobs", type=int, help="parallel workers")
        p.add_argument("--svg", help="also write SVG heatmaps named after this file")
        p.add_argument("--grid", type=int, help="landscape resolution G")
        p.add_argument("--alpha", type=float, help="landscape extent")
        p.add_argument("--auc-from", dest="auc_from", choices=("scores", "labels"))
        p.add_argument("--lenient", action="store_true", default=None,
                       help="skip treatment steps that fail instead of failing the cell")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.command == "ablate" and args.treatments is None:
        args.treatments = ",".join(ev.TREATMENTS)
    if args.command == "stability" and args.repeats is None:
        args.repeats = 20
    try:
        config = RunConfig.from_sources(args)
        return COMMANDS[args.command](config)
    except (ConfigError, Ghost2Error, OSError) as exc:
        print(f"ghost2: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
