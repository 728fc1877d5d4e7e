"""Simulation study: generate, privatise, estimate three ways, score.

For every ``(epsilon, N)`` cell, ``outer_reps`` datasets are drawn and each
is released ``inner_reps`` times. Random streams are keyed by the cell
values (not by loop position), so reordering or subsetting the grids leaves
every surviving record unchanged.
"""

from __future__ import annotations

import csv
import io
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .dpmech import privatize
from .estimators import METHODS, bayes_estimate, naive_estimate, squared_error, vb_estimate
from .nbmodel import ModelShape, default_prior, sample_counts, sample_model_params
from .simplexopt import LineSearchConfig
from .statdist import RngStream
from .vbengine import FitConfig, PriorSpec

log = logging.getLogger(__name__)

CSV_HEADER = ("outer_rep", "inner_rep", "epsilon", "n", "estimator",
              "sq_error", "iterations", "converged", "wall_ms")
SUMMARY_HEADER = ("n", "epsilon", "estimator", "count", "mean", "median", "q1", "q3", "min", "max")


@dataclass(frozen=True)
class ExperimentConfig:
    num_classes: int = 2
    num_features: int = 5
    levels: int = 2
    n_grid: tuple = (50, 100, 200, 500)
    epsilon_grid: tuple = (0.0001, 0.001, 0.01, 0.1, 1.0)
    outer_reps: int = 10
    inner_reps: int = 5
    seed: int = 0
    tol: float = 1e-6
    max_iter: int = 500
    init_mode: str = "from-naive"
    alpha_prior: float = 1.0
    alpha_sim: float = 1.0
    # draw fresh true parameters for every outer replicate
    resample_params: bool = True
    # wall-clock timings make the CSV run-dependent, so they are opt-in
    record_timing: bool = False
    jobs: int = 1
    out_csv: Optional[str] = None
    plot: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        object.__setattr__(self, "epsilon_grid", tuple(float(e) for e in self.epsilon_grid))
        if not self.n_grid or not self.epsilon_grid:
            raise ValueError("the N and epsilon grids must be nonempty")
        if self.outer_reps < 1 or self.inner_reps < 1:
            raise ValueError("replicate counts must be >= 1")
        if any(n < 1 for n in self.n_grid) or any(not e > 0 for e in self.epsilon_grid):
            raise ValueError("grid values must be positive")
        ModelShape.uniform(self.num_classes, self.num_features, self.levels, 1)

    def shape(self, n_total: int) -> ModelShape:
        return ModelShape.uniform(self.num_classes, self.num_features, self.levels, n_total)

    def fit_config(self) -> FitConfig:
        return FitConfig(tol=self.tol, max_iter=self.max_iter, init_mode=self.init_mode,
                         line_search=LineSearchConfig())

    @classmethod
    def from_file(cls, path, **overrides) -> "ExperimentConfig":
        """Read ``key = value`` lines (``#`` starts a comment); keyword overrides win."""
        values = parse_config_text(Path(path).read_text(encoding="utf-8"))
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_mapping(values)

    @classmethod
    def from_mapping(cls, values: dict) -> "ExperimentConfig":
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key not in known:
                raise ValueError(f"unknown config key {key!r}")
            kwargs[key] = _coerce(key, raw, known[key].default)
        return cls(**kwargs)


def _coerce(key, raw, default):
    if not isinstance(raw, str):
        return raw
    raw = raw.strip()
    if isinstance(default, tuple):
        kind = int if key == "n_grid" else float
        return tuple(kind(v) for v in raw.replace(",", " ").split())
    if isinstance(default, bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{key}: expected a boolean, got {raw!r}")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw or None


def parse_config_text(text: str) -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


@dataclass(frozen=True)
class ExperimentRecord:
    outer_rep: int
    inner_rep: int
    epsilon: float
    n_total: int
    estimator: str
    sq_error: float
    iterations: int = 0
    converged: bool = True
    wall_ms: int = 0

    def sort_key(self):
        return (self.epsilon, self.n_total, self.outer_rep, self.inner_rep,
                METHODS.index(self.estimator))


def _true_params(cfg: ExperimentConfig, root: RngStream, outer: int):
    stream = root.child("params", outer) if cfg.resample_params else root.child("params")
    shape = cfg.shape(1)
    class_prior, cond_prior = default_prior(shape, cfg.alpha_sim)
    return sample_model_params(shape, stream, class_prior, cond_prior)


def _run_cell(cfg: ExperimentConfig, epsilon: float, n_total: int, outer: int) -> list:
    root = RngStream(cfg.seed)
    shape = cfg.shape(n_total)
    params = _true_params(cfg, root, outer)
    truth = sample_counts(params, shape, root.child("counts", n_total, outer))
    priors = PriorSpec.uniform(shape, cfg.alpha_prior)
    fit_cfg = cfg.fit_config()
    bayes_err = squared_error(bayes_estimate(truth, priors).point, params)
    records = []
    for inner in range(cfg.inner_reps):
        noisy = privatize(truth, epsilon, root.child("noise", n_total, outer, inner, epsilon))
        t0 = time.perf_counter()
        naive = naive_estimate(noisy)
        t1 = time.perf_counter()
        vb = vb_estimate(noisy, priors, fit_cfg)
        t2 = time.perf_counter()
        ms = (lambda a, b: int(round(1000 * (b - a)))) if cfg.record_timing else (lambda a, b: 0)
        common = dict(outer_rep=outer, inner_rep=inner, epsilon=epsilon, n_total=n_total)
        records.append(ExperimentRecord(estimator="naive", sq_error=squared_error(naive.point, params),
                                        wall_ms=ms(t0, t1), **common))
        records.append(ExperimentRecord(estimator="vb", sq_error=squared_error(vb.point, params),
                                        iterations=vb.meta["iterations"],
                                        converged=vb.meta["converged"], wall_ms=ms(t1, t2), **common))
        records.append(ExperimentRecord(estimator="bayes", sq_error=bayes_err, **common))
        if not vb.meta["converged"]:
            log.warning("vb fit did not converge (eps=%g, N=%d, outer=%d, inner=%d)",
                        epsilon, n_total, outer, inner)
    return records


def _run_cell_args(args):
    return _run_cell(*args)


def run_experiment(cfg: ExperimentConfig, jobs: Optional[int] = None) -> list:
    """All records of the study, in canonical (epsilon, N, outer, inner, estimator) order."""
    tasks = [(cfg, e, n, r) for e in sorted(cfg.epsilon_grid) for n in sorted(cfg.n_grid)
             for r in range(cfg.outer_reps)]
    jobs = cfg.jobs if jobs is None else jobs
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_run_cell_args, tasks))
    else:
        chunks = [_run_cell(*t) for t in tasks]
    records = [rec for chunk in chunks for rec in chunk]
    records.sort(key=ExperimentRecord.sort_key)
    return records


def _fmt(x: float) -> str:
    return repr(float(x))


def records_to_csv(records: Iterable[ExperimentRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in records:
        writer.writerow([r.outer_rep, r.inner_rep, _fmt(r.epsilon), r.n_total, r.estimator,
                         _fmt(r.sq_error), r.iterations, int(r.converged), r.wall_ms])
    return buf.getvalue()


def write_records(path, records) -> None:
    Path(path).write_text(records_to_csv(records), encoding="utf-8", newline="")


def read_records(path) -> list:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_HEADER:
            raise ValueError(f"{path}: unexpected CSV header {reader.fieldnames}")
        return [ExperimentRecord(int(row["outer_rep"]), int(row["inner_rep"]), float(row["epsilon"]),
                                 int(row["n"]), row["estimator"], float(row["sq_error"]),
                                 int(row["iterations"]), bool(int(row["converged"])),
                                 int(row["wall_ms"]))
                for row in reader]


@dataclass(frozen=True)
class SummaryRow:
    n_total: int
    epsilon: float
    estimator: str
    count: int
    mean: float
    median: float
    q1: float
    q3: float
    min: float
    max: float


def _group(records, key):
    groups = {}
    for r in records:
        groups.setdefault(key(r), []).append(r.sq_error)
    return groups


def _order(key):
    n, eps, est = key[:3]
    return (n, eps, METHODS.index(est)) + tuple(key[3:])


def summarize(records: Sequence[ExperimentRecord]) -> list:
    """Per-(N, epsilon, estimator) statistics, ordered N, then epsilon, then estimator."""
    if not records:
        raise ValueError("no records to summarize")
    groups = _group(records, lambda r: (r.n_total, r.epsilon, r.estimator))
    rows = []
    for key in sorted(groups, key=_order):
        # sort first so the float sums do not depend on record order
        v = np.sort(np.asarray(groups[key]))
        q1, med, q3 = np.percentile(v, [25, 50, 75])
        rows.append(SummaryRow(key[0], key[1], key[2], v.size, float(v.mean()), float(med),
                               float(q1), float(q3), float(v[0]), float(v[-1])))
    return rows


def outer_rep_means(records: Sequence[ExperimentRecord]) -> list:
    """Mean squared error per outer replicate: one alternative aggregation for the box plots."""
    groups = _group(records, lambda r: (r.n_total, r.epsilon, r.estimator, r.outer_rep))
    return [(key[0], key[1], key[2], key[3], float(np.mean(np.sort(groups[key]))))
            for key in sorted(groups, key=_order)]


def summary_to_csv(rows: Sequence[SummaryRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SUMMARY_HEADER)
    for r in rows:
        writer.writerow([r.n_total, _fmt(r.epsilon), r.estimator, r.count, _fmt(r.mean),
                         _fmt(r.median), _fmt(r.q1), _fmt(r.q3), _fmt(r.min), _fmt(r.max)])
    return buf.getvalue()


def read_summary(path) -> list:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        return [SummaryRow(int(r["n"]), float(r["epsilon"]), r["estimator"], int(r["count"]),
                           float(r["mean"]), float(r["median"]), float(r["q1"]), float(r["q3"]),
                           float(r["min"]), float(r["max"])) for r in reader]


def emit_plot_data(summary: Sequence[SummaryRow], path, render: bool = True):
    """Write the box-plot table to ``path`` (.csv) and a figure next to it (.svg).

    Boxes are grouped by (N, epsilon), ordered N-ascending then
    epsilon-ascending, with one box per estimator.
    """
    path = Path(path)
    data_path = path if path.suffix == ".csv" else path.with_suffix(".csv")
    rows = sorted(summary, key=lambda r: (r.n_total, r.epsilon, METHODS.index(r.estimator)))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("group", "n", "epsilon", "estimator", "whislo", "q1", "med", "q3", "whishi",
                     "mean", "count"))
    groups = []
    for r in rows:
        if not groups or groups[-1] != (r.n_total, r.epsilon):
            groups.append((r.n_total, r.epsilon))
        writer.writerow([len(groups) - 1, r.n_total, _fmt(r.epsilon), r.estimator, _fmt(r.min),
                         _fmt(r.q1), _fmt(r.median), _fmt(r.q3), _fmt(r.max), _fmt(r.mean), r.count])
    data_path.write_text(buf.getvalue(), encoding="utf-8", newline="")
    figure_path = data_path.with_suffix(".svg")
    if render:
        _render_boxes(rows, figure_path)
    return data_path, figure_path


def _render_boxes(rows, figure_path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "dpvb"
    ns = sorted({r.n_total for r in rows})
    colors = {"naive": "#d95f02", "vb": "#1b9e77", "bayes": "#7570b3"}
    fig, axes = plt.subplots(1, len(ns), figsize=(4 * len(ns), 4), squeeze=False, sharey=True)
    for ax, n in zip(axes[0], ns):
        sub = [r for r in rows if r.n_total == n]
        eps = sorted({r.epsilon for r in sub})
        stats, positions, facecolors = [], [], []
        for gi, e in enumerate(eps):
            for mi, method in enumerate(METHODS):
                for r in sub:
                    if r.epsilon == e and r.estimator == method:
                        stats.append({"med": r.median, "q1": r.q1, "q3": r.q3, "whislo": r.min,
                                      "whishi": r.max, "mean": r.mean, "fliers": []})
                        positions.append(gi * (len(METHODS) + 1) + mi)
                        facecolors.append(colors[method])
        boxes = ax.bxp(stats, positions=positions, patch_artist=True, showfliers=False)
        for patch, color in zip(boxes["boxes"], facecolors):
            patch.set_facecolor(color)
        ax.set_xticks([gi * (len(METHODS) + 1) + 1 for gi in range(len(eps))])
        ax.set_xticklabels([f"{e:g}" for e in eps])
        ax.set_yscale("log")
        ax.set_xlabel("epsilon")
        ax.set_title(f"N = {n}")
    axes[0][0].set_ylabel("squared error")
    handles = [plt.Rectangle((0, 0), 1, 1, color=colors[m]) for m in METHODS]
    fig.legend(handles, METHODS, loc="upper right")
    fig.tight_layout()
    fig.savefig(figure_path, format="svg", metadata={"Date": None})
    plt.close(fig)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    return asdict(cfg)
