from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime
from functools import partial
from pathlib import Path
import argparse
import logging
import time
import humanize
import numpy as np
import numpy.typing as npt
from tqdm import tqdm

from . import __version__
from .bayesopt import BoConfig, optimize
from .chemmap import circuit_to_molecule
from .circuit import (
    CircuitGrid, GatePolicy, sample_circuit, extend_circuit, read_circuits,
    write_circuits, count_rz, circuit_digest,
)
from .datasets import (
    Dataset, make_dataset, train_test, stratified_split, fit_scaler,
    apply_scaler,
)
from .errors import (
    QcmolError, ConfigurationError, DegenerateDataError, UnmappableOffsetError,
)
from .fingerprint import path_fingerprint, pca_fit, pca_project
from .gram_cache import GramCache
from .ledger import Ledger
from .manifest import (
    RunManifest, write_manifest, read_manifest, manifest_path,
)
from .molecule import LayoutSettings, describe_molecule, check_molecule
from .simulator import gram_matrix
from .stats import (
    Quadrant, quadrant_of, quadrant_split, median_thresholds, enrichment,
    enrichment_to_text,
    top_k, spearman_sign, bootstrap_band, silverman_bandwidth,
    write_densities, DensityEstimate, GRID_POINTS, GRID_REACH,
)
from .svm import (
    PerformanceLabel, SvmSettings, train_svm, predict, balanced_accuracy,
    label_performance,
)
from .utils import derive_seed, write_csv, read_csv, parse_float, fmt

log = logging.getLogger(__name__)

DESCRIBE_HEADER = ["id", "n_atoms", "r_min", "r_max", "pc1", "pc2", "flag"]
EVALUATE_HEADER = ["id", "n_rz", "val_accuracy", "accuracy", "label",
                   "trace_len", "theta", "flag"]
VALIDATION_FRACTION = 0.75
FEATURE_RANGE = "[0, pi]"


@dataclass(frozen=True)
class DescriptorSettings:
    max_path_len: int = 7
    width: int = 2048
    layout: LayoutSettings = field(default_factory=LayoutSettings)
    layout_seed: int = 0

    def check(self):
        if self.max_path_len < 1:
            raise ConfigurationError(
                f"--max-path-len must be >= 1, got {self.max_path_len}")
        if self.width < 16:
            raise ConfigurationError(
                f"--width must be >= 16, got {self.width}")
        if self.layout.bond_scale <= 0:
            raise ConfigurationError(
                f"--bond-scale must be positive, got {self.layout.bond_scale}")


def descriptor_settings(args: argparse.Namespace,
                        recorded: Optional[Dict[str, object]] = None
                        ) -> DescriptorSettings:
    """Flags given on the command line win over recorded ones."""
    recorded = recorded or {}
    default = DescriptorSettings()

    def pick(name: str, fallback):
        value = getattr(args, name, None)
        return recorded.get(name, fallback) if value is None else value

    settings = DescriptorSettings(
        max_path_len=int(pick("max_path_len", default.max_path_len)),
        width=int(pick("width", default.width)),
        layout=LayoutSettings(bond_scale=float(
            pick("bond_scale", default.layout.bond_scale))),
        layout_seed=int(pick("layout_seed", default.layout_seed)))
    settings.check()
    return settings


def _recorded_descriptors(described: Optional[Path]) -> Dict[str, object]:
    if described is None or not manifest_path(described).exists():
        return {}
    manifest = read_manifest(manifest_path(described))
    if manifest.command != "describe":
        return {}
    log.info("descriptor settings from %s", manifest_path(described))
    return manifest.settings


@dataclass
class RunContext:
    argv: List[str]
    workers: int = 1
    verbose: bool = False
    cache: Optional[GramCache] = None
    ledger: Optional[Ledger] = None


@dataclass(frozen=True)
class DescribedRow:
    id: int
    n_atoms: Optional[int]
    r_min: Optional[float]
    r_max: Optional[float]
    fingerprint: Optional[npt.NDArray] = None
    flag: str = ""


@dataclass(frozen=True)
class EvaluationRecord:
    id: int
    n_rz: int
    val_accuracy: Optional[float] = None
    accuracy: Optional[float] = None
    label: Optional[PerformanceLabel] = None
    trace_len: int = 0
    theta: Tuple[float, ...] = ()
    flag: str = ""


def _map(ctx: RunContext, fn: Callable, items: Sequence, desc: str) -> list:
    progress = partial(tqdm, total=len(items), desc=desc,
                       disable=not ctx.verbose)
    if ctx.workers <= 1 or len(items) < 2:
        return list(progress(map(fn, items)))
    chunk = max(1, len(items) // (4 * ctx.workers))
    with ProcessPoolExecutor(max_workers=ctx.workers) as pool:
        return list(progress(pool.map(fn, items, chunksize=chunk)))


def _settings(args: argparse.Namespace) -> Dict[str, object]:
    return {k: (str(v) if isinstance(v, Path) else v)
            for k, v in sorted(vars(args).items())
            if k not in ("func", "verbose")}


def _finish(args: argparse.Namespace, ctx: RunContext, started: float,
            inputs: Iterable[Path], outputs: Iterable[Path],
            seeds: Optional[Dict[str, int]] = None,
            extra: Optional[Dict[str, object]] = None,
            exit_code: int = 0) -> int:
    wall = time.monotonic() - started
    manifest = RunManifest(
        command=args.command, argv=ctx.argv, version=__version__,
        settings=_settings(args), seeds=seeds or {},
        inputs=[str(p) for p in inputs], outputs=[str(p) for p in outputs],
        extra=extra or {}, started=datetime.now().isoformat(),
        wall_clock=round(wall, 3), exit_code=exit_code)
    write_manifest(args.out, manifest)
    if ctx.ledger is not None:
        ctx.ledger.record(manifest)
    log.info("%s finished in %s (exit %d)", args.command,
             humanize.naturaldelta(wall), exit_code)
    return exit_code


def _policy(args: argparse.Namespace) -> GatePolicy:
    policy = GatePolicy(args.p_identity, args.p_rz, args.p_cnot,
                        args.delta_max)
    policy.check()
    return policy


def cmd_generate(args: argparse.Namespace, ctx: RunContext) -> int:
    started = time.monotonic()
    policy = _policy(args)
    inputs = []
    if args.extend_from is not None:
        inputs.append(args.extend_from)
        base = read_circuits(args.extend_from)
        grids = []
        for i, grid in enumerate(base):
            extra = args.layers - grid.n_layers
            if extra < 0:
                raise ConfigurationError(
                    f"circuit {i} already has {grid.n_layers} layers, "
                    f"more than --layers {args.layers}")
            seed = derive_seed(args.seed, circuit_digest(grid), args.layers,
                               i)
            grids.append(extend_circuit(grid, extra, policy, seed))
    else:
        if args.count < 0:
            raise ConfigurationError(f"--count {args.count} < 0")
        grids = [sample_circuit(args.qubits, args.layers, policy,
                                derive_seed(args.seed, i))
                 for i in range(args.count)]
    write_circuits(args.out, grids)
    log.info("wrote %d circuits to %s", len(grids), args.out)
    return _finish(args, ctx, started, inputs, [args.out],
                   seeds={"seed": args.seed})


def _describe_one(grid: CircuitGrid, settings: DescriptorSettings,
                  idx: int = 0) -> DescribedRow:
    try:
        mol = circuit_to_molecule(grid)
        problems = check_molecule(mol)
        if problems:
            raise QcmolError("; ".join(problems))
        summary = describe_molecule(mol, settings.layout,
                                    settings.layout_seed)
        fp = path_fingerprint(mol, settings.max_path_len, settings.width)
    except QcmolError as e:
        return DescribedRow(idx, None, None, None, None, flag=_flag(e))
    return DescribedRow(idx, len(mol), summary.r_min, summary.r_max, fp)


def _flag(e: QcmolError) -> str:
    if isinstance(e, UnmappableOffsetError):
        return "unmappable"
    return type(e).__name__.replace("Error", "").lower()


def _sibling(out: Path, suffix: str) -> Path:
    return out.with_name(out.stem + suffix)


def describe_circuits(grids: Sequence[CircuitGrid],
                      settings: DescriptorSettings,
                      ctx: RunContext) -> List[DescribedRow]:
    fn = partial(_describe_rows, settings=settings)
    rows = _map(ctx, fn, list(enumerate(grids)), "describe")
    for row in rows:
        if row.flag:
            log.warning("circuit %d: %s", row.id, row.flag)
    return rows


def _describe_rows(item: Tuple[int, CircuitGrid],
                   settings: DescriptorSettings) -> DescribedRow:
    idx, grid = item
    return _describe_one(grid, settings, idx)


def _pca_scores(rows: Sequence[DescribedRow]) -> Dict[int, List[float]]:
    ok = [r for r in rows if not r.flag]
    if len(ok) < 2:
        log.warning("fewer than two described circuits, no PCA scores")
        return {}
    data = np.stack([r.fingerprint for r in ok])
    k = min(2, *data.shape)
    try:
        model = pca_fit(data, k)
    except DegenerateDataError as e:
        log.warning("no PCA scores: %s", e)
        return {}
    scores = pca_project(model, data)
    return {r.id: list(s) for r, s in zip(ok, scores)}


def cmd_describe(args: argparse.Namespace, ctx: RunContext) -> int:
    started = time.monotonic()
    settings = descriptor_settings(args)
    grids = read_circuits(args.circuits)
    rows = describe_circuits(grids, settings, ctx)
    scores = _pca_scores(rows)

    def out_rows():
        for r in rows:
            pcs = scores.get(r.id, [])
            pcs = list(pcs) + [None] * (2 - len(pcs))
            yield [r.id, r.n_atoms, r.r_min, r.r_max, pcs[0], pcs[1], r.flag]

    write_csv(args.out, DESCRIBE_HEADER, out_rows())
    flagged = sum(1 for r in rows if r.flag)
    log.info("described %d circuits, %d flagged", len(rows), flagged)
    return _finish(args, ctx, started, [args.circuits], [args.out],
                   seeds={"layout_seed": settings.layout_seed},
                   extra={"flagged": flagged},
                   exit_code=2 if flagged else 0)


@dataclass(frozen=True)
class _Problem:
    fit_x: npt.NDArray
    fit_y: npt.NDArray
    val_x: npt.NDArray
    val_y: npt.NDArray
    bo: BoConfig
    svm: SvmSettings


def _svm_accuracy(grid: CircuitGrid, theta: npt.NDArray, train_x, train_y,
                  test_x, test_y, svm: SvmSettings,
                  cache: Optional[GramCache] = None) -> float:
    gram = gram_matrix(train_x, train_x, grid, theta, cache)
    model = train_svm(gram, train_y, svm.c, svm.tol, svm.max_iter)
    cross = gram_matrix(test_x, train_x, grid, theta, cache)
    return balanced_accuracy(predict(model, cross), test_y)


def _optimize_one(item: Tuple[int, CircuitGrid, int], problem: _Problem):
    idx, grid, seed = item
    try:
        def objective(theta):
            return _svm_accuracy(grid, theta, problem.fit_x, problem.fit_y,
                                 problem.val_x, problem.val_y, problem.svm)
        result = optimize(objective, count_rz(grid), problem.bo, seed)
    except QcmolError as e:
        return idx, None, _flag(e)
    return idx, result, ""


def evaluate_circuits(grids: Sequence[CircuitGrid], train: Dataset,
                      test: Dataset, bo: BoConfig, svm: SvmSettings,
                      seed: int, ctx: RunContext) -> List[EvaluationRecord]:
    fit, val = stratified_split(train, VALIDATION_FRACTION,
                                derive_seed(seed, 1))
    problem = _Problem(fit.features, fit.labels, val.features, val.labels,
                       bo, svm)
    items = [(i, g, derive_seed(seed, circuit_digest(g)))
             for i, g in enumerate(grids)]
    optimized = _map(ctx, partial(_optimize_one, problem=problem), items,
                     "optimize")
    records = []
    for (idx, result, flag), grid in zip(optimized, grids):
        if flag:
            log.warning("circuit %d: %s", idx, flag)
            records.append(EvaluationRecord(idx, count_rz(grid), flag=flag))
            continue
        try:
            acc = _svm_accuracy(grid, result.best_theta, train.features,
                                train.labels, test.features, test.labels,
                                svm, ctx.cache)
        except QcmolError as e:
            log.warning("circuit %d: %s", idx, e)
            records.append(EvaluationRecord(idx, count_rz(grid),
                                            flag=_flag(e)))
            continue
        records.append(EvaluationRecord(
            idx, count_rz(grid), result.best_value, acc,
            trace_len=len(result.trace),
            theta=tuple(float(t) for t in result.best_theta)))
    return records


def label_records(records: Sequence[EvaluationRecord], margin: float,
                  relative: bool,
                  reference: Optional[Sequence[float]] = None
                  ) -> List[EvaluationRecord]:
    ok = [r for r in records if not r.flag]
    if not ok:
        return list(records)
    labels = dict(zip((r.id for r in ok),
                      label_performance([r.accuracy for r in ok], margin,
                                        relative, reference)))
    return [r if r.flag else replace(r, label=labels[r.id]) for r in records]


def cmd_evaluate(args: argparse.Namespace, ctx: RunContext) -> int:
    started = time.monotonic()
    bo = BoConfig(budget=args.bo_budget, n_init=args.bo_init,
                  candidate_pool=args.bo_pool)
    bo.check()
    svm = SvmSettings(c=args.svm_c, tol=args.svm_tol)
    if svm.c <= 0:
        raise ConfigurationError(f"--svm-c must be positive, got {svm.c}")
    if args.margin < 0:
        raise ConfigurationError(f"--margin must be >= 0, got {args.margin}")
    grids = read_circuits(args.circuits)
    dataset = make_dataset(args.dataset, args.train_size + args.test_size,
                           args.seed)
    train, test = train_test(dataset, args.train_size, args.test_size,
                             args.seed)
    scaler = fit_scaler(train)
    train = Dataset(apply_scaler(scaler, train.features), train.labels,
                    train.name, train.seed)
    test = Dataset(apply_scaler(scaler, test.features), test.labels,
                   test.name, test.seed)
    log.info("dataset %s: %d train, %d test, %d features",
             dataset.name, len(train), len(test), dataset.dim)

    reference = None
    if args.reference_evaluated is not None:
        reference = read_accuracies(args.reference_evaluated)
        log.info("labelling against %d reference accuracies in %s",
                 len(reference), args.reference_evaluated)

    records = evaluate_circuits(grids, train, test, bo, svm, args.seed, ctx)
    records = label_records(records, args.margin,
                            args.margin_mode == "relative", reference)

    def out_rows():
        for r in records:
            yield [r.id, r.n_rz, r.val_accuracy, r.accuracy,
                   r.label.value if r.label else None,
                   r.trace_len if not r.flag else None,
                   " ".join(fmt(t) for t in r.theta), r.flag]

    write_csv(args.out, EVALUATE_HEADER, out_rows())
    flagged = sum(1 for r in records if r.flag)
    trace_lens = sorted({r.trace_len for r in records if not r.flag})
    inputs = [p for p in (args.circuits, args.reference_evaluated) if p]
    return _finish(args, ctx, started, inputs, [args.out],
                   seeds={"seed": args.seed,
                          "validation": derive_seed(args.seed, 1)},
                   extra={"flagged": flagged, "trace_lengths": trace_lens,
                          "feature_range": FEATURE_RANGE,
                          "dataset": dataset.name},
                   exit_code=2 if flagged else 0)


@dataclass(frozen=True)
class Described:
    id: int
    r_min: float
    r_max: float
    pc1: Optional[float]
    pc2: Optional[float]


def read_described(path: Path) -> List[Described]:
    rv = []
    for row in read_csv(path):
        if row.get("flag"):
            continue
        rv.append(Described(int(row["id"]), float(row["r_min"]),
                            float(row["r_max"]), parse_float(row["pc1"]),
                            parse_float(row["pc2"])))
    return rv


def read_labels(path: Path) -> Dict[int, PerformanceLabel]:
    return {int(row["id"]): PerformanceLabel(row["label"])
            for row in read_csv(path)
            if not row.get("flag") and row.get("label")}


def read_accuracies(path: Path) -> List[float]:
    rv = [float(row["accuracy"]) for row in read_csv(path)
          if not row.get("flag") and row.get("accuracy")]
    if not rv:
        raise DegenerateDataError(f"no accuracies in {path}")
    return rv


def _thresholds(args: argparse.Namespace,
                described: Sequence[Described]) -> Tuple[float, float]:
    if args.r_min_threshold is not None and args.r_max_threshold is not None:
        return args.r_min_threshold, args.r_max_threshold
    if not described:
        raise ConfigurationError(
            "thresholds need --described or explicit --r-*-threshold")
    med_min, med_max = median_thresholds(
        [(d.r_min, d.r_max) for d in described])
    return (med_min if args.r_min_threshold is None else args.r_min_threshold,
            med_max if args.r_max_threshold is None else args.r_max_threshold)


def _target_quadrant(args: argparse.Namespace) -> Quadrant:
    return Quadrant.high_high if args.quadrant == "high" else Quadrant.low_low


def _opposite(q: Quadrant) -> Quadrant:
    return Quadrant.low_low if q == Quadrant.high_high else Quadrant.high_high


def _write_enrichment(path: Path, selected: Sequence[int],
                      reference: Sequence[int],
                      labels: Dict[int, PerformanceLabel],
                      selected_rule: str, reference_rule: str) -> bool:
    high = [labels[i] for i in selected if i in labels]
    low = [labels[i] for i in reference if i in labels]
    if not high or not low:
        log.warning("no enrichment report: a group has no labelled circuits")
        return False
    report = enrichment(high, low, selected_rule, reference_rule)
    path.write_text(enrichment_to_text(report))
    log.info("enrichment ratio %.3f", report.ratio)
    return True


Accepted = List[Tuple[DescribedRow, CircuitGrid]]


def _fresh_search(args: argparse.Namespace, ctx: RunContext,
                  thresholds: Tuple[float, float],
                  settings: DescriptorSettings
                  ) -> Tuple[Accepted, Accepted, int]:
    policy = _policy(args)
    wanted = {_target_quadrant(args): args.sample,
              _opposite(_target_quadrant(args)): args.reference_sample}
    found: Dict[Quadrant, Accepted] = {q: [] for q in wanted}

    def short():
        return any(len(found[q]) < n for q, n in wanted.items())

    draws = 0
    while short() and draws < args.max_draws:
        batch = range(draws, min(args.max_draws,
                                  draws + max(args.sample, 64)))
        grids = [sample_circuit(args.qubits, args.layers, policy,
                                derive_seed(args.seed, i)) for i in batch]
        rows = describe_circuits(grids, settings, ctx)
        for i, row, grid in zip(batch, rows, grids):
            if row.flag:
                continue
            q = quadrant_of(row.r_min, row.r_max, *thresholds)
            if q in wanted and len(found[q]) < wanted[q]:
                found[q].append((DescribedRow(i, row.n_atoms, row.r_min,
                                              row.r_max), grid))
        draws = batch.stop
    accepted = found[_target_quadrant(args)]
    reference = found[_opposite(_target_quadrant(args))]
    log.info("fresh search: %d + %d of %d draws accepted", len(accepted),
             len(reference), draws)
    return accepted, reference, draws


def _rule(q: Quadrant, thresholds: Tuple[float, float]) -> str:
    op = ">" if q == Quadrant.high_high else "<="
    return f"{q.value} r_min{op}{thresholds[0]!r} r_max{op}{thresholds[1]!r}"


def _search_fresh(args: argparse.Namespace, ctx: RunContext,
                  described: Sequence[Described], started: float) -> int:
    if args.reference_sample is None:
        args.reference_sample = args.sample
    if min(args.sample, args.reference_sample) < 0:
        raise ConfigurationError("sample sizes must be >= 0")
    thresholds = _thresholds(args, described)
    settings = descriptor_settings(args, _recorded_descriptors(args.described))
    target = _target_quadrant(args)
    accepted, reference, draws = _fresh_search(args, ctx, thresholds,
                                               settings)
    if not accepted:
        raise DegenerateDataError(
            f"{args.quadrant} quadrant empty after {draws} draws")
    exit_code = 0
    if len(accepted) < args.sample:
        log.warning("only %d of %d circuits found in %d draws",
                    len(accepted), args.sample, draws)
        exit_code = 2
    if len(reference) < args.reference_sample:
        log.warning("only %d of %d reference circuits found in %d draws",
                    len(reference), args.reference_sample, draws)
    write_csv(args.out, ["id", "r_min", "r_max", "quadrant"],
              [[r.id, r.r_min, r.r_max, q.value]
               for q, group in ((target, accepted),
                                (_opposite(target), reference))
               for r, _ in group])
    circuits = _sibling(args.out, "_circuits.txt")
    reference_circuits = _sibling(args.out, "_reference_circuits.txt")
    write_circuits(circuits, [g for _, g in accepted])
    write_circuits(reference_circuits, [g for _, g in reference])
    extra = {"draws": draws, "r_min_threshold": thresholds[0],
             "r_max_threshold": thresholds[1],
             "rule": _rule(target, thresholds),
             "reference_rule": _rule(_opposite(target), thresholds),
             "accepted": len(accepted), "reference": len(reference),
             "bond_scale": settings.layout.bond_scale,
             "layout_seed": settings.layout_seed}
    return _finish(args, ctx, started,
                   [p for p in (args.described,) if p],
                   [args.out, circuits, reference_circuits],
                   seeds={"seed": args.seed}, extra=extra,
                   exit_code=exit_code)


def cmd_search(args: argparse.Namespace, ctx: RunContext) -> int:
    started = time.monotonic()
    described = read_described(args.described) if args.described else []
    if args.mode == "fresh":
        return _search_fresh(args, ctx, described, started)

    inputs = [p for p in (args.described, args.evaluated) if p]
    outputs = [args.out]
    extra: Dict[str, object] = {}
    target = _target_quadrant(args)
    if not described:
        raise ConfigurationError(f"--mode {args.mode} needs --described")
    records = [(d.r_min, d.r_max, d.id) for d in described]
    if args.mode == "top":
        if 2 * args.sample > len(records):
            raise ConfigurationError(
                f"--sample {args.sample} twice exceeds the "
                f"{len(records)} described circuits, groups would overlap")
        largest = args.quadrant == "high"
        chosen = top_k(records, args.sample, key=0, largest=largest)
        reference = top_k(records, args.sample, key=0, largest=not largest)
        rule = f"{'largest' if largest else 'smallest'} {args.sample} r_min"
        ref_rule = f"{'smallest' if largest else 'largest'} {args.sample} " \
                   "r_min"
        tag = "top"
    else:
        thresholds = _thresholds(args, described)
        groups = quadrant_split(records, *thresholds)
        pool = groups[target]
        if not pool:
            raise DegenerateDataError(f"{args.quadrant} quadrant is empty")
        rng = np.random.default_rng(args.seed)
        if len(pool) > args.sample:
            keep = np.sort(rng.choice(len(pool), args.sample, replace=False))
            pool = [pool[i] for i in keep]
        chosen = pool
        reference = groups[_opposite(target)]
        rule = _rule(target, thresholds)
        ref_rule = _opposite(target).value
        tag = target.value
        extra.update(r_min_threshold=thresholds[0],
                     r_max_threshold=thresholds[1])

    write_csv(args.out, ["id", "r_min", "r_max", "group"],
              ([rec[2], rec[0], rec[1], tag] for rec in chosen))
    if args.evaluated:
        report = _sibling(args.out, "_enrichment.txt")
        if _write_enrichment(report, [r[2] for r in chosen],
                             [r[2] for r in reference],
                             read_labels(args.evaluated), rule, ref_rule):
            outputs.append(report)
    extra["selected"] = len(chosen)
    return _finish(args, ctx, started, inputs, outputs,
                   seeds={"seed": args.seed}, extra=extra)


def cmd_enrich(args: argparse.Namespace, ctx: RunContext) -> int:
    started = time.monotonic()
    high = list(read_labels(args.high).values())
    low = list(read_labels(args.low).values())
    report = enrichment(high, low, args.high_rule, args.low_rule)
    args.out.parent.mkdir(exist_ok=True, parents=True)
    args.out.write_text(enrichment_to_text(report))
    log.info("enrichment ratio %.3f", report.ratio)
    return _finish(args, ctx, started, [args.high, args.low], [args.out],
                   extra={"ratio": report.ratio})


def _shared_grid(groups: Dict[str, npt.NDArray]) -> npt.NDArray:
    h = max(silverman_bandwidth(v) for v in groups.values())
    lo = min(v.min() for v in groups.values()) - GRID_REACH * h
    hi = max(v.max() for v in groups.values()) + GRID_REACH * h
    return np.linspace(lo, hi, GRID_POINTS)


def class_densities(values: Dict[str, Sequence[float]], n_boot: int,
                    seed: int) -> Dict[str, DensityEstimate]:
    groups = {}
    for name, v in values.items():
        if len(v) == 0:
            log.warning("no %s samples, density omitted", name)
            continue
        if len(v) < 5:
            raise DegenerateDataError(
                f"{len(v)} {name} samples, need at least 5 for a band")
        groups[name] = np.asarray(v, dtype=np.float64)
    if not groups:
        raise DegenerateDataError("no class has samples")
    grid = _shared_grid(groups)
    return {name: bootstrap_band(v, grid, n_boot=n_boot,
                                 seed=derive_seed(seed, i))
            for i, (name, v) in enumerate(groups.items())}


def _joined(described: Path, evaluated: Path):
    labels = read_labels(evaluated)
    return [(d, labels[d.id]) for d in read_described(described)
            if d.id in labels]


def cmd_report(args: argparse.Namespace, ctx: RunContext) -> int:
    started = time.monotonic()
    joined = _joined(args.described, args.evaluated)
    pca_out = _sibling(args.out, "_pca.csv")
    kde_out = _sibling(args.out, "_kde.csv")
    write_csv(pca_out, ["id", "pc1", "pc2", "label"],
              ([d.id, d.pc1, d.pc2, lab.value] for d, lab in joined))
    column = args.kde_column
    values = {p.name: [getattr(d, column) for d, lab in joined if lab == p]
              for p in (PerformanceLabel.performant,
                        PerformanceLabel.underperforming)}
    densities = class_densities(values, args.n_boot, args.seed)
    write_densities(kde_out, densities)
    args.out.parent.mkdir(exist_ok=True, parents=True)
    args.out.write_text("".join(f"{name} {len(values[name])}\n"
                                for name in values))
    return _finish(args, ctx, started, [args.described, args.evaluated],
                   [args.out, pca_out, kde_out], seeds={"seed": args.seed},
                   extra={"classes": sorted(densities)})


def depth_sign(described: Path, evaluated: Path) -> Tuple[int, List[float]]:
    pairs = [(d.r_min, lab) for d, lab in _joined(described, evaluated)
             if lab != PerformanceLabel.discarded]
    r_min = [p[0] for p in pairs]
    indicator = [1.0 if p[1] == PerformanceLabel.performant else 0.0
                 for p in pairs]
    performant = [r for r, ind in zip(r_min, indicator) if ind]
    return spearman_sign(r_min, indicator), performant


def cmd_transfer(args: argparse.Namespace, ctx: RunContext) -> int:
    started = time.monotonic()
    sign_a, perf_a = depth_sign(args.described5, args.evaluated5)
    sign_b, perf_b = depth_sign(args.described8, args.evaluated8)
    agree = sign_a == sign_b and sign_a != 0
    args.out.parent.mkdir(exist_ok=True, parents=True)
    args.out.write_text(f"sign_5 {sign_a}\nsign_8 {sign_b}\n"
                        f"agree {str(agree).lower()}\n")
    outputs = [args.out]
    try:
        densities = class_densities({"L5_performant": perf_a,
                                     "L8_performant": perf_b},
                                    args.n_boot, args.seed)
    except DegenerateDataError as e:
        log.warning("no transfer densities: %s", e)
    else:
        kde_out = _sibling(args.out, "_kde.csv")
        write_densities(kde_out, densities)
        outputs.append(kde_out)
    log.info("rank-correlation signs %d / %d", sign_a, sign_b)
    return _finish(args, ctx, started,
                   [args.described5, args.evaluated5, args.described8,
                    args.evaluated8], outputs, seeds={"seed": args.seed},
                   extra={"sign_5": sign_a, "sign_8": sign_b,
                          "agree": agree})

