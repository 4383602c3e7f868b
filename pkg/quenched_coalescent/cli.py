"""
Command-line front end.

Every subcommand reads a :class:`~quenched_coalescent.config.RunConfig`,
writes CSV tables into the output directory and finishes with a
``manifest.json`` describing the run. Exit codes: 0 on success, 2 on a
configuration error, 3 if ``selftest`` finds a failing check.
"""

from __future__ import annotations

import argparse
import csv
import functools
import json
import math
import sys
from pathlib import Path
from typing import Any, Iterable, NamedTuple, Sequence

import daiquiri
import numpy as np
from joblib import Parallel, delayed
from scipy import stats

from . import __version__, streams
from .cannings_pedigree import (
    OffspringMatrix,
    Pedigree,
    WrightFisher,
    build_model,
    generation_paintbox,
    pair_coalescence_prob,
)
from .config import COMMANDS, RunConfig, load_config
from .exceptions import ConfigurationError, StatisticsError
from .formatting import format_float
from .genstats import (
    DEFAULT_HORIZON,
    BranchSpectrum,
    DeltaModel,
    SpectrumAccumulator,
    branch_spectrum,
    max_pairwise_tv,
    max_tv_to_pooled,
    mutation_spectrum,
    run_delta_experiment,
    sfs_estimate,
    variance_decomposition,
)
from .limit_coalescent import (
    Empirical,
    PsiPath,
    build_intensity,
    intensity_for_model,
    run_flow,
    run_jump_hold,
    run_naive,
    sample_psi,
)
from .paintbox import Paintbox, paintbox_prob
from .partitions import GroupedPartition, Partition, coarsenings, set_partitions
from .quenched_genealogy import aggregated_transition_prob, exact_step_law, init_sample, run_loci

logger = daiquiri.getLogger(__name__)

EXIT_CONFIG = 2
EXIT_SELFTEST = 3

DEFAULT_NAIVE_EPS = 0.1


def _cell(value: Any) -> str:
    if isinstance(value, (float, np.floating)):
        return format_float(float(value))
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    return str(value)


class _Output:
    """Output directory plus the facts that go into the manifest."""

    def __init__(self, config: RunConfig) -> None:
        self.config = config
        self.dir = Path(config.out)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.files: list[str] = []
        self.facts: dict[str, Any] = {}

    def path(self, name: str) -> Path:
        if name not in self.files:
            self.files.append(name)
        return self.dir / name

    def csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
        with open(self.path(name), "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(header)
            writer.writerows([_cell(v) for v in row] for row in rows)
        logger.info("wrote %s", self.dir / name)

    def text(self, name: str, text: str) -> None:
        self.path(name).write_text(text)
        logger.info("wrote %s", self.dir / name)

    def manifest(self) -> None:
        data = {
            "version": __version__,
            "command": self.config.command,
            "seed": self.config.seed,
            "config_digest": self.config.digest(),
            "parameters": self.config.parameters(),
            "files": sorted(self.files),
            **self.facts,
        }
        self.path("manifest.json")
        with open(self.dir / "manifest.json", "w") as f:
            json.dump(data, f, indent=2, sort_keys=True, default=str)
            f.write("\n")


def _pair_coalescence(config: RunConfig, model) -> tuple[float, dict[str, Any]]:
    exact = model.exact_pair_coalescence()
    facts: dict[str, Any] = {"exact": exact}
    if config.mc_reps or exact is None:
        reps = config.mc_reps or 2000
        est = pair_coalescence_prob(model, reps, streams.stream(config.seed, streams.ESTIMATE))
        facts.update(estimate=est.estimate, stderr=est.stderr, reps=est.reps)
    value = exact if exact is not None else facts["estimate"]
    facts["value"] = value
    return value, facts


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    values = values[np.isfinite(values)]
    if len(values) == 0:
        return math.nan, math.nan
    se = float(values.std(ddof=1) / math.sqrt(len(values))) if len(values) > 1 else math.nan
    return float(values.mean()), se


def _sfs_rows(estimate, pedigree_id, prefix=()):
    return [
        (*prefix, i, p, s, pedigree_id)
        for i, (p, s) in enumerate(zip(estimate.proportions, estimate.stderr), start=1)
    ]


def cmd_pedigree(config: RunConfig) -> int:
    """Sample a pedigree, export its table and report c_N."""
    out = _Output(config)
    model = build_model(config.model_spec())
    pedigree = Pedigree(model, config.seed)
    pedigree.export_table(out.path("pedigree.csv"), config.generations)
    rows = []
    for g in range(config.generations):
        v = pedigree.matrix(g)
        x = generation_paintbox(v)
        rows.append((g, int(v.totals().max()), x.norm, v.redraws))
    out.csv("generations.csv", ["generation", "max_offspring", "paintbox_norm", "redraws"], rows)
    c_N, facts = _pair_coalescence(config, model)
    out.facts["c_N"] = facts
    out.facts["pedigree_digest"] = pedigree.digest()
    out.manifest()
    return 0


def cmd_quenched(config: RunConfig) -> int:
    """Trace many loci through one shared pedigree."""
    out = _Output(config)
    model = build_model(config.model_spec())
    pedigree = Pedigree(model, config.seed)
    c_N, facts = _pair_coalescence(config, model)
    horizon = None if config.horizon is None else int(math.ceil(config.horizon / c_N))
    results = run_loci(pedigree, config.n, config.loci, config.seed, c_N, horizon, n_jobs=config.threads)
    spectra = [branch_spectrum(r.tree) for r in results]
    mrca = np.array([r.tree.mrca_time if r.tree.mrca_time is not None else np.nan for r in results])
    out.csv(
        "ttotal.csv",
        ["pedigree_id", "locus_id", "T_total", "mrca_time", "censored"],
        [(0, k, s.t_total, m, s.censored) for k, (s, m) in enumerate(zip(spectra, mrca))],
    )
    try:
        out.csv("sfs.csv", ["i", "proportion", "stderr", "pedigree_id"], _sfs_rows(sfs_estimate(spectra), 0))
    except StatisticsError as exc:
        logger.warning("no SFS written: %s", exc)
    if config.theta is not None:
        rows = []
        for k, s in enumerate(spectra):
            counts = mutation_spectrum(s, config.theta, streams.stream(config.seed, streams.REPLICATE, k))
            rows.extend((k, i, int(c)) for i, c in enumerate(counts, start=1))
        out.csv("mutations.csv", ["locus_id", "i", "count"], rows)
    if config.trajectories:
        out.text("trees.txt", "".join(f"# locus {k}\n{r.tree.to_text()}\n" for k, r in enumerate(results)))
    mean, se = _mean_se(mrca)
    out.facts.update(
        c_N=facts,
        pedigree_digest=pedigree.digest(),
        censored=int(sum(r.censored for r in results)),
        mrca_mean=mean,
        mrca_stderr=se,
        sfs_mode="branch-length" if config.theta is None else "branch-length+mutation",
    )
    out.manifest()
    return 0


class _Replicate(NamedTuple):
    index: int
    mrca_time: float
    spectrum: BranchSpectrum
    jumps: int
    text: str | None


def _intensity(config: RunConfig):
    if config.intensity is not None:
        spec = dict(config.intensity)
        if spec.get("name") in ("beta2", "beta4"):
            if config.alpha is not None:
                spec["alpha"] = config.alpha
            if config.eps is not None:
                spec["eps"] = config.eps
        return build_intensity(spec)
    intensity = intensity_for_model(build_model(config.model_spec()))
    if config.eps is not None and hasattr(intensity, "compensating_rate"):
        intensity = type(intensity)(intensity.alpha, config.eps)
    return intensity


def _limit_chunk(intensity, shared, c, n, sampler, seed, horizon, keep_text, indices) -> list[_Replicate]:
    runner = run_flow if sampler == "flow" else run_jump_hold
    out = []
    for r in indices:
        psi = shared if shared is not None else sample_psi(intensity, horizon, streams.stream(seed, streams.PSI, r))
        run = runner(psi, c, Partition.singletons(n), rng=streams.stream(seed, streams.REPLICATE, r), horizon=horizon)
        mrca = run.mrca_time if run.mrca_time is not None else math.nan
        out.append(_Replicate(r, mrca, branch_spectrum(run), len(run.times) - 1, run.to_text() if keep_text else None))
    return out


def _chunks(total: int, size: int = 64) -> list[range]:
    return [range(i, min(i + size, total)) for i in range(0, total, size)]


def _parallel(config: RunConfig, func, chunks, *args) -> list:
    if config.threads == 1:
        parts = [func(*args, c) for c in chunks]
    else:
        parts = Parallel(n_jobs=config.threads)(delayed(func)(*args, c) for c in chunks)
    return [item for part in parts for item in part]


def cmd_limit(config: RunConfig) -> int:
    """Run the (Psi, c)-coalescent for a catalog intensity or an imported path."""
    out = _Output(config)
    if config.psi_file is not None:
        if config.c_pair is None:
            raise ConfigurationError("an imported Psi path needs c_pair (--c-pair)")
        shared = PsiPath.read(config.psi_file)
        intensity = None
        c = config.c_pair
        horizon = config.horizon if config.horizon is not None else shared.horizon
    else:
        intensity = _intensity(config)
        c = config.c_pair if config.c_pair is not None else intensity.pair_rate
        horizon = config.horizon if config.horizon is not None else DEFAULT_HORIZON
        shared = sample_psi(intensity, horizon, streams.stream(config.seed, streams.PSI, 0)) if config.fixed_psi else None
    reps = _parallel(
        config,
        functools.partial(_limit_chunk, intensity, shared, c, config.n, config.sampler, config.seed),
        _chunks(config.replicates),
        horizon,
        config.trajectories,
    )
    first = shared if shared is not None else sample_psi(intensity, horizon, streams.stream(config.seed, streams.PSI, 0))
    first.write(out.path("psi.txt"))
    out.csv(
        "runs.csv",
        ["replicate", "mrca_time", "T_total", "jumps", "censored"],
        [(r.index, r.mrca_time, r.spectrum.t_total, r.jumps, r.spectrum.censored) for r in reps],
    )
    try:
        out.csv("sfs.csv", ["i", "proportion", "stderr", "pedigree_id"], _sfs_rows(sfs_estimate(r.spectrum for r in reps), 0))
    except StatisticsError as exc:
        logger.warning("no SFS written: %s", exc)
    if config.trajectories:
        out.text("events.txt", "".join(f"# replicate {r.index}\n{r.text}\n" for r in reps))
    mean, se = _mean_se(np.array([r.mrca_time for r in reps]))
    out.facts.update(
        c_pair=c,
        intensity=repr(intensity) if intensity is not None else f"file {config.psi_file}",
        compensating_rate=getattr(intensity, "compensating_rate", 0.0),
        eps_B=getattr(intensity, "eps", None),
        atom_rate=getattr(intensity, "atom_rate", getattr(intensity, "rate", None)),
        horizon=horizon,
        mrca_mean=mean,
        mrca_stderr=se,
        censored=int(sum(r.spectrum.censored for r in reps)),
    )
    out.manifest()
    return 0


def _naive_chunk(path, pedigree, eps, c_pair, c_N, n, seed, horizon, indices):
    rows = []
    xi0 = Partition.singletons(n)
    for r in indices:
        naive = run_naive(
            pedigree, eps, c_pair, c_N, xi0, rng=streams.stream(seed, streams.REPLICATE, r, 0), horizon=horizon, path=path
        )
        flow = run_flow(path, c_pair, xi0, rng=streams.stream(seed, streams.REPLICATE, r, 1))
        rows.append(
            (
                r,
                naive.mrca_time if naive.mrca_time is not None else math.nan,
                flow.mrca_time if flow.mrca_time is not None else math.nan,
                naive.censored,
                flow.censored,
            )
        )
    return rows


def cmd_naive(config: RunConfig) -> int:
    """Compare the epsilon-naive chain with the flow on the same pedigree."""
    out = _Output(config)
    model = build_model(config.model_spec())
    pedigree = Pedigree(model, config.seed)
    c_N, facts = _pair_coalescence(config, model)
    c_pair = config.c_pair if config.c_pair is not None else intensity_for_model(model).pair_rate
    eps = config.eps if config.eps is not None else DEFAULT_NAIVE_EPS
    horizon = config.horizon if config.horizon is not None else DEFAULT_HORIZON
    path = Empirical(pedigree, c_N, c_pair, eps).sample(horizon)
    logger.info("%d generations with paintbox norm >= %g among %d", len(path), eps, int(horizon / c_N))
    path.write(out.path("psi.txt"))
    rows = _parallel(
        config,
        _naive_chunk,
        _chunks(config.replicates),
        path,
        pedigree,
        eps,
        c_pair,
        c_N,
        config.n,
        config.seed,
        horizon,
    )
    out.csv("runs.csv", ["replicate", "naive_mrca", "flow_mrca", "naive_censored", "flow_censored"], rows)
    naive = np.array([r[1] for r in rows])
    flow = np.array([r[2] for r in rows])
    naive, flow = naive[np.isfinite(naive)], flow[np.isfinite(flow)]
    if len(naive) and len(flow):
        ks = stats.ks_2samp(naive, flow)
        out.facts["ks"] = {"statistic": float(ks.statistic), "pvalue": float(ks.pvalue)}
    out.facts.update(c_N=facts, c_pair=c_pair, eps=eps, glip_generations=len(path), pedigree_digest=pedigree.digest())
    out.manifest()
    return 0


def _grid(config: RunConfig, default: tuple[float, ...]) -> tuple[float, ...]:
    if config.psi_grid:
        return config.psi_grid
    return (config.psi,) if config.psi is not None else default


def _lambdas(config: RunConfig, default: tuple[float, ...]) -> tuple[float, ...]:
    if config.lambdas:
        return config.lambdas
    return (config.lam,) if config.lam is not None else default


def cmd_sfs(config: RunConfig) -> int:
    """Pedigree-wise site frequency spectra of the delta model."""
    out = _Output(config)
    sfs_rows, dispersion, ttotal = [], [], []
    for psi in _grid(config, (0.1, 0.5, 0.9)):
        for lam in _lambdas(config, (1e6, 1.0)):
            model = DeltaModel(psi, lam, config.time_unit)
            records = run_delta_experiment(
                model, config.n, config.pedigrees, config.loci, config.seed, config.threads, config.horizon
            )
            estimates = [r.sfs for r in records]
            pooled = functools.reduce(SpectrumAccumulator.merge, (r.spectra for r in records)).estimate()
            for r, est in zip(records, estimates):
                sfs_rows.extend(_sfs_rows(est, r.index, (psi, lam)))
                ttotal.extend((psi, lam, r.index, k, t) for k, t in enumerate(r.t_total))
            sfs_rows.extend(_sfs_rows(pooled, "pooled", (psi, lam)))
            props = [e.proportions for e in estimates]
            dispersion.append((psi, lam, max_pairwise_tv(props), max_tv_to_pooled(props, pooled.proportions)))
    out.csv("sfs.csv", ["psi", "lambda", "i", "proportion", "stderr", "pedigree_id"], sfs_rows)
    out.csv("ttotal.csv", ["psi", "lambda", "pedigree_id", "locus_id", "T_total"], ttotal)
    out.csv("sfs_dispersion.csv", ["psi", "lambda", "max_pairwise_tv", "max_tv_to_pooled"], dispersion)
    out.facts["sfs_mode"] = "branch-length"
    out.manifest()
    return 0


def cmd_vardecomp(config: RunConfig) -> int:
    """Split Var(T_total) into pedigree and locus parts over a psi grid."""
    out = _Output(config)
    rows, ttotal, annealed = [], [], []
    for lam in _lambdas(config, (1e6,)):
        fractions = []
        for psi in _grid(config, (0.1, 0.25, 0.5, 0.75, 1.0)):
            model = DeltaModel(psi, lam, config.time_unit)
            records = run_delta_experiment(
                model, config.n, config.pedigrees, config.loci, config.seed, config.threads, config.horizon
            )
            vd = variance_decomposition(
                model,
                config.n,
                config.pedigrees,
                config.loci,
                config.seed,
                config.total_pedigrees,
                config.threads,
                config.horizon,
                records=records,
            )
            rows.append(
                (
                    psi,
                    lam,
                    vd.total_var,
                    vd.within,
                    vd.between,
                    vd.between_direct,
                    vd.within_fraction,
                    vd.between_fraction,
                    vd.total_se,
                    vd.within_se,
                    vd.between_se,
                    vd.clamped,
                )
            )
            ttotal.extend((psi, lam, r.index, k, t) for r in records for k, t in enumerate(r.t_total))
            annealed.extend((psi, lam, k, t) for k, t in enumerate(vd.annealed))
            fractions.append(vd.between_fraction)
        if any(b < a - 0.05 for a, b in zip(fractions, fractions[1:])):
            logger.warning("pedigree-explained fraction not monotone in psi at lambda=%g: %s", lam, fractions)
    out.csv(
        "vardecomp.csv",
        [
            "psi",
            "lambda",
            "total",
            "within",
            "between",
            "between_direct",
            "within_fraction",
            "between_fraction",
            "total_se",
            "within_se",
            "between_se",
            "clamped",
        ],
        rows,
    )
    out.csv("ttotal.csv", ["psi", "lambda", "pedigree_id", "locus_id", "T_total"], ttotal)
    out.csv("annealed.csv", ["psi", "lambda", "replicate", "T_total"], annealed)
    out.manifest()
    return 0


def _check_wright_fisher(seed: int) -> tuple[bool, str]:
    model = WrightFisher(50)
    est = pair_coalescence_prob(model, 2000, streams.stream(seed, streams.ESTIMATE))
    gap = abs(est.estimate - est.exact)
    return gap < 4 * est.stderr, f"c_N={est.estimate:.6g} exact={est.exact:.6g} se={est.stderr:.2g}"


def _check_paintbox(seed: int) -> tuple[bool, str]:
    rng = streams.stream(seed, "selftest", 1)
    worst = 0.0
    for _ in range(5):
        w = rng.dirichlet(np.ones(4)) * rng.random()
        y = Paintbox(w)
        for groups in set_partitions(4):
            xi = Partition([[i + 1 for i in g] for g in groups])
            total = sum(paintbox_prob(y, xi, eta) for eta in coarsenings(xi))
            worst = max(worst, abs(total - 1.0))
    return worst < 1e-10, f"max normalization error {worst:.2g}"


def _check_oracle(seed: int) -> tuple[bool, str]:
    v = OffspringMatrix.from_dense([[0, 2, 0, 0], [2, 0, 1, 0], [0, 1, 0, 1], [0, 0, 1, 0]])
    xi = Partition.singletons(3)
    law = exact_step_law(v, init_sample(GroupedPartition.from_partition(xi), v.N))
    bad = [str(eta) for eta in coarsenings(xi) if law.get(eta, 0) != aggregated_transition_prob(v, xi, eta)]
    return not bad, "exact" if not bad else f"mismatch at {', '.join(bad)}"


def _check_delta_clock(seed: int) -> tuple[bool, str]:
    model = DeltaModel(1.0, math.inf)
    times = []
    for r in range(2000):
        pedigree = model.sample_pedigree(None, streams.stream(seed, streams.ANNEALED, r, 0))
        run = model.locus(pedigree, 2, streams.stream(seed, streams.ANNEALED, r, 1))
        times.append(run.mrca_time if run.mrca_time is not None else math.nan)
    mean, se = _mean_se(np.array(times))
    return abs(mean - 1.0) < 4 * se, f"E[T_MRCA]={mean:.4g} se={se:.2g}"


def _check_kingman(seed: int) -> tuple[bool, str]:
    psi = PsiPath.empty(math.inf, "kingman")
    times = np.array(
        [run_flow(psi, 1.0, Partition.singletons(3), rng=streams.stream(seed, "selftest", 2, r)).mrca_time for r in range(4000)]
    )
    mean, se = _mean_se(times)
    return abs(mean - 4.0 / 3.0) < 4 * se, f"E[T_MRCA]={mean:.4g} se={se:.2g}"


_CHECKS = {
    "wright-fisher-c_N": _check_wright_fisher,
    "paintbox-normalization": _check_paintbox,
    "transition-oracle": _check_oracle,
    "delta-pair-clock": _check_delta_clock,
    "kingman-mrca": _check_kingman,
}


def cmd_selftest(config: RunConfig) -> int:
    """Scaled-down consistency checks; exit code 3 on failure."""
    out = _Output(config)
    rows = []
    for name, check in _CHECKS.items():
        passed, detail = check(config.seed)
        (logger.info if passed else logger.error)("%s: %s (%s)", name, "ok" if passed else "FAILED", detail)
        rows.append((name, passed, detail))
    out.csv("selftest.csv", ["check", "passed", "detail"], rows)
    failed = [r[0] for r in rows if not r[1]]
    out.facts["failed"] = failed
    out.manifest()
    return EXIT_SELFTEST if failed else 0


_HANDLERS = {
    "pedigree": cmd_pedigree,
    "quenched": cmd_quenched,
    "limit": cmd_limit,
    "naive": cmd_naive,
    "sfs": cmd_sfs,
    "vardecomp": cmd_vardecomp,
    "selftest": cmd_selftest,
}


def _float(text: str) -> float:
    return math.inf if text.lower() in ("inf", "infinity") else float(text)


def add_common_arguments(parser: argparse.ArgumentParser) -> None:
    # defaults are None so that config-file values survive
    parser.add_argument("--config", default=None, help="TOML configuration file")
    parser.add_argument("--seed", type=int, default=None, help="master seed (required)")
    parser.add_argument("--threads", type=int, default=None, help="worker processes")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument(
        "--log-level",
        default=None,
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="log level (default WARNING)",
    )
    parser.add_argument("--n", type=int, default=None, help="sample size")
    parser.add_argument("--bigN", dest="N", type=int, default=None, help="population size")
    parser.add_argument("--model", default=None, help="Cannings model name")
    parser.add_argument("--psi", type=_float, default=None)
    parser.add_argument("--lambda", dest="lam", type=_float, default=None)
    parser.add_argument("--alpha", type=float, default=None)
    parser.add_argument("--gamma", type=float, default=None)
    parser.add_argument("--eps", type=float, default=None)
    parser.add_argument("--c-pair", dest="c_pair", type=float, default=None)
    parser.add_argument("--loci", type=int, default=None)
    parser.add_argument("--pedigrees", type=int, default=None)
    parser.add_argument("--replicates", type=int, default=None)
    parser.add_argument("--horizon", type=float, default=None, help="rescaled time horizon")
    parser.add_argument("--generations", type=int, default=None, help="generations in the pedigree table")
    parser.add_argument("--mc-reps", dest="mc_reps", type=int, default=None, help="Monte Carlo draws for c_N")
    parser.add_argument("--theta", type=float, default=None, help="mutation rate for integer spectra")
    parser.add_argument("--sampler", choices=["flow", "jump-hold"], default=None)
    parser.add_argument("--psi-file", dest="psi_file", default=None, help="import a Psi path")
    parser.add_argument("--fixed-psi", dest="fixed_psi", action="store_true", default=None)
    parser.add_argument("--trajectories", action="store_true", default=None, help="dump event lists")
    parser.add_argument("--time-unit", dest="time_unit", choices=["pair", "kingman"], default=None)
    parser.add_argument("--psi-grid", dest="psi_grid", type=float, nargs="+", default=None)
    parser.add_argument("--lambdas", type=_float, nargs="+", default=None)
    parser.add_argument("--total-pedigrees", dest="total_pedigrees", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quenched-coalescent", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        add_common_arguments(subparsers.add_parser(name, help=_HANDLERS[name].__doc__))
    return parser


def main(args=None) -> int:
    parser = build_parser()
    args = parser.parse_args(args)
    log_output = daiquiri.output.Stream(
        sys.stderr,
        formatter=daiquiri.formatter.ColorFormatter(fmt="[%(levelname)s] %(message)s"),
    )
    daiquiri.setup(level=args.log_level or "WARNING", outputs=[log_output])
    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    try:
        config = load_config(args.command, args.config, overrides)
        return _HANDLERS[args.command](config)
    except ConfigurationError as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG
