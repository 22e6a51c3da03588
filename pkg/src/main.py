"""
Base-station geometry toolkit main entry point.

Subcommands: simulate, classify, fit, envelope, coverage, survey, kde, pipeline.
"""
from __future__ import annotations

import argparse
import contextlib
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from dotenv import load_dotenv

from src.analysis.classify import classify_pattern, estimate_hardcore, prejudge, survey_subregions
from src.analysis.summary import kernel_density, l_function
from src.fitting.cluster import fit_matern_cluster
from src.fitting.pseudolikelihood import ProfileGrid, fit_poisson, fit_profile
from src.ingestion.data_loader import ingest, ingest_with_report
from src.models.config import (
    ChannelConfig,
    McmcConfig,
    PipelineConfig,
    UserPlacement,
    default_g_grid,
    default_l_grid,
    default_thresholds_db,
    env_mcmc_steps,
    env_seed,
    pipeline_l_grid,
)
from src.models.pattern import PointPattern, Window, min_pair_distance
from src.models.processes import FittedModel, ModelSpec, family_class, preset, spec_from_dict
from src.radio.coverage import coverage_curve
from src.reporting.artifacts import (
    RunManifest,
    read_json,
    write_curve_csv,
    write_density_csv,
    write_envelope_csv,
    write_frame,
    write_json,
    write_pattern_csv,
)
from src.simulation.samplers import simulate
from src.utils import constants as C
from src.utils.errors import CellGeoError, StageError
from src.utils.rng import derive_seed
from src.validation.envelope import Statistic, build_envelope, simulate_replicates, test_curve

logger = logging.getLogger(__name__)

# first element of every derived seed path, one per pipeline stage
SEED_SIMULATE = 0
SEED_SURVEY = 1
SEED_ENVELOPE_L = 2
SEED_COVERAGE_OBSERVED = 3
SEED_ENVELOPE_COVERAGE = 4


# --- argument parsing helpers ------------------------------------------------

def parse_float_list(text: str) -> Tuple[float, ...]:
    """Comma list ``a,b,c`` or range ``start:stop:step`` (stop inclusive)."""
    try:
        if ":" in text:
            start, stop, step = (float(v) for v in text.split(":"))
            if step <= 0:
                raise ValueError
            n = int(np.floor((stop - start) / step + 1e-9)) + 1
            return tuple(float(start + i * step) for i in range(n))
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'a,b,c' or 'start:stop:step', got '{text}'") from None


def parse_int_list(text: str) -> Tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'") from None


def parse_families(text: str) -> Tuple[str, ...]:
    names = [v.strip() for v in text.split(",") if v.strip()]
    return tuple(family_class(n).family for n in names)


def parse_window(text: str) -> Window:
    try:
        x0, x1, y0, y1 = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'x_min,x_max,y_min,y_max', got '{text}'") from None
    return Window(x0, x1, y0, y1)


def parse_param(text: str) -> Tuple[str, str]:
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE, got '{text}'")
    key, value = text.split("=", 1)
    return key.strip(), value.strip()


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help=f"Master seed (fallback: ${C.ENV_SEED}, then 0)")
    p.add_argument("--out", dest="out_dir", type=Path, default=Path("out"), help="Output directory")
    p.add_argument("--plot", action="store_true", help="Also write PNG figures")
    p.add_argument("--log-level", default=None, help=f"Logging level (fallback: ${C.ENV_LOG_LEVEL}, then INFO)")


def _add_input(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", dest="input_path", type=Path, required=True, help="Station CSV file")
    p.add_argument("--mode", choices=("planar", "geographic"), default="planar")
    p.add_argument("--normalize", dest="normalize", action=argparse.BooleanOptionalAction, default=True,
                   help="Rescale the pattern to the unit square (default on)")


def _add_channel(p: argparse.ArgumentParser) -> None:
    p.add_argument("--thresholds", type=parse_float_list, default=default_thresholds_db(),
                   help="SINR thresholds in dB: 'a,b,c' or 'start:stop:step'")
    p.add_argument("--alpha-pathloss", type=float, default=C.DEFAULT_PATH_LOSS)
    p.add_argument("--sigma-shadow", type=float, nargs="?", const=C.DEFAULT_SHADOW_SIGMA_DB, default=0.0,
                   help=f"Lognormal shadowing sigma in dB; bare flag means {C.DEFAULT_SHADOW_SIGMA_DB:g}")
    p.add_argument("--noise", type=float, default=C.DEFAULT_NOISE)
    p.add_argument("--tx-power", type=float, default=C.DEFAULT_TX_POWER)
    p.add_argument("--no-rayleigh", dest="rayleigh", action="store_false", help="Disable Rayleigh fading")
    p.add_argument("--n-users", type=int, default=C.DEFAULT_N_USERS)


def _add_fit(p: argparse.ArgumentParser) -> None:
    p.add_argument("--families", type=parse_families, default=("poisson", "geyer", "matern_cluster"),
                   help="Comma list of families (aliases: ppp, sh, phcp, mcp)")
    p.add_argument("--r-grid", type=parse_float_list, default=PipelineConfig.r_grid)
    p.add_argument("--sat-grid", type=parse_int_list, default=PipelineConfig.sat_grid)
    p.add_argument("--hc-grid", type=parse_float_list, default=(),
                   help="Hard-core distances; default is the estimate from the data")


def _add_envelope(p: argparse.ArgumentParser, nsim: int = C.DEFAULT_NSIM, nrank: int = C.DEFAULT_NRANK) -> None:
    p.add_argument("--nsim", type=int, default=nsim)
    p.add_argument("--nrank", type=int, default=nrank)
    p.add_argument("--mcmc-steps", type=int, default=None, help=f"Chain length (fallback: ${C.ENV_MCMC_STEPS})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cellgeo", description="Point-process models of base-station layouts")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Draw a pattern from a model")
    _add_common(p)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--family", help="Process family")
    group.add_argument("--preset", help="Named fitted configuration, e.g. urban-mcp")
    p.add_argument("--param", type=parse_param, action="append", default=[], help="NAME=VALUE, repeatable")
    p.add_argument("--window", type=parse_window, default=Window.unit())
    p.add_argument("--mcmc-steps", type=int, default=None)

    p = sub.add_parser("classify", help="Clustered / repulsive pre-judgement")
    _add_common(p)
    _add_input(p)

    p = sub.add_parser("fit", help="Fit model families")
    _add_common(p)
    _add_input(p)
    _add_fit(p)

    p = sub.add_parser("envelope", help="Envelope test of fitted models")
    _add_common(p)
    _add_input(p)
    _add_fit(p)
    _add_envelope(p)
    _add_channel(p)
    p.add_argument("--model", type=Path, default=None, help="Model JSON to test instead of fitting --families")
    p.add_argument("--statistic", choices=("G", "K", "L", "coverage"), default="L")
    p.add_argument("--grid", type=parse_float_list, default=default_l_grid(), help="Distance grid for G/K/L")

    p = sub.add_parser("coverage", help="SINR coverage curve of a pattern")
    _add_common(p)
    _add_input(p)
    _add_channel(p)

    p = sub.add_parser("survey", help="Classify random subregions")
    _add_common(p)
    _add_input(p)
    p.add_argument("--n-subregions", type=int, default=1000)
    p.add_argument("--min-count", type=int, default=C.SURVEY_COUNT_RANGE[0])
    p.add_argument("--max-count", type=int, default=C.SURVEY_COUNT_RANGE[1])
    p.add_argument("--label", default=None, help="Region name in the output (default: input file stem)")

    p = sub.add_parser("kde", help="Kernel density map")
    _add_common(p)
    _add_input(p)
    p.add_argument("--bandwidth", type=float, default=None)
    p.add_argument("--nx", type=int, default=64)
    p.add_argument("--ny", type=int, default=64)

    p = sub.add_parser("pipeline", help="Ingest, classify, fit, test and summarize")
    _add_common(p)
    _add_input(p)
    _add_fit(p)
    _add_envelope(p, C.PIPELINE_NSIM, C.PIPELINE_NRANK)
    _add_channel(p)
    p.add_argument("--l-grid", type=parse_float_list, default=pipeline_l_grid())
    return parser


# --- building blocks shared by subcommands and the pipeline ------------------

def resolve_seed(seed: Optional[int]) -> int:
    if seed is not None:
        return seed
    from_env = env_seed()
    if from_env is not None:
        return from_env
    logger.info("No seed given; using 0")
    return 0


def mcmc_config(n_steps: Optional[int]) -> McmcConfig:
    return McmcConfig(n_steps=n_steps if n_steps is not None else env_mcmc_steps())


def channel_from_args(args: argparse.Namespace) -> ChannelConfig:
    return ChannelConfig(tx_power=args.tx_power, path_loss_alpha=args.alpha_pathloss, noise=args.noise,
                         shadowing_sigma=args.sigma_shadow, rayleigh=args.rayleigh)


def fit_family(pattern: PointPattern, family: str, r_grid: Sequence[float], sat_grid: Sequence[int],
               hc_grid: Sequence[float] = ()) -> FittedModel:
    """One family's fit by the method that suits it."""
    cls = family_class(family)
    if cls.family == "poisson":
        return fit_poisson(pattern)
    if cls.family == "matern_cluster":
        return fit_matern_cluster(pattern)
    hc = tuple(hc_grid) if hc_grid else ()
    if not hc and "h_c" in cls.irregular:
        hc = (estimate_hardcore(pattern),)
        logger.info("Hard-core distance estimated from data: %.6g", hc[0])
    grid = ProfileGrid(r=tuple(r_grid), h_c=hc, sat=tuple(sat_grid))
    return fit_profile(pattern, cls, grid)


def _figures(out_dir: Path) -> Path:
    return out_dir / "figures"


def envelope_test(fitted: FittedModel, observed, statistic: Statistic, grid: Sequence[float], nsim: int,
                  nrank: int, seed: int, mcmc: McmcConfig, out_dir: Path, stem: str,
                  plot: bool = False,
                  patterns: Optional[Sequence[PointPattern]] = None) -> Tuple[Dict, List[Path]]:
    """Build an envelope, test the observed curve, write CSV + JSON (+ PNG)."""
    env = build_envelope(fitted, statistic, grid, nsim, nrank, seed, mcmc, patterns=patterns)
    report = test_curve(observed, env, model=fitted.spec.family)
    payload = {"model": fitted.spec.to_dict(), "envelope": env.to_dict(), "test": report.to_dict()}
    files = [write_envelope_csv(env, out_dir / f"{stem}.csv", observed), write_json(payload, out_dir / f"{stem}.json")]
    if plot:
        from src.visualization.curve_plots import plot_envelope

        files.append(plot_envelope(env, observed, _figures(out_dir) / f"{stem}.png",
                                   title=f"{fitted.spec.family}: {statistic.kind}"))
    verdict = "rejected" if report.rejected else "not rejected"
    logger.info("%s %s test: %s (alpha=%.3g)", fitted.spec.family, statistic.kind, verdict, env.alpha)
    return report.to_dict(), files


# --- pipeline ----------------------------------------------------------------

@contextlib.contextmanager
def stage(manifest: RunManifest, name: str) -> Iterator[List[Path]]:
    """Collect a stage's files; on failure record it and re-raise with the stage tag."""
    files: List[Path] = []
    logger.info("Stage %s", name)
    try:
        yield files
    except CellGeoError as exc:
        logger.error("Stage %s failed: %s", name, exc)
        manifest.fail(name, exc)
        raise StageError(name, exc) from exc
    manifest.record(name, files)


def config_to_dict(config: PipelineConfig) -> Dict:
    data = asdict(config)
    data["input_path"] = str(config.input_path)
    data["out_dir"] = str(config.out_dir)
    return data


def run_pipeline(config: PipelineConfig) -> Dict:
    """
    Ingest, pre-judge, fit every family, test each against L and coverage
    envelopes and name the non-rejected models. Returns the summary.
    """
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(out, config.seed, config_to_dict(config))
    manifest.write()
    placement = config.placement

    with stage(manifest, "ingest") as files:
        pattern, report = ingest_with_report(config.input_path, config.mode, config.normalize)
        files.append(write_pattern_csv(pattern, out / "pattern.csv"))
        files.append(write_json({**report.to_dict(), "window": pattern.window.to_dict()}, out / "ingest.json"))

    with stage(manifest, "classify") as files:
        verdict = classify_pattern(pattern)
        pre = prejudge(pattern, config.g_grid, config.l_grid)
        files.append(write_json({
            "verdict": verdict.value,
            "n_points": pattern.n,
            "intensity": pattern.intensity(),
            "min_pair_distance": min_pair_distance(pattern),
            "hardcore_estimate": estimate_hardcore(pattern),
        }, out / "classification.json"))
        files.append(write_frame(pre, out / "prejudgement.csv"))
        if config.plot:
            from src.analysis.summary import g_function, k_function
            from src.visualization.curve_plots import plot_curve

            files.append(plot_curve(g_function(pattern, config.g_grid), _figures(out) / "prejudgement_G.png"))
            files.append(plot_curve(k_function(pattern, config.l_grid), _figures(out) / "prejudgement_K.png"))

    fits: Dict[str, FittedModel] = {}
    with stage(manifest, "fit") as files:
        for family in config.families:
            fitted = fit_family(pattern, family, config.r_grid, config.sat_grid, config.hc_grid)
            fits[fitted.spec.family] = fitted
            files.append(write_json(fitted.to_dict(), out / f"fit_{fitted.spec.family}.json"))

    results: Dict[str, Dict] = {name: {"model": f.spec.to_dict()} for name, f in fits.items()}
    # one set of draws per family serves both the L and the coverage envelope
    replicates: Dict[str, List[PointPattern]] = {}
    with stage(manifest, "envelope_L") as files:
        observed = l_function(pattern, config.l_grid)
        for i, (name, fitted) in enumerate(fits.items()):
            seed = derive_seed(config.seed, SEED_ENVELOPE_L, i)
            replicates[name] = simulate_replicates(fitted.spec, fitted.fit_window, config.nsim, seed, config.mcmc)
            report, written = envelope_test(fitted, observed, Statistic("L"), config.l_grid, config.nsim,
                                            config.nrank, seed, config.mcmc, out, f"envelope_L_{name}",
                                            config.plot, replicates[name])
            results[name]["L"] = report
            files.extend(written)

    with stage(manifest, "envelope_coverage") as files:
        stat = Statistic("coverage", config.channel, placement)
        observed = coverage_curve(pattern, config.thresholds_db, placement, config.channel,
                                  derive_seed(config.seed, SEED_COVERAGE_OBSERVED))
        files.append(write_curve_csv(observed, out / "coverage_observed.csv"))
        for i, (name, fitted) in enumerate(fits.items()):
            report, written = envelope_test(fitted, observed, stat, config.thresholds_db, config.nsim,
                                            config.nrank, derive_seed(config.seed, SEED_ENVELOPE_COVERAGE, i),
                                            config.mcmc, out, f"envelope_coverage_{name}", config.plot,
                                            replicates[name])
            results[name]["coverage"] = report
            files.extend(written)

    with stage(manifest, "summary") as files:
        for res in results.values():
            res["rejected"] = bool(res["L"]["rejected"] or res["coverage"]["rejected"])
        summary = {
            "verdict": verdict.value,
            "models": results,
            "non_rejected": [name for name, res in results.items() if not res["rejected"]],
        }
        files.append(write_json(summary, out / "summary.json"))

    if summary["non_rejected"]:
        logger.info("Models not rejected: %s", ", ".join(summary["non_rejected"]))
    else:
        logger.warning("Every fitted model was rejected")
    return summary


# --- subcommands -------------------------------------------------------------

def _spec_from_args(args: argparse.Namespace) -> ModelSpec:
    if args.preset:
        spec = preset(args.preset)
        overrides = dict(args.param)
        if overrides:
            data = {**spec.to_dict(), **overrides}
            spec = spec_from_dict(data)
        return spec
    return spec_from_dict({"family": args.family, **dict(args.param)})


def cmd_simulate(args: argparse.Namespace, seed: int) -> int:
    spec = _spec_from_args(args)
    pattern = simulate(spec, args.window, derive_seed(seed, SEED_SIMULATE), mcmc_config(args.mcmc_steps))
    write_pattern_csv(pattern, args.out_dir / "points.csv")
    write_json({"model": spec.to_dict(), "window": args.window.to_dict(), "seed": seed, "n_points": pattern.n},
               args.out_dir / "simulation.json")
    if args.plot:
        from src.visualization.curve_plots import plot_density

        plot_density(kernel_density(pattern), _figures(args.out_dir) / "points.png", pattern)
    print(f"Simulated {pattern.n} points from {spec.describe()}")
    return 0


def cmd_classify(args: argparse.Namespace, seed: int) -> int:
    pattern = ingest(args.input_path, args.mode, args.normalize)
    verdict = classify_pattern(pattern)
    grid = default_l_grid()
    write_json({"verdict": verdict.value, "n_points": pattern.n, "hardcore_estimate": estimate_hardcore(pattern)},
               args.out_dir / "classification.json")
    write_frame(prejudge(pattern, default_g_grid(), grid),
                args.out_dir / "prejudgement.csv")
    print(f"Pattern of {pattern.n} points is {verdict.value}")
    return 0


def cmd_fit(args: argparse.Namespace, seed: int) -> int:
    pattern = ingest(args.input_path, args.mode, args.normalize)
    for family in args.families:
        fitted = fit_family(pattern, family, args.r_grid, args.sat_grid, args.hc_grid)
        write_json(fitted.to_dict(), args.out_dir / f"fit_{fitted.spec.family}.json")
        print(f"{fitted.spec.describe()}")
    return 0


def cmd_envelope(args: argparse.Namespace, seed: int) -> int:
    pattern = ingest(args.input_path, args.mode, args.normalize)
    if args.model is not None:
        data = read_json(args.model)
        fitted = [FittedModel.from_dict(data) if "fit_window" in data
                  else FittedModel(spec_from_dict(data), pattern.window)]
    else:
        fitted = [fit_family(pattern, f, args.r_grid, args.sat_grid, args.hc_grid) for f in args.families]

    placement = UserPlacement(n_users=args.n_users)
    channel = channel_from_args(args)
    if args.statistic == "coverage":
        stat, grid = Statistic("coverage", channel, placement), args.thresholds
        observed = coverage_curve(pattern, grid, placement, channel, derive_seed(seed, SEED_COVERAGE_OBSERVED))
    else:
        stat, grid = Statistic(args.statistic), args.grid
        observed = stat.evaluate(pattern, grid)

    mcmc = mcmc_config(args.mcmc_steps)
    seed_stage = SEED_ENVELOPE_COVERAGE if args.statistic == "coverage" else SEED_ENVELOPE_L
    for i, model in enumerate(fitted):
        report, _ = envelope_test(model, observed, stat, grid, args.nsim, args.nrank, derive_seed(seed, seed_stage, i),
                                  mcmc, args.out_dir, f"envelope_{args.statistic}_{model.spec.family}", args.plot)
        state = "rejected" if report["rejected"] else "not rejected"
        print(f"{model.spec.family}: {state} (alpha={report['alpha']:.3g})")
    return 0


def cmd_coverage(args: argparse.Namespace, seed: int) -> int:
    pattern = ingest(args.input_path, args.mode, args.normalize)
    curve = coverage_curve(pattern, args.thresholds, UserPlacement(n_users=args.n_users), channel_from_args(args),
                           derive_seed(seed, SEED_COVERAGE_OBSERVED))
    write_curve_csv(curve, args.out_dir / "coverage.csv")
    if args.plot:
        from src.visualization.curve_plots import plot_curve

        plot_curve(curve, _figures(args.out_dir) / "coverage.png")
    print(f"Coverage over {len(curve.grid)} thresholds written to {args.out_dir / 'coverage.csv'}")
    return 0


def cmd_survey(args: argparse.Namespace, seed: int) -> int:
    pattern, report = ingest_with_report(args.input_path, args.mode, args.normalize)
    result = survey_subregions(pattern, args.n_subregions, (args.min_count, args.max_count),
                               seed=derive_seed(seed, SEED_SURVEY))
    label = args.label or Path(args.input_path).stem
    row = {
        "region": label,
        "point_count": pattern.n,
        "area": report.raw_window.area(),
        "clustered_pct": 100.0 * result.clustered_fraction,
        "repulsive_pct": 100.0 * result.repulsive_fraction,
        "n_classified": result.n_classified,
    }
    write_frame(pd.DataFrame([row]), args.out_dir / "survey.csv")
    write_json(result.to_dict(), args.out_dir / "survey.json")
    print(f"{label}: clustered {row['clustered_pct']:.1f}%, repulsive {row['repulsive_pct']:.1f}%")
    return 0


def cmd_kde(args: argparse.Namespace, seed: int) -> int:
    pattern = ingest(args.input_path, args.mode, args.normalize)
    density = kernel_density(pattern, args.bandwidth, args.nx, args.ny)
    write_density_csv(density, args.out_dir / "density.csv")
    if args.plot:
        from src.visualization.curve_plots import plot_density

        plot_density(density, _figures(args.out_dir) / "density.png", pattern)
    print(f"Density map {args.nx}x{args.ny}, bandwidth {density.bandwidth:.4g}")
    return 0


def cmd_pipeline(args: argparse.Namespace, seed: int) -> int:
    config = PipelineConfig(
        input_path=args.input_path,
        out_dir=args.out_dir,
        seed=seed,
        mode=args.mode,
        families=tuple(args.families),
        l_grid=tuple(args.l_grid),
        thresholds_db=tuple(args.thresholds),
        nsim=args.nsim,
        nrank=args.nrank,
        channel=channel_from_args(args),
        placement=UserPlacement(n_users=args.n_users),
        mcmc=mcmc_config(args.mcmc_steps),
        r_grid=tuple(args.r_grid),
        sat_grid=tuple(args.sat_grid),
        hc_grid=tuple(args.hc_grid),
        normalize=args.normalize,
        plot=args.plot,
    )
    summary = run_pipeline(config)
    print("Non-rejected models: " + (", ".join(summary["non_rejected"]) or "none"))
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "classify": cmd_classify,
    "fit": cmd_fit,
    "envelope": cmd_envelope,
    "coverage": cmd_coverage,
    "survey": cmd_survey,
    "kde": cmd_kde,
    "pipeline": cmd_pipeline,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """CLI wrapper; returns the process exit code so tests can call it directly."""
    load_dotenv()
    args = build_parser().parse_args(argv)
    level = (args.log_level or os.getenv(C.ENV_LOG_LEVEL) or "INFO").upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        seed = resolve_seed(args.seed)
        args.out_dir.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](args, seed)
    except CellGeoError as exc:
        logger.error("%s", exc)
        print(f"Error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
