"""
Command-line interface: simulate | impute | estimate | mc.

Exit codes: 0 success, 2 invalid input or configuration, 3 numerical failure,
4 I/O error.
"""
import argparse
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import structlog

from estimators.centrality import centrality_ols, row_normalize
from estimators.peer_effects import peer_covariates, peer_effects_gmm, simulate_peer_outcomes
from models.network import CovariateSet, GraphonSpec, ImputedNetwork, LatentSet, Network
from models.request import IMPUTATION_METHODS
from models.response import CentralityEstimate, PeerEffectsEstimate
from netmodel.formation import generate_world
from netmodel.sampling import egocentric_sample
from orchestrator.montecarlo import node_centrality, rmse_missing_block, run_experiment
from utils.errors import BundleError, NumericalError
from utils.logging import bind_run_context, configure_logging
from utils.random import derive_seed, stream

from .bundle import DataBundle, bundle_from_network, load_bundle, save_bundle, write_key_values, write_matrix
from .config import Settings, load_settings, parse_floats, parse_names
from .dependencies import get_imputer

logger = structlog.get_logger()

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

ESTIMATION_MODELS = ("centrality-degree", "centrality-eigen", "peer-effects")
OUTCOME_MODELS = ("none",) + ESTIMATION_MODELS


def _shared_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--seed", type=int, default=None, help="Root seed (default: 0)")
    shared.add_argument("--threads", type=int, default=None, help="Worker cap; never changes results")
    shared.add_argument("--config", default=None, help="Flat key=value configuration file")
    shared.add_argument("--out", default="out", help="Output directory (default: out)")
    shared.add_argument("--log-level", dest="log_level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    shared.add_argument("--debug", action="store_true", default=None, help="Console log rendering")
    return shared


def _add_impute_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--method", choices=IMPUTATION_METHODS, default=None, help="Imputation method")
    parser.add_argument("--h-grid", dest="h_grid", default=None, help="'auto' or comma-separated bandwidths")
    parser.add_argument("--undersmooth", type=float, default=None, help="Bandwidth multiplier in (0, 1]")
    parser.add_argument(
        "--first-stage",
        dest="first_stage",
        choices=["auto", "local-linear", "linear-projection"],
        default=None,
        help="Covariate first stage",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="egonet-impute",
        description="Impute missing links of egocentrically sampled networks",
    )
    shared = _shared_parser()
    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    simulate = subparsers.add_parser("simulate", parents=[shared], help="Write a synthetic bundle")
    simulate.add_argument("--nodes", dest="n_nodes", type=int, default=None, help="Nodes per network")
    simulate.add_argument("--phi", type=float, default=0.4, help="Sampling rate (default: 0.4)")
    simulate.add_argument("--bundles", type=int, default=1, help="Independent networks to write (default: 1)")
    simulate.add_argument("--beta", default=None, help="Comma-separated homophily coefficients")
    simulate.add_argument("--outcomes", choices=OUTCOME_MODELS, default="none", help="Outcome model")
    simulate.add_argument("--noiseless", action="store_true", default=None, help="Zero outcome shocks")

    impute = subparsers.add_parser("impute", parents=[shared], help="Impute the missing block of a bundle")
    impute.add_argument("bundle", help="Bundle directory")
    _add_impute_flags(impute)

    estimate = subparsers.add_parser("estimate", parents=[shared], help="Downstream estimation on imputed networks")
    estimate.add_argument("bundles", nargs="+", help="Bundle directories, one per network (cluster)")
    _add_impute_flags(estimate)
    estimate.add_argument("--model", choices=ESTIMATION_MODELS, default=None, help="Downstream model")
    estimate.add_argument("--weight", choices=["identity"], default=None, help="GMM weighting")
    estimate.add_argument(
        "--undersmooth-sweep",
        dest="undersmooth_sweep",
        default=None,
        help="Comma-separated multipliers, one estimate each",
    )

    mc = subparsers.add_parser("mc", parents=[shared], help="Run a Monte Carlo experiment")
    mc.add_argument(
        "--experiment",
        choices=["imputation", "centrality-degree", "centrality-eigen", "peer-effects"],
        default=None,
    )
    mc.add_argument("--replications", type=int, default=None)
    mc.add_argument("--replication-offset", dest="replication_offset", type=int, default=None)
    mc.add_argument("--nodes", dest="n_nodes", type=int, default=None)
    mc.add_argument("--networks", dest="n_networks", type=int, default=None)
    mc.add_argument("--phi", dest="phi_list", default=None, help="Comma-separated sampling rates")
    mc.add_argument("--methods", default=None, help="Comma-separated method names")
    mc.add_argument("--beta", default=None)
    mc.add_argument("--noiseless", action="store_true", default=None)
    _add_impute_flags(mc)

    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    fields = Settings.model_fields
    return {key: value for key, value in vars(args).items() if key in fields and value is not None}


def _shock(rng: np.random.Generator, sd: float, size: Optional[int] = None) -> Any:
    if sd <= 0:
        return 0.0 if size is None else np.zeros(size)
    return rng.normal(0.0, sd, size=size)


def _simulate_outcomes(
    kind: str,
    settings: Settings,
    cov: CovariateSet,
    lat: LatentSet,
    net: Network,
    rng: np.random.Generator,
) -> Tuple[Optional[np.ndarray], Optional[np.ndarray]]:
    if kind == "none":
        return None, None
    n = net.n_nodes
    if kind == "peer-effects":
        effect_sd, noise_sd = settings.peer_effect_sd, settings.peer_noise_sd
    else:
        effect_sd, noise_sd = settings.centrality_effect_sd, settings.centrality_noise_sd
    if settings.noiseless:
        effect_sd, noise_sd = 0.0, 0.0
    u, e = _shock(rng, effect_sd), _shock(rng, noise_sd, n)

    if kind == "peer-effects":
        W = peer_covariates(cov, lat)
        return simulate_peer_outcomes(row_normalize(net.adj), W, settings.peer_parameters(), u, e), W
    alpha_0, alpha_1 = parse_floats(settings.centrality_alpha)
    phi, _ = node_centrality(net.adj, kind)
    return alpha_0 + alpha_1 * phi + u + e, None


def cmd_simulate(args: argparse.Namespace, settings: Settings) -> int:
    """Write one bundle, or --bundles of them in numbered subdirectories."""
    if args.bundles < 1:
        raise ValueError("--bundles must be at least 1")
    out = Path(args.out)
    spec = GraphonSpec(beta=parse_floats(settings.beta))
    n = settings.n_nodes
    n_sampled = int(round(args.phi * n))

    for m in range(args.bundles):
        cov, lat, prob, net = generate_world(n, spec, derive_seed(settings.seed, "simulate", m))
        pn = egocentric_sample(net, n_sampled, derive_seed(settings.seed, "simulate-sample", m))
        outcomes, W = _simulate_outcomes(
            args.outcomes, settings, cov, lat, net, stream(settings.seed, "simulate-outcomes", m)
        )
        bundle = bundle_from_network(net.adj, pn.sampled, cov.X, outcomes, W, prob.P)
        save_bundle(bundle, out if args.bundles == 1 else out / f"network_{m:03d}")

    logger.info("simulate_complete", out=str(out), bundles=args.bundles, n_nodes=n, n_sampled=n_sampled)
    return EXIT_OK


def _scalar_metadata(imputed: ImputedNetwork) -> Dict[str, Any]:
    keep = ("first_stage", "h_star", "h_used", "cv_pairs", "rank", "k", "references", "anchors")
    return {key: imputed.metadata[key] for key in keep if key in imputed.metadata}


def cmd_impute(args: argparse.Namespace, settings: Settings) -> int:
    """Write imputed.csv, provenance.csv and metadata.txt."""
    bundle = load_bundle(args.bundle)
    pn, cov = bundle.partial_network(), bundle.covariate_set()
    imputed = get_imputer(settings).execute(pn, cov)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_matrix(out / "imputed.csv", imputed.A_hat)
    write_matrix(out / "provenance.csv", imputed.provenance)

    metadata: Dict[str, Any] = {
        "method": imputed.method,
        "seed": settings.seed,
        "node_count": bundle.node_count,
        "n_sampled": pn.n_sampled,
        "d_x": cov.d_x,
        "imputed_pairs": imputed.imputed_count,
        "fallback_pairs": imputed.fallback_pairs,
        "rejected_edges": bundle.rejected_edges,
    }
    if imputed.bandwidth is not None:
        metadata["bandwidth"] = imputed.bandwidth
    metadata.update(_scalar_metadata(imputed))
    truth = bundle.probability_matrix()
    if truth is not None and pn.unsampled.size >= 2:
        metadata["rmse_missing_block"] = rmse_missing_block(imputed, truth, pn.sampled)
    write_key_values(out / "metadata.txt", metadata)

    logger.info("impute_complete", out=str(out), method=imputed.method, fallback_pairs=imputed.fallback_pairs)
    return EXIT_OK


def _estimate(
    model: str, weight: str, bundles: List[DataBundle], networks: List[ImputedNetwork]
) -> Union[CentralityEstimate, PeerEffectsEstimate]:
    for bundle in bundles:
        if bundle.outcomes is None:
            raise BundleError("outcomes.csv is required for estimation")
        if model == "peer-effects" and bundle.peer_covariates is None:
            raise BundleError("peer_covariates.csv is required for the peer-effects model")

    if model == "peer-effects":
        data = [
            (row_normalize(net.A_hat), bundle.peer_covariates, bundle.outcomes)
            for bundle, net in zip(bundles, networks)
        ]
        return peer_effects_gmm(data, weight=weight)

    centralities = [node_centrality(net.A_hat, model)[0] for net in networks]
    return centrality_ols([bundle.outcomes for bundle in bundles], centralities)


def cmd_estimate(args: argparse.Namespace, settings: Settings) -> int:
    """Write estimate.txt; with a sweep, keys are prefixed by u<multiplier>."""
    bundles = [load_bundle(path) for path in args.bundles]
    multipliers = settings.undersmooth_multipliers()

    results: Dict[str, Any] = {
        "model": settings.model,
        "method": settings.method,
        "weight": settings.weight,
        "n_networks": len(bundles),
        "seed": settings.seed,
    }
    for multiplier in multipliers:
        imputer = get_imputer(settings, undersmooth=multiplier)
        networks = [imputer.execute(b.partial_network(), b.covariate_set()) for b in bundles]
        estimate = _estimate(settings.model, settings.weight, bundles, networks)
        prefix = "" if len(multipliers) == 1 else f"u{multiplier:g}."
        results.update({f"{prefix}{key}": value for key, value in estimate.as_dict().items()})
        results[f"{prefix}fallback_pairs"] = sum(net.fallback_pairs for net in networks)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_key_values(out / "estimate.txt", results)
    for key, value in results.items():
        print(f"{key}={value}")

    logger.info("estimate_complete", out=str(out), model=settings.model, multipliers=multipliers)
    return EXIT_OK


def cmd_mc(args: argparse.Namespace, settings: Settings) -> int:
    """Write report.csv and metadata.txt and print the report table."""
    cfg = settings.experiment_config()
    report = run_experiment(cfg)
    frame = report.to_frame()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    frame.to_csv(out / "report.csv", index=False, float_format="%.17g", lineterminator="\n")
    write_key_values(
        out / "metadata.txt",
        {
            "experiment": cfg.experiment,
            "seed": cfg.seed,
            "replications": cfg.replications,
            "replication_offset": cfg.replication_offset,
            "n_nodes": cfg.n_nodes,
            "n_networks": cfg.n_networks,
            "phi_list": ",".join(f"{phi:g}" for phi in cfg.phi_list),
            "methods": ",".join(parse_names(settings.methods)),
        },
    )
    print(frame.to_string(index=False))

    logger.info("mc_complete", out=str(out), wall_clock_seconds=round(report.wall_clock_seconds, 2))
    return EXIT_OK


COMMANDS: Dict[str, Callable[[argparse.Namespace, Settings], int]] = {
    "simulate": cmd_simulate,
    "impute": cmd_impute,
    "estimate": cmd_estimate,
    "mc": cmd_mc,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        return EXIT_INVALID

    try:
        settings = load_settings(args.config, _overrides(args))
        configure_logging(settings.log_level, settings.debug)
        bind_run_context(command=args.command, seed=settings.seed)
        return COMMANDS[args.command](args, settings)
    except NumericalError as e:
        error, code = e, EXIT_NUMERICAL
    except ValueError as e:
        error, code = e, EXIT_INVALID
    except OSError as e:
        error, code = e, EXIT_IO

    logger.error(
        "command_failed",
        command=args.command,
        error=str(error),
        error_type=type(error).__name__,
        exit_code=code,
    )
    print(f"error: {error}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
