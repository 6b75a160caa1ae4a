"""
Command-line interface.

    disjunct-bvs fit --input data.csv --delta 0.5 --seed 7
    disjunct-bvs select-delta --input data.csv --delta-grid 0.8,0.5,0.05,0
    disjunct-bvs synth --regime low --n-grid 100,1000 --repetitions 10
    disjunct-bvs bf --regime low --n-grid 10,50,100 --delta 0.5

Values are merged as: built-in default < ``DBVS_*`` environment < ``--config``
file < explicit flag. Reports are JSON on stdout or in ``--output``; ``synth``
and ``bf`` also write a long-format CSV next to the JSON output.

Exit codes: 0 success, 2 invalid input or configuration, 3 numerical failure.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

from disjunct_bvs import __version__
from disjunct_bvs.config import RunConfig, load_config_file
from disjunct_bvs.dataset import NormalizationInfo, prepare_regression_data, write_records_csv
from disjunct_bvs.exceptions import BVSError, ConfigurationError
from disjunct_bvs.gibbs import SampleStore, run_chain
from disjunct_bvs.model import RegressionData
from disjunct_bvs.models import (
    BayesFactorCell,
    BayesFactorRecord,
    BayesFactorReport,
    DeltaRecord,
    ModelFrequency,
    PosteriorReport,
    SelectionReport,
)
from disjunct_bvs.parallel import derive_seed
from disjunct_bvs.posterior import (
    estimate_mse_bma,
    inclusion_probabilities,
    posterior_mean_beta,
    select_delta,
    top_models,
)
from disjunct_bvs.synthetic import Regime, bf_growth_experiment, selection_benchmark

logger = logging.getLogger(__name__)

Report = Union[PosteriorReport, SelectionReport, BayesFactorReport]

# Namespace entries that are not RunConfig fields.
_PARSER_ONLY = ("config", "verbose", "handler")


def _float_list(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from e


def _int_list(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from e


# =============================================================================
# Commands
# =============================================================================


def _load(config: RunConfig) -> Tuple[RegressionData, Optional[NormalizationInfo]]:
    if config.input is None:
        raise ConfigurationError(f"{config.command} needs --input", config_key="input")
    return prepare_regression_data(
        config.input,
        response=config.response,
        log_response=config.log_response,
        interactions=config.interactions,
        normalize_data=config.normalize,
        response_variance=config.response_variance,
    )


def _posterior_report(
    config: RunConfig,
    prior: Dict[str, Any],
    data: RegressionData,
    info: Optional[NormalizationInfo],
    store: SampleStore,
    **extra: Any,
) -> PosteriorReport:
    names = data.column_names
    ranked = [
        ModelFrequency(
            indices=list(m.variables),
            variables=[names[j] for j in m.variables],
            frequency=m.frequency,
            count=m.count,
        )
        for m in top_models(store, config.top_k)
    ]
    return PosteriorReport(
        command=config.command,
        version=__version__,
        run_config=config.to_dict(),
        prior=prior,
        n=data.n,
        d=data.d,
        column_names=list(names),
        normalization=info.to_dict() if info is not None else None,
        retained_draws=store.retained_count,
        inclusion_probabilities=[float(p) for p in inclusion_probabilities(store)],
        posterior_mean_beta=[float(b) for b in posterior_mean_beta(store)],
        top_models=ranked,
        slice_acceptance_rate=store.slice_acceptance_rate,
        **extra,
    )


def cmd_fit(config: RunConfig) -> PosteriorReport:
    """Calibrate, run one chain at ``config.delta`` and summarize it."""
    data, info = _load(config)
    prior = config.prior_config()
    if prior.sigma0_2 is not None:
        logger.info("Calibrated sigma0_2=%.6g for delta=%g", prior.sigma0_2, prior.delta)
    store = run_chain(data, prior, config.sampler_settings())
    mse_bma = estimate_mse_bma(store) if prior.is_dirac else None
    return _posterior_report(config, prior.to_dict(), data, info, store, mse_bma=mse_bma)


def cmd_select_delta(config: RunConfig) -> PosteriorReport:
    """
    Run the delta sweep.

    The posterior summaries come from the delta=0 reference chain; the
    per-delta evaluations and the chosen model are listed next to them.
    """
    data, info = _load(config)
    prior = config.prior_config(0.0)
    selection = select_delta(
        data,
        config.delta_grid,
        prior,
        config.sampler_settings(),
        threshold=config.threshold,
        jobs=config.jobs,
    )
    names = data.column_names
    records = [
        DeltaRecord(
            delta=e.delta,
            indices=list(e.model),
            variables=[names[j] for j in e.model],
            size=e.size,
            mse_delta=e.mse_delta,
            expected_increase=e.expected_increase,
            slice_acceptance_rate=e.slice_acceptance_rate,
        )
        for e in selection.evaluations
    ]
    return _posterior_report(
        config,
        prior.to_dict(),
        data,
        info,
        selection.reference,
        mse_bma=selection.mse_bma,
        delta_records=records,
        selected_delta=selection.selected.delta,
        selected_model=list(selection.selected.model),
        selection_fallback=selection.fallback,
    )


def cmd_synth(config: RunConfig) -> SelectionReport:
    """F1 and selected-count benchmark over the n, eta and delta grids."""
    records, cells = selection_benchmark(
        Regime(config.regime),
        config.n_grid,
        config.eta_grid,
        config.delta_grid,
        config.repetitions,
        config.prior_config(0.0),
        config.sampler_settings(),
        eval_delta=config.eval_delta,
        with_selection=config.with_selection,
        threshold=config.threshold,
        jobs=config.jobs,
    )
    return SelectionReport(
        version=__version__,
        run_config=config.to_dict(),
        eval_delta=config.eval_delta,
        cells=cells,
        records=records,
    )


def cmd_bf(config: RunConfig) -> BayesFactorReport:
    """Bayes factor of the true model against the runner-up, both prior modes."""
    prior = config.prior_config()
    settings = config.sampler_settings()
    all_records: List[BayesFactorRecord] = []
    all_cells: List[BayesFactorCell] = []
    for k, eta in enumerate(config.eta_grid):
        records, cells = bf_growth_experiment(
            Regime(config.regime),
            config.n_grid,
            eta,
            config.repetitions,
            prior,
            settings.with_seed(derive_seed(settings.seed, k)),
            prior_correction=config.prior_correction,
            jobs=config.jobs,
        )
        all_records.extend(records)
        all_cells.extend(cells)
    return BayesFactorReport(
        version=__version__,
        run_config=config.to_dict(),
        delta=prior.delta,
        cells=all_cells,
        records=all_records,
    )


# =============================================================================
# Output
# =============================================================================


def _csv_row(record: Dict[str, Any]) -> Dict[str, Any]:
    return {
        key: " ".join(str(v) for v in value) if isinstance(value, list) else value
        for key, value in record.items()
    }


def write_report(report: Report, output: Optional[str]) -> None:
    """
    Write the JSON report to ``output`` (stdout when None).

    Reports with per-repetition ``records`` get a CSV mirror beside the JSON
    file, one row per record.
    """
    text = report.to_json()
    if output is None:
        sys.stdout.write(text)
        return

    path = Path(output)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        records = getattr(report, "records", None)
        if records is not None:
            csv_path = path.with_suffix(".csv")
            if csv_path == path:
                csv_path = path.with_name(path.name + ".csv")
            write_records_csv([_csv_row(r.model_dump(mode="json")) for r in records], csv_path)
    except OSError as e:
        raise ConfigurationError(f"Cannot write {path}: {e}", config_key="output") from e
    logger.info("Wrote %s", path)


# =============================================================================
# Parser
# =============================================================================


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="JSON file with RunConfig values")
    common.add_argument("--output", help="Report path (default: stdout)")
    common.add_argument(
        "-v", "--verbose", action="count", help="-v for progress, -vv for per-iteration detail"
    )

    prior = common.add_argument_group("prior")
    prior.add_argument("--mode", choices=("disjunct", "full"))
    prior.add_argument("--nu-r", type=float, help="Noise prior degrees of freedom")
    prior.add_argument("--eta-r2", type=float, help="Noise prior scale")
    prior.add_argument("--nu1", type=float, help="Slab variance prior degrees of freedom")
    prior.add_argument("--eta1-2", type=float, help="Slab variance prior scale")

    sampler = common.add_argument_group("sampler")
    sampler.add_argument("--iterations", type=int, help="Total sweeps per chain")
    sampler.add_argument("--burn-in", type=float, help="Fraction of sweeps discarded")
    sampler.add_argument("--thinning", type=int)
    sampler.add_argument("--seed", type=int, help="Unsigned 64-bit master seed")
    sampler.add_argument("--jobs", type=int, help="Worker processes for independent chains")
    return common


def _data_parser() -> argparse.ArgumentParser:
    data = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    group = data.add_argument_group("data")
    group.add_argument("--input", help="CSV with a header row")
    group.add_argument("--response", help="Response column (default: last column)")
    group.add_argument("--normalize", choices=("on", "off"))
    group.add_argument("--response-variance", type=float)
    group.add_argument("--log-response", action="store_true")
    group.add_argument("--interactions", action="store_true", help="Add squares and products")
    group.add_argument("--top-k", type=int, help="Models listed in the report")
    return data


def _bench_parser() -> argparse.ArgumentParser:
    bench = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    group = bench.add_argument_group("benchmark")
    group.add_argument("--regime", choices=("low", "high"))
    group.add_argument("--n-grid", type=_int_list, help="Comma-separated sample sizes")
    group.add_argument("--eta-grid", type=_float_list, help="Comma-separated noise half-widths")
    group.add_argument("--repetitions", type=int)
    return bench


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="disjunct-bvs",
        description="Bayesian variable selection with disjunct-support spike-and-slab priors",
        argument_default=argparse.SUPPRESS,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    common, data, bench = _common_parser(), _data_parser(), _bench_parser()

    def command(
        name: str, handler: Callable[[RunConfig], Report], parents: List[argparse.ArgumentParser]
    ) -> argparse.ArgumentParser:
        p = sub.add_parser(
            name,
            parents=parents,
            help=(handler.__doc__ or "").strip().splitlines()[0],
            argument_default=argparse.SUPPRESS,
        )
        p.set_defaults(handler=handler)
        return p

    fit = command("fit", cmd_fit, [common, data])
    fit.add_argument("--delta", type=float, help="Relevance threshold; 0 for the Dirac spike")

    select = command("select-delta", cmd_select_delta, [common, data])
    select.add_argument("--delta-grid", type=_float_list)
    select.add_argument(
        "--threshold", type=float, help="Largest accepted MSE increase; delta=0 scores 0"
    )

    synth = command("synth", cmd_synth, [common, bench])
    synth.add_argument("--delta-grid", type=_float_list)
    synth.add_argument("--eval-delta", type=float, help="Truth is {j : |beta_j| > eval_delta}")
    synth.add_argument("--with-selection", action="store_true")
    synth.add_argument("--threshold", type=float)

    bf = command("bf", cmd_bf, [common, bench])
    bf.add_argument("--delta", type=float)
    bf.add_argument("--no-prior-correction", dest="prior_correction", action="store_false")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Merge environment, config file and flags into one ``RunConfig``."""
    values: Dict[str, Any] = RunConfig.env_overrides()
    config_path = getattr(args, "config", None)
    if config_path is not None:
        values.update(load_config_file(config_path))
    values.update({k: v for k, v in vars(args).items() if k not in _PARSER_ONLY})
    if isinstance(values.get("normalize"), str):
        values["normalize"] = values["normalize"] == "on"
    return RunConfig.from_dict(values)


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity >= 2:
        level = logging.DEBUG
    logging.basicConfig(
        level=level,
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(getattr(args, "verbose", 0))
    try:
        config = resolve_config(args)
        write_report(args.handler(config), config.output)
    except BVSError as e:
        logger.debug("%s failed", args.command, exc_info=True)
        sys.stderr.write(json.dumps(e.to_dict(), sort_keys=True, default=str) + "\n")
        return e.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
