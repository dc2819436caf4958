"""The entry point for coldta."""

###############################################################################
# coldta - cold-start drug-target affinity regression
# Licensed under the MIT License.
###############################################################################
from __future__ import annotations

import argparse
import sys

from coldta import __version__
from coldta.driver import Driver
from coldta.splitting import DEFAULT_RHO


def _fractions(text: str) -> tuple[float, ...]:
    """Parse `a,b,c` into floats."""
    try:
        return tuple(float(part) for part in text.split(","))
    except ValueError as err:
        msg = f"expected comma separated fractions, got '{text}'"
        raise argparse.ArgumentTypeError(msg) from err


def _add_data_arguments(parser: argparse.ArgumentParser, *, required: bool) -> None:
    parser.add_argument(
        "--data",
        type=str,
        required=required,
        help="Comma or tab separated file with drug_id, smiles, target_id, "
        "sequence and affinity columns.",
    )
    parser.add_argument(
        "--label",
        type=str,
        default=None,
        help="Only read manifest rows with this split_label.",
    )
    parser.add_argument(
        "--skip-bad-rows",
        action="store_true",
        help="Skip and report malformed rows instead of stopping.",
    )
    parser.add_argument(
        "--kd",
        dest="transform",
        action="store_const",
        const="pkd",
        default=None,
        help="The affinity column holds K_d in nM, convert it to pK_d.",
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coldta",
        description="Cold-start drug-target affinity regression.",
    )
    parser.add_argument(
        "--version",
        action="version",
        version=f"%(prog)s {__version__}",
    )
    parser.add_argument(
        "--log",
        action="store_true",
        help="Turn on debug logging.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    split = commands.add_parser("split", help="Split a dataset into a manifest.")
    _add_data_arguments(split, required=True)
    split.add_argument("--out", type=str, required=True, help="Manifest to write.")
    split.add_argument("--mode", choices=("cold", "random"), default="cold")
    split.add_argument("--seed", type=int, default=0)
    split.add_argument(
        "--rho",
        type=float,
        default=DEFAULT_RHO,
        help="Unseen ratio for drugs and targets.",
    )
    split.add_argument("--rho-drug", type=float, default=None)
    split.add_argument("--rho-target", type=float, default=None)
    split.add_argument(
        "--fractions",
        type=_fractions,
        default=(0.8, 0.1, 0.1),
        help="Train, val and test fractions for random mode, e.g. 0.8,0.1,0.1.",
    )

    train = commands.add_parser("train", help="Train a model.")
    train.add_argument("--config", type=str, default="", help="key = value file.")
    train.add_argument("--train", type=str, required=True, help="Training data.")
    train.add_argument(
        "--val",
        type=str,
        default="",
        help="Validation data, defaults to the training file.",
    )
    train.add_argument("--train-label", type=str, default=None)
    train.add_argument("--val-label", type=str, default=None)
    train.add_argument("--out", type=str, required=True, help="Output directory.")
    train.add_argument("--resume", type=str, default="", help="Checkpoint to resume.")
    train.add_argument("--seed", type=int, default=None)
    train.add_argument(
        "--drug-vocab",
        type=str,
        default="",
        help="Fixed SMILES character list, one per line.",
    )
    train.add_argument(
        "--target-vocab",
        type=str,
        default="",
        help="Fixed residue character list, one per line.",
    )
    train.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Override one config value, may be repeated.",
    )
    train.add_argument("--skip-bad-rows", action="store_true")
    train.add_argument(
        "--kd",
        dest="transform",
        action="store_const",
        const="pkd",
        default=None,
    )

    evaluate = commands.add_parser("eval", help="Score a checkpoint.")
    evaluate.add_argument("--checkpoint", type=str, required=True)
    _add_data_arguments(evaluate, required=True)
    evaluate.add_argument("--scenario", type=str, default="")
    evaluate.add_argument("--report", type=str, default="", help="Report to write.")

    predict = commands.add_parser("predict", help="Predict affinities.")
    predict.add_argument("--checkpoint", type=str, required=True)
    _add_data_arguments(predict, required=True)
    predict.add_argument("--out", type=str, required=True)

    salient = commands.add_parser("saliency", help="Residue saliency of one pair.")
    salient.add_argument("--checkpoint", type=str, required=True)
    salient.add_argument("--drug-id", type=str, required=True)
    salient.add_argument("--target-id", type=str, required=True)
    _add_data_arguments(salient, required=True)
    salient.add_argument("--out", type=str, default="")

    summary = commands.add_parser("aggregate", help="Summarize eval reports.")
    summary.add_argument("--reports", type=str, nargs="+", required=True)
    summary.add_argument("--out", type=str, default="")
    return parser


def _command_line_processing(argv: list[str] | None = None) -> Driver.Options:
    """Handle the command line."""
    args = _build_parser().parse_args(argv)
    values = {
        name: value
        for name, value in vars(args).items()
        if name in Driver.Options._fields and value is not None
    }
    for name in ("overrides", "reports", "fractions"):
        if name in values:
            values[name] = tuple(values[name])
    return Driver.Options(**values)


def main(argv: list[str] | None = None) -> int:
    """Start coldta."""
    opts: Driver.Options = _command_line_processing(argv)

    driver: Driver = Driver()

    result: int = driver.run(opts)

    return result


if __name__ == "__main__":
    res: int = main()
    sys.exit(res)
