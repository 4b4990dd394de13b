from argparse import ArgumentParser, Namespace

from src.components.export_figdata.export_figdata import export_figdata


def add_arguments(parser: ArgumentParser) -> ArgumentParser:
    parser.add_argument("inputs", nargs="+", help="metrics csv files or run directories")
    parser.add_argument("--out", type=str, required=True, help="directory for the series files")
    return parser


def main(args: Namespace) -> int:
    export_figdata(args.inputs, args.out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main(add_arguments(ArgumentParser()).parse_args()))
