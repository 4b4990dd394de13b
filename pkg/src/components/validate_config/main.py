from argparse import ArgumentParser, Namespace

from src.components.validate_config.validate_config import validate_config


def add_arguments(parser: ArgumentParser) -> ArgumentParser:
    parser.add_argument("config", type=str, help="config (yaml) to check")
    return parser


def main(args: Namespace) -> int:
    print(validate_config(args.config), end="")
    return 0


if __name__ == "__main__":
    raise SystemExit(main(add_arguments(ArgumentParser()).parse_args()))
