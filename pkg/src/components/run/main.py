from argparse import ArgumentParser, Namespace

from loguru import logger

from core.config import load_config
from core.ds_constants import get_output_root
from src.components.run.run import run_all


def add_arguments(parser: ArgumentParser) -> ArgumentParser:
    parser.add_argument("config", type=str, help="run config (yaml)")
    parser.add_argument("--seed", type=int, default=None, help="run only this seed")
    parser.add_argument("--out", type=str, default=None, help="output root, overrides DPA_OUTPUT_ROOT")
    return parser


def main(args: Namespace) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.model_copy(update={"scenario": cfg.scenario.model_copy(update={"seeds": [args.seed]})})
    root = get_output_root(args.out, cfg.output.root)
    logger.info(f"Run '{cfg.output.run_name}' for seeds {cfg.scenario.seeds} under '{root}'")
    run_all(cfg, root, progress=not getattr(args, "quiet", False))
    return 0


if __name__ == "__main__":
    raise SystemExit(main(add_arguments(ArgumentParser()).parse_args()))
