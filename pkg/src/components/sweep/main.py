from argparse import ArgumentParser, Namespace

from core.config import load_config, parse_config
from core.ds_constants import get_output_root
from src.components.sweep.sweep import run_sweep


def add_arguments(parser: ArgumentParser) -> ArgumentParser:
    parser.add_argument("config", type=str, help="sweep config (yaml)")
    parser.add_argument("--axis", choices=["beta", "ablation"], default=None, help="overrides sweep.axis and drops sweep.grid")
    parser.add_argument("--values", nargs="+", default=None, help="overrides sweep.values")
    parser.add_argument("--seeds", nargs="+", type=int, default=None, help="overrides scenario.seeds")
    parser.add_argument("--workers", type=int, default=None, help="parallel runs, overrides sweep.workers")
    parser.add_argument("--out", type=str, default=None, help="output root, overrides DPA_OUTPUT_ROOT")
    return parser


def _coerce(value: str) -> float | str:
    try:
        return float(value)
    except ValueError:
        return value


def main(args: Namespace) -> int:
    cfg = load_config(args.config)
    doc = cfg.model_dump(mode="json")
    if args.axis is not None:
        doc["sweep"]["axis"] = args.axis
        doc["sweep"]["grid"] = []
    if args.values is not None:
        doc["sweep"]["values"] = [_coerce(v) for v in args.values]
    if args.seeds is not None:
        doc["scenario"]["seeds"] = args.seeds
    cfg = parse_config(doc)  # overrides get the same validation as the file

    root = get_output_root(args.out, cfg.output.root)
    run_sweep(cfg, root, workers=args.workers, progress=not getattr(args, "quiet", False))
    return 0


if __name__ == "__main__":
    raise SystemExit(main(add_arguments(ArgumentParser()).parse_args()))
