"""
Command-line interface: dataset generation, training, sampling, evaluation and self-test
"""
import argparse
import logging
import os
import sys
from typing import List, Optional, Sequence

import torch

from easyctrl.exceptions import FormatError, NumericalError, ValidationError

logger = logging.getLogger("easyctrl")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_VALIDATION = 2
EXIT_FORMAT = 3
EXIT_NUMERICAL = 4

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def parse_size(value: str) -> tuple:
    """Parse "HxW" into (H, W)."""
    try:
        height, width = (int(v) for v in value.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected HxW, got '{value}'")
    return height, width


def parse_seeds(value: str) -> List[int]:
    """Parse "0-7" or "0,3,5" into a seed list."""
    try:
        if "-" in value:
            start, stop = (int(v) for v in value.split("-"))
            return list(range(start, stop + 1))
        return [int(v) for v in value.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a seed range like 0-7 or a list like 0,3,5, got '{value}'")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="easyctrl", description="Condition adapters for text-to-video diffusion")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"],
                        help="Logging level")
    parser.add_argument("--no-progress", action="store_true", help="Disable progress bars")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="Write a synthetic moving-shapes dataset")
    p.add_argument("--out", required=True, help="Output directory")
    p.add_argument("--count", type=int, required=True, help="Number of samples")
    p.add_argument("--seed", type=int, default=0, help="Dataset seed")
    p.add_argument("--frames", type=int, default=None, help="Frames per clip")
    p.add_argument("--size", type=parse_size, default=None, help="Frame size HxW")
    p.add_argument("--still-fraction", type=float, default=None, help="Fraction of static clips")
    p.add_argument("--config", default=None, help="Run config JSON (data section)")
    p.set_defaults(handler=cmd_gen_data)

    p = sub.add_parser("train-base", help="Pretrain the text-to-video denoiser")
    p.add_argument("--data", required=True, help="Dataset directory or manifest")
    p.add_argument("--config", default=None, help="Run config JSON")
    p.add_argument("--out", required=True, help="Base checkpoint (.ezta)")
    p.add_argument("--log", default=None, help="JSONL training log")
    p.set_defaults(handler=cmd_train_base)

    p = sub.add_parser("train-adapter", help="Train a condition adapter on a frozen base")
    p.add_argument("--data", required=True, help="Dataset directory or manifest")
    p.add_argument("--base", required=True, help="Base checkpoint")
    p.add_argument("--modality", required=True, choices=["raw_pixels", "canny", "sketch", "depth", "segmask"])
    p.add_argument("--config", default=None, help="Run config JSON (defaults to the base checkpoint's)")
    p.add_argument("--freeze", default=None, choices=["spatial", "spatial_attn_only"], help="Freeze policy")
    p.add_argument("--out", required=True, help="Adapter checkpoint (.ezta)")
    p.add_argument("--log", default=None, help="JSONL training log")
    p.set_defaults(handler=cmd_train_adapter)

    p = sub.add_parser("sample", help="Generate a video")
    p.add_argument("--base", required=True, help="Base checkpoint")
    p.add_argument("--adapter", default=None, help="Adapter checkpoint")
    p.add_argument("--condition", default=None, help="Condition image (PPM)")
    p.add_argument("--prompt", required=True, help="Caption")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--guidance", type=float, default=None)
    p.add_argument("--videoinit-cutoff", type=float, default=None)
    p.add_argument("--videoinit-filter", default=None, choices=["ideal", "gaussian", "butterworth"])
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--adapter-scale", type=float, default=None)
    p.add_argument("--out", required=True, help="Output video directory")
    p.set_defaults(handler=cmd_sample)

    p = sub.add_parser("eval", help="Compute metrics over generated videos")
    p.add_argument("--videos", required=True, help="Video directory or directory of videos")
    p.add_argument("--ref-condition", default=None, help="Reference image (PPM) for first-frame PSNR")
    p.add_argument("--block", type=int, default=4)
    p.add_argument("--radius", type=int, default=4)
    p.add_argument("--out", required=True, help="report.json path")
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("ablate", help="Compare text only, condition only and text with condition")
    p.add_argument("--base", required=True, help="Base checkpoint")
    p.add_argument("--adapter", required=True, help="Adapter checkpoint")
    p.add_argument("--condition", required=True, help="Condition image (PPM)")
    p.add_argument("--prompt", required=True, help="Caption")
    p.add_argument("--seeds", type=parse_seeds, default=list(range(8)), help="Seeds, e.g. 0-7")
    p.add_argument("--out", required=True, help="Output directory")
    p.set_defaults(handler=cmd_ablate)

    p = sub.add_parser("selftest", help="Run the invariant suite on a toy configuration")
    p.set_defaults(handler=cmd_selftest)
    return parser


def _progress(args: argparse.Namespace) -> bool:
    return not args.no_progress


def cmd_gen_data(args: argparse.Namespace) -> int:
    from easyctrl.config import load_run_config
    from easyctrl.generators.writer import DataConfig, make_dataset

    data = load_run_config(args.config).data if args.config else DataConfig()
    overrides = {}
    if args.frames is not None:
        overrides['frames'] = args.frames
    if args.size is not None:
        overrides['height'], overrides['width'] = args.size
    if args.still_fraction is not None:
        overrides['still_fraction'] = args.still_fraction
    data = DataConfig.model_validate({**data.model_dump(), **overrides})
    make_dataset(args.count, args.seed, args.out, data, progress_bar=_progress(args))
    return EXIT_OK


def _load_data(path: str):
    from easyctrl.core.dataloader import DataLoader

    return DataLoader.from_manifest(path).load()


def cmd_train_base(args: argparse.Namespace) -> int:
    from easyctrl.checkpoint import save_base
    from easyctrl.config import load_run_config
    from easyctrl.core.schedule import NoiseSchedule
    from easyctrl.training.trainer import TrainConfig, train_base

    config = load_run_config(args.config)
    train_cfg = TrainConfig.model_validate({**config.train.model_dump(), 'stage': "base"})
    config = config.model_copy(update={'train': train_cfg})
    data = _load_data(args.data)
    result = train_base(data, train_cfg, config.unet, config.codec, NoiseSchedule.from_config(config.schedule),
                        progress_bar=_progress(args), log_path=args.log)
    save_base(args.out, result.model, config)
    return EXIT_OK


def cmd_train_adapter(args: argparse.Namespace) -> int:
    from easyctrl.checkpoint import load_base, save_adapter
    from easyctrl.config import load_run_config
    from easyctrl.core.schedule import NoiseSchedule
    from easyctrl.training.trainer import TrainConfig, train_adapter

    config = load_run_config(args.config) if args.config else None
    base = load_base(args.base)
    config = config or base.config
    if config.unet != base.config.unet or config.codec != base.config.codec:
        raise ValidationError("the run config's unet/codec sections differ from the base checkpoint's")
    overrides = {'stage': "adapter", 'modality': args.modality}
    if args.freeze is not None:
        overrides['freeze'] = args.freeze
    train_cfg = TrainConfig.model_validate({**config.train.model_dump(), **overrides})
    config = config.model_copy(update={'train': train_cfg})
    data = _load_data(args.data)
    result = train_adapter(data, base.model, train_cfg, config.unet, config.codec,
                           NoiseSchedule.from_config(config.schedule), progress_bar=_progress(args),
                           log_path=args.log)
    save_adapter(args.out, result.adapter, result.model, args.modality, config)
    return EXIT_OK


def _load_condition(path: str, modality):
    from easyctrl.conditions.base import ConditionMap
    from easyctrl.io.ppm import load_ppm

    return ConditionMap(modality=modality, data=load_ppm(path))


def cmd_sample(args: argparse.Namespace) -> int:
    from easyctrl.checkpoint import load_adapter_checkpoint, load_base
    from easyctrl.conditions.base import Modality
    from easyctrl.core.schedule import NoiseSchedule
    from easyctrl.sampling.sampler import SampleConfig, generate, save_sample

    if args.adapter and not args.condition:
        raise ValidationError("--adapter needs --condition")
    base = load_base(args.base)
    model, adapter, modality = base.model, None, Modality.RAW_PIXELS
    if args.adapter:
        checkpoint = load_adapter_checkpoint(args.adapter, base)
        model, adapter, modality = checkpoint.model, checkpoint.adapter, checkpoint.modality
    condition = _load_condition(args.condition, modality) if args.condition else None

    overrides = {
        'seed': args.seed,
        'steps': args.steps,
        'guidance': args.guidance,
        'videoinit_cutoff': args.videoinit_cutoff,
        'videoinit_filter': args.videoinit_filter,
        'eta': args.eta,
        'adapter_scale': args.adapter_scale,
    }
    cfg = SampleConfig.model_validate({
        **base.config.sample.model_dump(),
        **{k: v for k, v in overrides.items() if v is not None},
    })
    video = generate(model, adapter, condition, args.prompt, cfg, base.config.codec,
                     NoiseSchedule.from_config(base.config.schedule), progress_bar=_progress(args))
    save_sample(args.out, video, args.prompt, cfg, modality if condition is not None else None)
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    from easyctrl.conditions.base import Modality
    from easyctrl.evaluation.suite import EvalConfig, eval_suite

    ref = _load_condition(args.ref_condition, Modality.RAW_PIXELS) if args.ref_condition else None
    eval_suite(args.videos, ref, EvalConfig(block=args.block, radius=args.radius), out_path=args.out)
    return EXIT_OK


def cmd_ablate(args: argparse.Namespace) -> int:
    from easyctrl.checkpoint import load_adapter_checkpoint, load_base
    from easyctrl.core.schedule import NoiseSchedule
    from easyctrl.evaluation.ablation import run_ablation

    base = load_base(args.base)
    checkpoint = load_adapter_checkpoint(args.adapter, base)
    condition = _load_condition(args.condition, checkpoint.modality)
    summary = run_ablation(checkpoint.model, checkpoint.adapter, condition, args.prompt, args.seeds,
                           base.config.sample, base.config.codec, NoiseSchedule.from_config(base.config.schedule),
                           out_dir=args.out)
    logger.info(f"Ablation summary:\n{summary.to_string()}")
    return EXIT_OK


def cmd_selftest(args: argparse.Namespace) -> int:
    from easyctrl.selftest import run_selftest

    failures = [name for name, ok in run_selftest().items() if not ok]
    if failures:
        logger.error(f"Self-test failed: {', '.join(failures)}")
        return EXIT_FAILURE
    logger.info("Self-test passed")
    return EXIT_OK


def configure_threads() -> None:
    from easyctrl.core.streaming import THREADS_ENV, thread_count

    if os.environ.get(THREADS_ENV):
        torch.set_num_threads(thread_count())


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Entry point of the ``easyctrl`` command.

    Returns:
        int: 0 on success, 2 for validation errors, 3 for I/O and format errors, 4 for numerical aborts
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), format=LOG_FORMAT)
    configure_threads()
    try:
        return args.handler(args)
    except ValueError as exc:  # ValidationError and pydantic errors included
        logger.error(f"Invalid input: {exc}")
        return EXIT_VALIDATION
    except (FormatError, OSError) as exc:
        logger.error(f"I/O or format error: {exc}")
        return EXIT_FORMAT
    except NumericalError as exc:
        logger.error(f"Numerical failure: {exc}")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
