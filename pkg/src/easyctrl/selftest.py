"""
In-process invariant suite on a toy configuration, run by ``easyctrl selftest``
"""
import logging
from typing import Callable, Dict

import numpy as np
import torch

from easyctrl.conditions.base import ConditionMap, Modality
from easyctrl.conditions.edges import canny_edges
from easyctrl.core.codec import CodecConfig, decode_video, encode_image, encode_video
from easyctrl.core.rng import standard_normal, stream
from easyctrl.core.schedule import build_schedule
from easyctrl.evaluation.metrics import optical_flow
from easyctrl.exceptions import ValidationError
from easyctrl.io.archive import decode_archive, encode_archive
from easyctrl.models.adapter import init_adapter_from_unet
from easyctrl.models.textenc import encode_text, tokenize
from easyctrl.models.unet import UNetConfig, build_unet
from easyctrl.sampling.sampler import SampleConfig, generate, videoinit

logger = logging.getLogger(__name__)

TOY_UNET = UNetConfig(num_blocks=2, channels=(8, 8), frames=2, latent_channels=12, sample_size=4,
                      text_dim=8, time_dim=8, heads=2)
TOY_CODEC = CodecConfig()
TOY_T = 20


def _require(ok: bool, message: str) -> None:
    if not ok:
        raise ValidationError(message)


def _image(seed: int, size: int) -> np.ndarray:
    return stream(seed, "scene", 0).random((size, size, 3)).astype(np.float32)


def check_schedule() -> None:
    sched = build_schedule(200, 1e-4, 0.02)
    identity = sched.alpha.astype(np.float64) ** 2 + sched.sigma.astype(np.float64) ** 2
    _require(np.max(np.abs(identity - 1.0)) <= 1e-6, "alpha^2 + sigma^2 drifts from 1")


def check_codec() -> None:
    video = torch.from_numpy(np.rint(_image(1, 8) * 255.0).astype(np.float32) / 255.0)
    video = video.permute(2, 0, 1).unsqueeze(0)
    _require(torch.equal(decode_video(encode_video(video, TOY_CODEC), TOY_CODEC), video),
             "codec round trip changed the video")


def check_zero_init() -> None:
    model = build_unet(TOY_UNET, seed=0)
    adapter = init_adapter_from_unet(model, TOY_UNET, TOY_CODEC.patch, seed=0)
    z = torch.from_numpy(standard_normal(stream(0, "noise", 0), (2, 12, 4, 4)))
    ctx = encode_text(torch.tensor(tokenize("a red square", TOY_UNET.max_tokens)), model.embed.text)
    c = torch.from_numpy(np.transpose(_image(2, 8), (2, 0, 1)).copy())
    with torch.no_grad():
        plain = model(z, 5, ctx)
        adapted = model(z, 5, ctx, adapter(z, 5, ctx, c))
    _require(torch.equal(plain, adapted), "fresh adapter changed the denoiser output")


def check_videoinit() -> None:
    image = encode_image(torch.from_numpy(np.transpose(_image(3, 8), (2, 0, 1)).copy()), TOY_CODEC)
    noise = torch.from_numpy(standard_normal(stream(3, "noise", 0), (2, 12, 4, 4), dtype=np.float64))
    _require(torch.allclose(videoinit(image, noise, 0.0), noise, atol=1e-5), "cutoff 0 did not return the noise")
    _require(torch.allclose(videoinit(image, noise, 1.0), image.expand_as(noise), atol=1e-5),
             "cutoff 1 did not return the image")


def check_canny() -> None:
    image = np.zeros((16, 16, 3), dtype=np.float32)
    image[:, 8:] = 1.0
    edges = canny_edges(image)
    columns = np.flatnonzero(edges.any(axis=0))
    _require(len(columns) == 1 and edges[:, columns[0]].all(), "step edge is not one full column")


def check_flow() -> None:
    frame = _image(4, 16)[:, :, 0]
    shifted = np.zeros_like(frame)
    shifted[:, 2:] = frame[:, :-2]
    flow = optical_flow(frame, shifted, block=4, radius=4)
    _require(np.all(flow[0, :, 1:3] == 0) and np.all(flow[1, :, 1:3] == 2), "flow did not recover a 2-pixel shift")


def check_archive() -> None:
    params = {"a.b": torch.arange(4, dtype=torch.float32).reshape(2, 2), "c": torch.tensor([7], dtype=torch.int64)}
    data = encode_archive(params)
    restored = decode_archive(data)
    _require(list(restored) == list(params), "archive changed the tensor order")
    _require(all(torch.equal(restored[k], v) and restored[k].dtype == v.dtype for k, v in params.items()),
             "archive changed a tensor")
    _require(encode_archive(restored) == data, "re-encoding the archive changed its bytes")


def check_ddim_determinism() -> None:
    model = build_unet(TOY_UNET, seed=0)
    model.eval()
    sched = build_schedule(TOY_T, 1e-4, 0.02)
    cfg = SampleConfig(steps=3, guidance=2.0, seed=7)
    cond = ConditionMap(Modality.RAW_PIXELS, _image(5, 8))
    first = generate(model, None, cond, "a blue circle", cfg, TOY_CODEC, sched)
    second = generate(model, None, cond, "a blue circle", cfg, TOY_CODEC, sched)
    _require(np.array_equal(first, second), "DDIM sampling is not deterministic")


CHECKS: Dict[str, Callable[[], None]] = {
    'schedule_variance_preserving': check_schedule,
    'codec_roundtrip': check_codec,
    'zero_init_identity': check_zero_init,
    'videoinit_endpoints': check_videoinit,
    'canny_step_edge': check_canny,
    'flow_shift_recovery': check_flow,
    'archive_roundtrip': check_archive,
    'ddim_determinism': check_ddim_determinism,
}


def run_selftest() -> Dict[str, bool]:
    """
    Run every check; a check passes when it returns without raising.

    Returns:
        Dict[str, bool]: Pass/fail per check name
    """
    results = {}
    for name, check in CHECKS.items():
        try:
            check()
            results[name] = True
            logger.info(f"selftest {name}: ok")
        except Exception as exc:
            results[name] = False
            logger.error(f"selftest {name}: FAILED ({type(exc).__name__}: {exc})")
    return results
