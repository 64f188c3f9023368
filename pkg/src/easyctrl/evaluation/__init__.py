"""
Metrics, evaluation reports and the conditioning ablation
"""

from easyctrl.evaluation.metrics import (
    optical_flow,
    avg_flow,
    psnr,
    first_frame_psnr,
    temporal_consistency,
)
from easyctrl.evaluation.suite import EvalConfig, VideoMetrics, MetricsReport, aggregate, eval_suite, load_report
from easyctrl.evaluation.ablation import SETTINGS, frame_diversity, run_ablation

__all__ = [
    'optical_flow',
    'avg_flow',
    'psnr',
    'first_frame_psnr',
    'temporal_consistency',
    'EvalConfig',
    'VideoMetrics',
    'MetricsReport',
    'aggregate',
    'eval_suite',
    'load_report',
    'SETTINGS',
    'frame_diversity',
    'run_ablation',
]
