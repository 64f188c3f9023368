"""
easyctrl: zero-convolution condition adapters for text-to-video latent diffusion
"""

__version__ = "0.1.0"
__license__ = "MIT"

# Import core components
from easyctrl.core import (
    VideoDataset,
    DataLoader,
    BatchStream,
    ScheduleConfig,
    NoiseSchedule,
    build_schedule,
    CodecConfig,
    encode_video,
    decode_video,
)

# Import models
from easyctrl.models import (
    UNetConfig,
    SpatioTemporalUNet,
    AdapterNet,
    build_unet,
    init_adapter_from_unet,
)

# Import conditions
from easyctrl.conditions import (
    Modality,
    ConditionMap,
    BaseConditionExtractor,
    get_extractor,
)

# Import generators
from easyctrl.generators import (
    SceneSpec,
    MovingShapesGenerator,
    DataConfig,
    make_dataset,
)

# Import pipeline stages
from easyctrl.training import TrainConfig, train_base, train_adapter
from easyctrl.sampling import SampleConfig, generate
from easyctrl.evaluation import EvalConfig, MetricsReport, eval_suite, run_ablation
from easyctrl.config import RunConfig, load_run_config

__all__ = [
    # Core
    'VideoDataset',
    'DataLoader',
    'BatchStream',
    'ScheduleConfig',
    'NoiseSchedule',
    'build_schedule',
    'CodecConfig',
    'encode_video',
    'decode_video',

    # Models
    'UNetConfig',
    'SpatioTemporalUNet',
    'AdapterNet',
    'build_unet',
    'init_adapter_from_unet',

    # Conditions
    'Modality',
    'ConditionMap',
    'BaseConditionExtractor',
    'get_extractor',

    # Generators
    'SceneSpec',
    'MovingShapesGenerator',
    'DataConfig',
    'make_dataset',

    # Pipeline
    'TrainConfig',
    'train_base',
    'train_adapter',
    'SampleConfig',
    'generate',
    'EvalConfig',
    'MetricsReport',
    'eval_suite',
    'run_ablation',
    'RunConfig',
    'load_run_config',
]
