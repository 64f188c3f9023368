"""
Tests for the run configuration.
"""
import json

import pytest

from easyctrl.config import RunConfig, load_run_config
from easyctrl.exceptions import FormatError


def test_defaults_are_consistent():
    """Test that the default configuration passes the cross-section checks."""
    config = load_run_config()
    assert config == RunConfig()
    assert config.unet.sample_size * config.codec.patch == config.data.height
    assert config.schedule.T == 200


def test_load_from_file(tmp_path):
    """Test reading a partial JSON document over the defaults."""
    path = tmp_path / "run.json"
    path.write_text(json.dumps({'train': {'steps': 5}, 'sample': {'guidance': 1.5}}))
    config = load_run_config(str(path))
    assert config.train.steps == 5 and config.sample.guidance == 1.5
    assert config.data == RunConfig().data


@pytest.mark.parametrize("payload", [
    {'unet': {'latent_channels': 27}},
    {'data': {'frames': 4}},
    {'data': {'height': 48, 'width': 48}},
    {'sample': {'steps': 500}},
    {'train': {'unknown_key': 1}},
    {'extra_section': {}},
])
def test_inconsistent_configs_rejected(payload):
    """Test that mismatched sections and unknown keys raise ValueError."""
    with pytest.raises(ValueError):
        RunConfig.model_validate(payload)


def test_invalid_json_reports_offset(tmp_path):
    """Test that malformed JSON raises FormatError with the byte offset."""
    path = tmp_path / "broken.json"
    path.write_text('{"train": {"steps": }')
    with pytest.raises(FormatError) as info:
        load_run_config(str(path))
    assert info.value.offset == 20
