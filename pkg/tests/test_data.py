"""
Tests for the synthetic scene generator, dataset writer, loader and streaming helpers.
"""
import os

import numpy as np
import pytest

from easyctrl.core.dataloader import MANIFEST_NAME, DataLoader
from easyctrl.core.dataset import VideoDataset
from easyctrl.core.streaming import THREADS_ENV, BatchStream, ordered_map, thread_count
from easyctrl.exceptions import ValidationError
from easyctrl.generators.shapes import (
    BACKGROUND,
    COLORS,
    MovingShapesGenerator,
    SceneSpec,
    caption_of,
    direction_of,
    gen_scene,
    render_video,
    shape_stencil,
)
from easyctrl.generators.writer import DataConfig, make_dataset


def _tree_bytes(root):
    out = {}
    for dirpath, _, files in os.walk(root):
        for name in files:
            path = os.path.join(dirpath, name)
            with open(path, "rb") as f:
                out[os.path.relpath(path, root)] = f.read()
    return out


def test_gen_scene_deterministic():
    """Test that a scene seed fully determines the scene."""
    assert gen_scene(11) == gen_scene(11)
    assert any(gen_scene(11) != gen_scene(s) for s in range(12, 20))


def test_gen_scene_stays_in_frame():
    """Test that every drawn trajectory keeps the shape inside the frame."""
    for seed in range(200):
        spec = gen_scene(seed, 16, 16, 8)
        assert spec.in_bounds(16, 16, 8)
        assert 6 <= spec.size <= 12
        assert 0.2 <= spec.depth <= 0.8
        assert spec.vel[0] * spec.vel[1] == 0


def test_gen_scene_rejects_small_frames():
    """Test that frames under 16 pixels raise ValidationError."""
    with pytest.raises(ValidationError):
        gen_scene(0, 8, 32)


def test_directions_are_balanced():
    """Test that each motion direction covers 25% +- 5% of 2000 seeded scenes."""
    counts = {"right": 0, "left": 0, "up": 0, "down": 0}
    for seed in range(2000):
        counts[direction_of(gen_scene(seed, 32, 32, 8))] += 1
    for direction, count in counts.items():
        assert 0.20 <= count / 2000 <= 0.30, f"{direction}: {count}"


def test_still_probability_one():
    """Test that still_prob=1 gives static scenes captioned as staying still."""
    for seed in range(10):
        spec = gen_scene(seed, still_prob=1.0)
        assert spec.vel == (0.0, 0.0)
        assert caption_of(spec).endswith("staying still")


def test_position_rounds_half_to_even():
    """Test that positions round half to even."""
    spec = SceneSpec(shape="square", pos0=(0.5, 1.5), vel=(1.0, 0.0))
    assert spec.position(0) == (0, 2)
    assert spec.position(1) == (2, 2)


def test_render_video_pixels():
    """Test the rendered background, shape color and masks."""
    spec = SceneSpec(shape="square", color="green", size=4, pos0=(2.0, 5.0), vel=(3.0, 0.0))
    scene = render_video(spec, 16, 16, 3)
    assert scene.video.shape == (3, 3, 16, 16) and scene.video.dtype == np.float32
    assert np.all(scene.video[0, :, 0, 0] == np.float32(BACKGROUND))
    assert np.array_equal(scene.video[2, :, 5, 8], np.asarray(COLORS["green"], dtype=np.float32))
    assert scene.masks[2, 5:9, 8:12].all() and scene.masks[2].sum() == 16
    assert scene.depth[0, 5, 2] > 0 and scene.depth[0, 0, 0] == 0


def test_stencils():
    """Test the square, circle and triangle stencils."""
    assert shape_stencil("square", 6).all()
    circle = shape_stencil("circle", 8)
    assert circle[4, 4] and not circle[0, 0]
    triangle = shape_stencil("triangle", 8)
    assert triangle[7].sum() > triangle[1].sum()
    with pytest.raises(ValidationError):
        shape_stencil("hexagon", 4)


def test_captions():
    """Test captions for each dominant direction and for empty scenes."""
    assert direction_of(SceneSpec(vel=(-2.0, 1.0))) == "left"
    assert direction_of(SceneSpec(vel=(0.0, -1.5))) == "up"
    assert caption_of(SceneSpec(shape="circle", color="blue", vel=(0.0, 2.0))) == "a blue circle moving down"
    assert caption_of(SceneSpec()) == ""


def test_generator_examples():
    """Test example ids, seeds and captions."""
    generator = MovingShapesGenerator(seed=5, height=16, width=16, frames=4)
    data = generator.generate(3)
    assert [r['id'] for r in data] == ["sample_00000", "sample_00001", "sample_00002"]
    assert data[1]['seed'] == generator.sample_seed(1)
    assert data[1]['scene'] == gen_scene(data[1]['seed'], 16, 16, 4)
    with pytest.raises(ValidationError):
        MovingShapesGenerator(still_fraction=1.5)


def test_make_dataset_is_byte_identical(tmp_path):
    """Test that two runs with the same seed write identical files."""
    cfg = DataConfig(height=16, width=16, frames=2)
    make_dataset(3, 9, str(tmp_path / "a"), cfg, progress_bar=False, workers=2)
    make_dataset(3, 9, str(tmp_path / "a"), cfg, progress_bar=False, workers=1)
    make_dataset(3, 9, str(tmp_path / "b"), cfg, progress_bar=False, workers=1)
    first, second = _tree_bytes(tmp_path / "a"), _tree_bytes(tmp_path / "b")
    assert first == second
    assert MANIFEST_NAME in first
    assert os.path.join("sample_00002", "frame_001.ppm") in first


def test_loader_reads_manifest(tmp_path):
    """Test that a written dataset loads back with videos, scenes and captions."""
    cfg = DataConfig(height=16, width=16, frames=2)
    manifest = make_dataset(2, 4, str(tmp_path), cfg, progress_bar=False)
    data = DataLoader.from_manifest(str(tmp_path)).load()
    assert len(data) == 2
    generator = MovingShapesGenerator(seed=4, height=16, width=16, frames=2)
    expected = generator.render(generator.generate_example(1)).video
    assert np.allclose(data[1]['video'], expected, atol=0.5 / 255)
    assert data[1]['scene'] == generator.generate_example(1)['scene']
    assert data[1]['caption'] == generator.generate_example(1)['caption']
    assert len(DataLoader.from_manifest(manifest, load_videos=False).load()) == 2


def test_loader_directory_modes(tmp_path):
    """Test loading a single video directory and a directory of videos."""
    cfg = DataConfig(height=16, width=16, frames=2)
    make_dataset(2, 0, str(tmp_path), cfg, progress_bar=False)
    many = DataLoader.from_directory(str(tmp_path)).load()
    assert [r['id'] for r in many] == ["sample_00000", "sample_00001"]
    single = DataLoader.from_directory(str(tmp_path / "sample_00001")).load()
    assert len(single) == 1 and single[0]['video'].shape == (2, 3, 16, 16)


def test_loader_errors(tmp_path):
    """Test that missing manifests and empty directories raise ValidationError."""
    with pytest.raises(ValidationError):
        DataLoader.from_manifest(str(tmp_path)).load()
    with pytest.raises(ValidationError):
        DataLoader.from_directory(str(tmp_path)).load()


def test_video_dataset_operations():
    """Test indexing, slicing and iteration."""
    data = VideoDataset([{'id': f"s{i}", 'value': i} for i in range(5)])
    assert len(data) == 5 and data[2]['id'] == "s2"
    assert [r['id'] for r in data[1:3]] == ["s1", "s2"]
    assert [r['value'] for r in data] == [0, 1, 2, 3, 4]
    assert repr(data) == "VideoDataset(num_records=5)"


def test_sample_indices_reproducible():
    """Test that batch indices depend only on (seed, step)."""
    data = VideoDataset([{'id': str(i)} for i in range(10)])
    a = data.sample_indices(6, seed=1, step=3)
    assert np.array_equal(a, data.sample_indices(6, seed=1, step=3))
    assert a.min() >= 0 and a.max() < 10
    with pytest.raises(ValueError):
        VideoDataset([]).sample_indices(1, 0, 0)


def test_ordered_map_keeps_order():
    """Test that threaded mapping yields results in input order."""
    assert list(ordered_map(lambda x: x * x, range(50), workers=4, lookahead=3)) == [x * x for x in range(50)]
    assert list(ordered_map(str, [1, 2], workers=1)) == ["1", "2"]


def test_batch_stream():
    """Test that the stream yields one batch per step starting at `start`."""
    stream = BatchStream(lambda step: step * 10, steps=4, start=2, prefetch=2, progress_bar=False)
    assert len(stream) == 4
    assert list(stream) == [20, 30, 40, 50]


def test_thread_count(monkeypatch):
    """Test the EASYCTRL_THREADS override and its fallback."""
    monkeypatch.setenv(THREADS_ENV, "3")
    assert thread_count() == 3
    monkeypatch.setenv(THREADS_ENV, "zero")
    assert thread_count() == (os.cpu_count() or 1)
