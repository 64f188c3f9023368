"""
File formats: PPM frames, EZTA tensor archives, atomic JSON writes
"""

from easyctrl.io.files import atomic_write_bytes, atomic_write_text, write_json, write_jsonl, read_json, read_jsonl
from easyctrl.io.ppm import save_ppm, load_ppm, save_video_frames, load_video_frames, quantize
from easyctrl.io.archive import save_archive, load_archive, encode_archive, decode_archive

__all__ = [
    'atomic_write_bytes',
    'atomic_write_text',
    'write_json',
    'write_jsonl',
    'read_json',
    'read_jsonl',
    'save_ppm',
    'load_ppm',
    'save_video_frames',
    'load_video_frames',
    'quantize',
    'save_archive',
    'load_archive',
    'encode_archive',
    'decode_archive',
]
