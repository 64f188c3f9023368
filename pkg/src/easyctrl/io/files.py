"""
Atomic file writes (temp file in the target directory, then rename)
"""
import json
import os
import tempfile
from typing import Any, Iterable, Mapping


def atomic_write_bytes(path: str, data: bytes) -> None:
    """
    Write `data` to `path` so readers never observe a partial file.

    Args:
        path: Destination path; parent directories are created
        data: File contents
    """
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def atomic_write_text(path: str, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def dump_json(obj: Any) -> str:
    """Canonical JSON used for every metadata file: sorted keys, two-space indent."""
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def write_json(path: str, obj: Any) -> None:
    atomic_write_text(path, dump_json(obj))


def write_jsonl(path: str, records: Iterable[Mapping[str, Any]]) -> None:
    """Write one sorted-key JSON object per line."""
    atomic_write_text(path, "".join(json.dumps(r, sort_keys=True) + "\n" for r in records))


def read_json(path: str) -> Any:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def read_jsonl(path: str) -> list:
    with open(path, "r", encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]
