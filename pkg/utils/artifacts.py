import csv
import fcntl
import io
import json
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Generator

import numpy as np
from pydantic import TypeAdapter

from env_settings import ENV_SETTINGS, TOOL_VERSION
from utils.models.matrix import encode_complex


@contextmanager
def artifact_lock(path: Path) -> Generator[None, None, None]:
    lock_path = path.with_name(path.name + ".lock")
    lock_path.parent.mkdir(parents=True, exist_ok=True)
    lock_path.touch(exist_ok=True)
    with open(lock_path) as lock_file:
        fcntl.flock(lock_file, fcntl.LOCK_EX)
        try:
            yield
        finally:
            fcntl.flock(lock_file, fcntl.LOCK_UN)


def header_block(model_hash: str | None, seed: int | None, command: str) -> dict:
    return {
        "model_hash": model_hash,
        "tool_version": TOOL_VERSION,
        "tolerances": ENV_SETTINGS.tolerances(),
        "seed": seed,
        "command": command,
    }


def _encode_numpy(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return encode_complex(value) if np.iscomplexobj(value) else value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"cannot write {type(value).__name__} to an artifact")


_PAYLOAD = TypeAdapter(Any)


def to_jsonable(value: Any) -> Any:
    """Plain JSON data; pydantic models dump their own fields, numpy arrays go through encode_complex.

    Complex scalars must arrive as Complex model fields or [re, im] pairs.
    """
    return _PAYLOAD.dump_python(value, mode="json", fallback=_encode_numpy)


def render_json(header: dict, payload: dict) -> str:
    return json.dumps({"header": to_jsonable(header), **to_jsonable(payload)}, indent=2, sort_keys=True) + "\n"


def render_csv(header: dict, columns: list[str], rows: list[list]) -> str:
    buffer = io.StringIO()
    for key in sorted(header):
        buffer.write(f"# {key}: {json.dumps(to_jsonable(header[key]), sort_keys=True)}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return buffer.getvalue()


def write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with artifact_lock(path):
        with open(path, "w") as f:
            f.write(text)
    return path


def write_json(path: Path, header: dict, payload: dict) -> Path:
    return write_text(path, render_json(header, payload))


def write_csv(path: Path, header: dict, columns: list[str], rows: list[list]) -> Path:
    return write_text(path, render_csv(header, columns, rows))


def read_json(path: Path) -> dict:
    with artifact_lock(path):
        with open(path) as f:
            return json.load(f)
