from typing import Annotated, Any

import numpy as np
from pydantic import BeforeValidator, PlainSerializer


def encode_complex(m: np.ndarray) -> list:
    """Nested [re, im] pairs, same nesting as the array."""
    arr = np.asarray(m, dtype=complex)
    return np.stack([arr.real, arr.imag], axis=-1).tolist()


def decode_complex(data: Any, ndim: int) -> np.ndarray:
    arr = np.asarray(data)
    if arr.dtype == object:
        raise ValueError("ragged matrix data")
    if arr.ndim == ndim + 1 and arr.shape[-1] == 2 and np.isrealobj(arr):
        arr = arr[..., 0] + 1j * arr[..., 1]
    if arr.ndim != ndim:
        raise ValueError(f"expected a {ndim}-dimensional array, got shape {arr.shape}")
    return arr.astype(complex)


def _to_cmatrix(value: Any) -> np.ndarray:
    arr = decode_complex(value, ndim=2)
    if arr.size == 0:
        raise ValueError("matrix must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix entries must be finite")
    return arr


def _to_real(ndim: int):
    def validate(value: Any) -> np.ndarray:
        arr = np.asarray(value, dtype=float)
        if arr.ndim != ndim:
            raise ValueError(f"expected a {ndim}-dimensional array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("entries must be finite")
        return arr

    return validate


def _to_complex(value: Any) -> complex:
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise ValueError("complex values are [re, im] pairs")
        value = complex(value[0], value[1])
    return complex(value)


def _to_cvector(value: Any) -> np.ndarray:
    arr = decode_complex(value, ndim=1)
    if not np.all(np.isfinite(arr)):
        raise ValueError("entries must be finite")
    return arr


Complex = Annotated[
    complex,
    BeforeValidator(_to_complex),
    PlainSerializer(encode_complex, when_used="json"),
]

CMatrix = Annotated[
    np.ndarray,
    BeforeValidator(_to_cmatrix),
    PlainSerializer(encode_complex, when_used="json"),
]

CVector = Annotated[
    np.ndarray,
    BeforeValidator(_to_cvector),
    PlainSerializer(encode_complex, when_used="json"),
]

RMatrix = Annotated[
    np.ndarray,
    BeforeValidator(_to_real(2)),
    PlainSerializer(lambda m: np.asarray(m, dtype=float).tolist(), when_used="json"),
]

RVector = Annotated[
    np.ndarray,
    BeforeValidator(_to_real(1)),
    PlainSerializer(lambda v: np.asarray(v, dtype=float).tolist(), when_used="json"),
]
