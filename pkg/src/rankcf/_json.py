from __future__ import annotations

import json as _json
import math
import typing as t

import numpy as np


def _default(obj: t.Any) -> t.Any:
    if isinstance(obj, np.ndarray):
        return obj.tolist()

    if isinstance(obj, np.generic):
        return obj.item()

    raise TypeError(f"Object of type {type(obj).__name__} is not JSON serializable")


def _clean(obj: t.Any) -> t.Any:
    # JSON has no NaN or infinity, report those as null.
    if isinstance(obj, float) and not math.isfinite(obj):
        return None

    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}

    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]

    return obj


class _CompactJSON:
    """Wrapper around json module that understands numpy values and
    writes non-finite floats as ``null``.
    """

    @staticmethod
    def loads(payload: str | bytes) -> t.Any:
        return _json.loads(payload)

    @staticmethod
    def dumps(obj: t.Any, **kwargs: t.Any) -> str:
        kwargs.setdefault("ensure_ascii", False)
        kwargs.setdefault("separators", (",", ":"))
        kwargs.setdefault("allow_nan", False)
        # round trip through the encoder so numpy scalars become floats
        # before non-finite values are replaced
        plain = _json.loads(_json.dumps(obj, default=_default, allow_nan=True))
        return _json.dumps(_clean(plain), **kwargs)
