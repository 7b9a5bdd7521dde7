"""Inner-loop kernels with a compiled backend and a numpy fallback.

The Cython extension ``_ckernels`` is used when it was built; otherwise,
or when ``PAFLC_PURE_PYTHON`` is set to a non-empty value other than ``0``,
the numpy versions in ``_pykernels`` are used.  ``BACKEND`` names the one
in effect.
"""
import importlib
import os

import numpy as np

from . import _pykernels

__all__ = [
    "BACKEND",
    "available_backends",
    "load_backend",
    "gaussian_maps",
    "paf_accumulate",
    "find_local_peaks",
    "limb_scores",
]


def _try_compiled():
    try:
        return importlib.import_module(f"{__name__}._ckernels")
    except ImportError:
        return None


_compiled = _try_compiled()

if os.environ.get("PAFLC_PURE_PYTHON", "") not in ("", "0") or _compiled is None:
    _impl, BACKEND = _pykernels, "python"
else:
    _impl, BACKEND = _compiled, "cython"


def available_backends():
    return ["python"] + (["cython"] if _compiled is not None else [])


def load_backend(name):
    """Return the raw kernel module for ``"python"`` or ``"cython"``."""
    if name == "python":
        return _pykernels
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernels are not built")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def gaussian_maps(out, parts, centers, sigma, truncate=3.0, backend=None):
    impl = load_backend(backend) if backend else _impl
    assert out.dtype == np.float32 and out.flags.c_contiguous
    impl.gaussian_maps(
        out,
        np.ascontiguousarray(parts, dtype=np.int64),
        np.ascontiguousarray(centers, dtype=np.float64).reshape(-1, 2),
        float(sigma),
        float(truncate),
    )


def paf_accumulate(sums, counts, limb_ids, segs, width, backend=None):
    impl = load_backend(backend) if backend else _impl
    assert sums.dtype == np.float64 and counts.dtype == np.int32
    impl.paf_accumulate(
        sums,
        counts,
        np.ascontiguousarray(limb_ids, dtype=np.int64),
        np.ascontiguousarray(segs, dtype=np.float64).reshape(-1, 4),
        float(width),
    )


def find_local_peaks(values, threshold, backend=None):
    impl = load_backend(backend) if backend else _impl
    return impl.find_local_peaks(np.ascontiguousarray(values, dtype=np.float64), float(threshold))


def limb_scores(paf, a, b, n_samples, backend=None):
    impl = load_backend(backend) if backend else _impl
    return impl.limb_scores(
        np.ascontiguousarray(paf, dtype=np.float64),
        np.ascontiguousarray(a, dtype=np.float64).reshape(-1, 2),
        np.ascontiguousarray(b, dtype=np.float64).reshape(-1, 2),
        int(n_samples),
    )
