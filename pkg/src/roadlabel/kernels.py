"""Backend dispatch for the resampling kernels.

The compiled extension is preferred when importable; set
``ROADLABEL_KERNELS=numpy`` to force the fallback or
``ROADLABEL_KERNELS=compiled`` to insist on the extension (import error if
it is missing). ``BACKEND`` records which one won.
"""

import os

_choice = os.environ.get("ROADLABEL_KERNELS", "auto").strip().lower()
if _choice not in ("auto", "compiled", "numpy"):
    raise ImportError(
        f"ROADLABEL_KERNELS must be auto, compiled or numpy, not {_choice!r}"
    )

if _choice == "numpy":
    from roadlabel import _kernels_np as _impl

    BACKEND = "numpy"
elif _choice == "compiled":
    from roadlabel import _kernels_cy as _impl  # type: ignore[attr-defined]

    BACKEND = "compiled"
else:
    try:
        from roadlabel import _kernels_cy as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        from roadlabel import _kernels_np as _impl

        BACKEND = "numpy"

affine_warp_bilinear = _impl.affine_warp_bilinear
affine_warp_nearest = _impl.affine_warp_nearest
bilinear_sample = _impl.bilinear_sample

__all__ = [
    "BACKEND",
    "affine_warp_bilinear",
    "affine_warp_nearest",
    "bilinear_sample",
]
