"""Kernel backend selection: compiled extension when available, numpy otherwise.

Set IATC_PURE_PYTHON=1 to force the fallback (useful for debugging and for
the backend-comparison benchmark).
"""
import os

if os.environ.get("IATC_PURE_PYTHON"):
    from ._cd_py import lasso_cd

    KERNEL_BACKEND = "python"
else:
    try:
        from ._cd_fast import lasso_cd  # type: ignore[attr-defined]

        KERNEL_BACKEND = "compiled"
    except ImportError:
        from ._cd_py import lasso_cd

        KERNEL_BACKEND = "python"

__all__ = ["lasso_cd", "KERNEL_BACKEND"]
