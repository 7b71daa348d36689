"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy twins
are used. Set ``SDEBOUNDS_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _pykernels as python_backend

compiled_backend = None
if os.environ.get("SDEBOUNDS_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as compiled_backend
    except ImportError:  # extension not built
        compiled_backend = None

_active = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "compiled" if compiled_backend is not None else "python"

euler_linear = _active.euler_linear
euler_mass_spring = _active.euler_mass_spring
spring_force = _active.spring_force
lasso_cd = _active.lasso_cd


def get_backend(name=None):
    """Return the kernel module called ``name`` ('compiled' or 'python').

    ``None`` returns the active one. Asking for 'compiled' when the
    extension is missing raises ImportError.
    """
    if name is None:
        return _active
    if name == "python":
        return python_backend
    if name == "compiled":
        if compiled_backend is None:
            raise ImportError("compiled kernels are not built")
        return compiled_backend
    raise ValueError(f"unknown backend {name!r}")
