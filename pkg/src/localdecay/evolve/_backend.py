"""Choose between the compiled stepper and the numpy reference at import."""

from __future__ import annotations

import os

from . import _fallback

try:
    from . import _kernel
except ImportError:  # extension not built
    _kernel = None


def get_backend(name: str | None = None):
    """Return ``(run, name)`` for ``name`` in {"compiled", "python", None}.

    ``None`` picks the compiled kernel when available unless the environment
    variable ``LOCALDECAY_PURE_PYTHON`` is set to a non-empty value other
    than "0".
    """
    if name is None:
        forced = os.environ.get("LOCALDECAY_PURE_PYTHON", "")
        name = "python" if (forced and forced != "0") or _kernel is None else "compiled"
    if name == "compiled":
        if _kernel is None:
            raise ImportError("compiled kernel localdecay.evolve._kernel is not built")
        return _kernel.run, "compiled"
    if name == "python":
        return _fallback.run, "python"
    raise ValueError(f"unknown backend {name!r}")


run, BACKEND = get_backend()
