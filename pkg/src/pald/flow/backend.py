"""Kernel backend selection.

The log-density hot path has two implementations: a numba-jitted kernel and a
vectorized pure-numpy fallback.  ``PALD_BACKEND`` picks one explicitly
("numba" / "numpy"); the default "auto" uses numba when it imports.  Use
`benchmarks/bench_ic.py` to compare them on your machine.
"""

from __future__ import annotations

import os

from . import kernels_numpy

_FORCED: str | None = None


def _env_choice() -> str:
    return os.environ.get("PALD_BACKEND", "auto").lower()


def set_backend(name: str | None) -> None:
    """Force a backend in-process (tests/benchmarks); None restores the env choice."""
    global _FORCED
    if name is not None and name not in ("numba", "numpy"):
        raise ValueError("backend must be 'numba' or 'numpy'")
    _FORCED = name


def active_backend() -> str:
    choice = _FORCED if _FORCED is not None else _env_choice()
    if choice == "numpy":
        return "numpy"
    if choice in ("numba", "auto"):
        try:
            from . import kernels_numba  # noqa: F401
            return "numba"
        except ImportError:
            if choice == "numba":
                raise
            return "numpy"
    raise ValueError(f"unknown PALD_BACKEND value {choice!r}")


def logp_batch(x0, c, t_from, steps, w0, b0, w1, b1, w2, b2, n_pairs, gamma):
    """Dispatch the batched log-density kernel to the active backend."""
    if active_backend() == "numba":
        from . import kernels_numba
        return kernels_numba.logp_batch(x0, c, float(t_from), int(steps),
                                        w0, b0, w1, b1, w2, b2,
                                        int(n_pairs), float(gamma))
    return kernels_numpy.logp_batch(x0, c, float(t_from), int(steps),
                                    w0, b0, w1, b1, w2, b2,
                                    int(n_pairs), float(gamma))
