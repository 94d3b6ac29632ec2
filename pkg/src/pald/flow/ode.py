"""Fixed-step RK4 integration of velocity fields."""

from __future__ import annotations

import numpy as np

from ..errors import NumericalError


def ode_integrate(field, x_start: np.ndarray, t_start: float, t_end: float,
                  steps: int, return_path: bool = False):
    """Integrate dx/dt = field(x, t) from t_start to t_end with classic RK4.

    Global error is O(h^4).  Raises NumericalError the moment the state goes
    non-finite.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    x = np.atleast_2d(np.asarray(x_start, dtype=np.float64)).copy()
    squeeze = np.asarray(x_start).ndim == 1
    h = (t_end - t_start) / steps
    path = [x.copy()] if return_path else None
    for i in range(steps):
        t0 = t_start + i * h
        k1 = field(x, t0)
        k2 = field(x + 0.5 * h * k1, t0 + 0.5 * h)
        k3 = field(x + 0.5 * h * k2, t0 + 0.5 * h)
        k4 = field(x + h * k3, t0 + h)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise NumericalError(f"non-finite ODE state at step {i}")
        if return_path:
            path.append(x.copy())
    if squeeze:
        x = x[0]
    return (x, path) if return_path else x
