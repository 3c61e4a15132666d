# ./tools/integration_tools.py
import logging
from dataclasses import dataclass
from typing import Any, Callable, Dict, Optional, Sequence

import numpy as np
from scipy.integrate import RK45

from tools.errors import StepSizeUnderflowError

logger = logging.getLogger(__name__)

StepCallback = Callable[[float, np.ndarray], None]


@dataclass
class IntegrationResult:
    t: np.ndarray
    y: np.ndarray  # one row per requested output time
    t_reached: float
    steps: int
    nfev: int


def guard_options(config) -> Dict[str, Any]:
    """Blow-up guard keywords for ``integrate`` taken from a FlowConfig."""
    return {
        "max_steps": config.max_steps,
        "growth_limit": config.growth_limit,
        "min_step": config.min_step_fraction * config.t_end,
    }


def _blow_up(solver: RK45, steps: int, max_steps: Optional[int], bound: Optional[float], min_step: float) -> str:
    if not np.all(np.isfinite(solver.y)):
        return "non-finite state"
    if bound is not None and np.max(np.abs(solver.y)) > bound:
        return f"state norm {np.max(np.abs(solver.y)):.3e} exceeds {bound:.3e}"
    if max_steps is not None and steps >= max_steps and solver.status == "running":
        return f"step limit {max_steps} reached"
    if solver.status == "running" and solver.step_size is not None and solver.step_size < min_step:
        return f"step size {solver.step_size:.3e} below {min_step:.3e}"
    return ""


def integrate(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    y0: np.ndarray,
    t_end: float,
    rtol: float,
    atol: float,
    max_step: Optional[float] = None,
    t_eval: Optional[Sequence[float]] = None,
    on_step: Optional[StepCallback] = None,
    max_steps: Optional[int] = None,
    growth_limit: Optional[float] = None,
    min_step: float = 0.0,
) -> IntegrationResult:
    """
    Advance y' = rhs(t, y) from t = 0 to t_end with the Dormand-Prince 5(4) pair.

    Output times are filled from the dense interpolant of the step that
    covers them; ``on_step`` sees the state after every accepted step.

    The run is abandoned as a blow-up when the step size drops below
    ``min_step``, when more than ``max_steps`` steps are taken, or when
    max|y| exceeds ``growth_limit`` times max(1, max|y0|).

    Raises:
        StepSizeUnderflowError: the step size fell below the floating point
            spacing at the current time, or one of the blow-up guards tripped
    """
    y0 = np.asarray(y0, dtype=float)
    times = np.asarray([0.0, t_end] if t_eval is None else t_eval, dtype=float)
    out = np.empty((len(times), y0.size))
    filled = 0
    while filled < len(times) and times[filled] <= 0.0:
        out[filled] = y0
        filled += 1

    solver = RK45(
        rhs,
        0.0,
        y0,
        t_end,
        max_step=np.inf if max_step is None else max_step,
        rtol=rtol,
        atol=atol,
    )
    bound = None if growth_limit is None else growth_limit * max(1.0, float(np.max(np.abs(y0), initial=0.0)))
    steps = 0
    while solver.status == "running":
        message = solver.step()
        if solver.status == "failed":
            logger.error(f"Integrator failed at t={solver.t:.6g}: {message}")
            raise StepSizeUnderflowError(solver.t, message or "step size underflow")
        steps += 1
        message = _blow_up(solver, steps, max_steps, bound, min_step)
        if message:
            logger.error(f"Integrator stopped at t={solver.t:.6g}: {message}")
            raise StepSizeUnderflowError(solver.t, message)
        if on_step is not None:
            on_step(solver.t, solver.y)
        if filled < len(times) and times[filled] <= solver.t:
            dense = solver.dense_output()
            while filled < len(times) and times[filled] <= solver.t:
                out[filled] = solver.y if times[filled] == solver.t else dense(times[filled])
                filled += 1

    logger.debug(f"Integrated to t={solver.t:.6g} in {steps} steps ({solver.nfev} evaluations)")
    return IntegrationResult(t=times[:filled], y=out[:filled], t_reached=float(solver.t), steps=steps, nfev=solver.nfev)
