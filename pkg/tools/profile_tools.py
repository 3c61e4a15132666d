# ./tools/profile_tools.py
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import Polynomial

from tools.errors import ProfileError

ArrayFunction = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Profile:
    """Named analytic initial profile with its exact derivative."""

    name: str
    f: ArrayFunction
    df: ArrayFunction
    polynomial: Optional[Polynomial] = None

    def __call__(self, x):
        return self.f(np.asarray(x, dtype=float))


def _gauss(x):
    return np.exp(-4.0 * x * x)


NAMED_PROFILES = {
    "sin": (lambda x: np.sin(np.pi * x), lambda x: np.pi * np.cos(np.pi * x)),
    "cos": (lambda x: np.cos(np.pi * x), lambda x: -np.pi * np.sin(np.pi * x)),
    "gauss": (_gauss, lambda x: -8.0 * x * _gauss(x)),
}


def parse_profile(spec: str) -> Profile:
    """
    Parse a profile name: ``sin``, ``cos``, ``gauss`` or ``poly:c0,c1,...``.

    Polynomial coefficients are in increasing degree, so ``poly:0,1`` is x.
    """
    spec = spec.strip()
    if spec in NAMED_PROFILES:
        f, df = NAMED_PROFILES[spec]
        return Profile(spec, f, df)
    if spec.startswith("poly:"):
        try:
            coeffs = [float(c) for c in spec[len("poly:"):].split(",")]
        except ValueError as e:
            raise ProfileError(f"cannot parse polynomial profile '{spec}': {str(e)}") from e
        if not all(np.isfinite(coeffs)):
            raise ProfileError(f"polynomial profile '{spec}' has non-finite coefficients")
        p = Polynomial(coeffs)
        dp = p.deriv()
        return Profile(spec, lambda x: p(x) + 0.0 * x, lambda x: dp(x) + 0.0 * x, polynomial=p)
    raise ProfileError(f"unknown profile '{spec}'; expected sin, cos, gauss or poly:<coeffs>")
