# ./tools/aks_tools.py
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from models import (
    CasimirSpec,
    ConservationReport,
    EigenvalueDrift,
    FlowConfig,
    GeneratorKind,
    InvariantDrift,
    PrintedFormulaResiduals,
    ProductOrdering,
)
from tools.calogero_tools import QuasiRep, naive_discretize_riemann, require_diagonal
from tools.errors import (
    DegreeChangedError,
    DegreeNotDivisibleError,
    DimensionMismatchError,
    LaxMarkovError,
    TopNotIdentityError,
    ZeroElementError,
)
from tools.integration_tools import guard_options, integrate
from tools.linalg_tools import as_square_pair, commutator, freeze, frobenius
from tools.loop_tools import (
    LoopElement,
    bracket_pairing,
    degree,
    fractional_power_series,
    loop_bracket,
    loop_mul,
    loop_power,
    loop_r_map,
    pairing,
    project_plus,
    trace_series,
    valuation,
)
from tools.markov_tools import project_m

logger = logging.getLogger(__name__)

FRACTIONAL_TOP_TOL = 1e-6
COEFF_FLOOR = 1e-8


@dataclass(frozen=True, eq=False)
class RiemannState:
    """Initial data U = diag(u), V = diag(v) on the quasi-representation mesh."""

    U: np.ndarray
    V: np.ndarray
    rep: QuasiRep

    def __post_init__(self):
        U = require_diagonal(self.U, "U")
        V = require_diagonal(self.V, "V")
        as_square_pair(U, V)
        if U.shape[0] != self.rep.n:
            raise DimensionMismatchError(f"state size {U.shape[0]} does not match mesh size {self.rep.n}")
        object.__setattr__(self, "U", freeze(U))
        object.__setattr__(self, "V", freeze(V))

    @classmethod
    def from_samples(cls, rep: QuasiRep, u, v) -> "RiemannState":
        return cls(U=np.diag(np.asarray(u, dtype=float)), V=np.diag(np.asarray(v, dtype=float)), rep=rep)


def riemann_element(U, V, Z) -> LoopElement:
    U, V = as_square_pair(U, V)
    as_square_pair(U, Z)
    return LoopElement({3: np.eye(U.shape[0]), 2: U, 1: V, 0: Z}, U.shape[0])


def riemann_alpha(state: RiemannState) -> LoopElement:
    return riemann_element(state.U, state.V, state.rep.Z)


def _normalized_power(alpha: LoopElement, n: int) -> LoopElement:
    return loop_power(alpha.shift(-degree(alpha)), n)


def casimir_value(alpha: LoopElement, spec: CasimirSpec) -> float:
    """gamma_n^(k)(alpha) = res tr(lambda^(k+d) (alpha lambda^-d)^(n+1)) / (n+1)."""
    d = degree(alpha)
    power = _normalized_power(alpha, spec.n + 1)
    return pairing(power, LoopElement.identity(alpha.n, spec.k + d)) / (spec.n + 1)


def casimir_gradient(alpha: LoopElement, spec: CasimirSpec) -> LoopElement:
    return _normalized_power(alpha, spec.n).shift(spec.k)


def aks_generator(alpha: LoopElement, spec: CasimirSpec) -> LoopElement:
    return project_plus(casimir_gradient(alpha, spec))


def lax_field(alpha: LoopElement, G: LoopElement) -> LoopElement:
    return loop_bracket(G, alpha)


def casimir_defect(alpha: LoopElement, spec: CasimirSpec) -> float:
    return loop_bracket(casimir_gradient(alpha, spec), alpha).norm()


def r_poisson_value(alpha: LoopElement, g1: LoopElement, g2: LoopElement) -> float:
    """R-deformed Lie-Poisson bracket (alpha, [g1, g2]_R) for precomputed gradients."""
    return bracket_pairing(alpha, loop_r_map(g1), g2) + bracket_pairing(alpha, g1, loop_r_map(g2))


def involutivity_defect(alpha: LoopElement, s1: CasimirSpec, s2: CasimirSpec) -> float:
    return abs(r_poisson_value(alpha, casimir_gradient(alpha, s1), casimir_gradient(alpha, s2)))


def involutivity_scale(alpha: LoopElement, s1: CasimirSpec, s2: CasimirSpec) -> float:
    return max(1.0, alpha.norm() * casimir_gradient(alpha, s1).norm() * casimir_gradient(alpha, s2).norm())


def gradient_fd_check(alpha: LoopElement, spec: CasimirSpec, direction: LoopElement) -> float:
    """
    Absolute gap between a central difference of gamma along ``direction``
    and the pairing of the closed-form gradient with ``direction``.

    Raises:
        DegreeChangedError: the perturbed points have a different top degree
    """
    if direction.is_zero():
        return 0.0
    d = degree(alpha)
    if degree(direction) > d:
        raise DegreeChangedError(f"direction reaches lambda^{degree(direction)} above the degree {d}")
    h = 1e-5 * (1.0 + alpha.max_abs() / direction.max_abs())
    plus, minus = alpha + h * direction, alpha - h * direction
    if plus.is_zero() or minus.is_zero() or degree(plus) != d or degree(minus) != d:
        raise DegreeChangedError("perturbation changes the top degree")
    fd = (casimir_value(plus, spec) - casimir_value(minus, spec)) / (2 * h)
    return abs(fd - pairing(casimir_gradient(alpha, spec), direction))


# printed generator formulas, reproduced as written


def paper_generator_B(U, Z) -> LoopElement:
    U, Z = as_square_pair(U, Z)
    n = U.shape[0]
    U2 = U @ U
    return LoopElement(
        {
            3: np.eye(n),
            2: 1.5 * U,
            1: 1.5 * Z - 0.375 * U2,
            0: -U2 @ U / 16.0 - 0.375 * (Z @ U + U @ Z),
        },
        n,
    )


def paper_generator_printed(U, V, Z) -> LoopElement:
    """Printed P+ image of alpha^2 lambda^-2 (its lambda^0 term omits V^2)."""
    U, V = as_square_pair(U, V)
    as_square_pair(U, Z)
    n = U.shape[0]
    return LoopElement(
        {
            4: np.eye(n),
            3: 2.0 * U,
            2: 2.0 * V + U @ U,
            1: 2.0 * Z + U @ V + V @ U,
            0: project_m(Z @ U + U @ Z),
        },
        n,
    )


def paper_residuals(U, V, Z) -> PrintedFormulaResiduals:
    alpha = riemann_element(U, V, Z)
    U, V, Z = alpha.coeff(2), alpha.coeff(1), alpha.coeff(0)
    field = lax_field(alpha, paper_generator_B(U, Z))
    printed_dU = -2.0 * commutator(Z, V)
    printed_dV = -commutator(Z, V @ U + U @ Z) + commutator(U @ Z + Z @ U, V)
    oracle = aks_generator(alpha, CasimirSpec(n=2, k=4))
    return PrintedFormulaResiduals(
        lambda3_norm=frobenius(field.coeff(3)),
        lambda3_closed_form=frobenius(1.5 * (commutator(U, V) + commutator(Z, U))),
        lambda2_vs_printed_dU=frobenius(field.coeff(2) - printed_dU),
        lambda1_vs_printed_dV=frobenius(field.coeff(1) - printed_dV),
        generator_vs_printed=(oracle - paper_generator_printed(U, V, Z)).norm(),
        generator_oracle=frobenius(project_m(V @ V)),
    )


def paper_rhs_residuals(state: RiemannState) -> PrintedFormulaResiduals:
    return paper_residuals(state.U, state.V, state.rep.Z)


# flows


class GeneratorRule:
    """Maps the current alpha to the generator G(alpha) of d alpha/dt = [G, alpha]."""

    def __init__(self, kind: GeneratorKind, spec: Optional[CasimirSpec] = None, fixed: Optional[LoopElement] = None):
        self.kind = GeneratorKind(kind)
        if self.kind == GeneratorKind.CASIMIR and spec is None:
            raise ValueError("the casimir rule needs a CasimirSpec")
        if self.kind == GeneratorKind.FIXED and fixed is None:
            raise ValueError("the fixed rule needs a generator")
        if self.kind == GeneratorKind.NAIVE:
            raise ValueError("the naive discretization is not a Lax flow; use integrate_naive_riemann")
        self.spec = spec
        self.fixed = fixed

    @classmethod
    def casimir(cls, spec: CasimirSpec) -> "GeneratorRule":
        return cls(GeneratorKind.CASIMIR, spec=spec)

    @classmethod
    def fixed_generator(cls, G: LoopElement) -> "GeneratorRule":
        return cls(GeneratorKind.FIXED, fixed=G)

    @classmethod
    def paper_B(cls) -> "GeneratorRule":
        return cls(GeneratorKind.PAPER_B)

    @property
    def closed(self) -> bool:
        """Whether [G(alpha), alpha] stays inside the support window of alpha."""
        if self.kind == GeneratorKind.CASIMIR:
            return True
        if self.kind == GeneratorKind.FIXED:
            return self.fixed.is_zero() or self.fixed.support == [0]
        return False

    def generator(self, alpha: LoopElement) -> LoopElement:
        if self.kind == GeneratorKind.CASIMIR:
            return aks_generator(alpha, self.spec)
        if self.kind == GeneratorKind.FIXED:
            return self.fixed
        return paper_generator_B(alpha.coeff(2), alpha.coeff(0))

    def label(self) -> str:
        if self.kind == GeneratorKind.CASIMIR:
            return f"casimir{self.spec.label()}"
        return self.kind.value


@dataclass
class CoefficientWindow:
    lo: int
    hi: int
    n: int

    @property
    def exponents(self) -> range:
        return range(self.lo, self.hi + 1)

    def pack(self, X: LoopElement) -> np.ndarray:
        return np.concatenate([X.coeff(j).ravel() for j in self.exponents])

    def unpack(self, y: np.ndarray) -> LoopElement:
        blocks = y.reshape(-1, self.n, self.n)
        return LoopElement({j: b for j, b in zip(self.exponents, blocks)}, self.n)

    def leakage(self, X: LoopElement) -> float:
        return max(
            (float(np.max(np.abs(c))) for j, c in X.coeffs.items() if j < self.lo or j > self.hi),
            default=0.0,
        )


class ConservationMonitor:
    """
    Tracks trace invariants, fractional trace invariants and sampled spectra
    of alpha along a trajectory.

    Drift is measured at every accepted step. Relative drift divides by the
    largest initial magnitude of the invariant family (same kind and m) and,
    for eigenvalues, by the initial spectral radius. Coefficients whose own
    initial value is above COEFF_FLOOR times the family scale also get a
    per-coefficient ratio.
    """

    def __init__(
        self,
        alpha0: LoopElement,
        config: FlowConfig,
        window: CoefficientWindow,
        closed: bool,
        spectrum_exact: bool,
    ):
        self.config = config
        self.closed = closed
        self.spectrum_exact = spectrum_exact
        lo, hi = window.lo, window.hi
        self.ranges: Dict[Tuple[str, int], Tuple[int, int]] = {}
        for m in range(1, config.invariants_m_max + 1):
            top = m * hi if closed else hi + (m - 1) * lo
            self.ranges[("trace", m)] = (m * lo, top)

        self.root = config.fractional_root if closed else None
        if self.root is not None:
            d = degree(alpha0)
            if d % self.root or np.max(np.abs(alpha0.coeff(d) - np.eye(alpha0.n))) > FRACTIONAL_TOP_TOL:
                logger.debug(f"Skipping fractional invariants: degree {d} or top coefficient does not admit a {self.root}-th root")
                self.root = None
            else:
                for m in range(1, config.invariants_m_max + 1):
                    if m % self.root:
                        top = m * d // self.root
                        self.ranges[("fractional", m)] = (top - config.fractional_order, top)

        self.steps = 0
        self.t_reached = 0.0
        self.fractional_dropped_at: Optional[float] = None
        self.initial = self.evaluate(alpha0)
        self.scales = {
            key: max((abs(v) for (k, m, e), v in self.initial.items() if (k, m) == key), default=0.0)
            for key in self.ranges
        }
        self.max_abs: Dict[Tuple[str, int, int], float] = {key: 0.0 for key in self.initial}

        self.lambdas = list(config.lambda_samples)
        self.eig0 = [self._sorted_eigs(alpha0.evaluate(lam)) for lam in self.lambdas]
        self.eig_prev = [e.copy() for e in self.eig0]
        self.eig_scale = [max(float(np.max(np.abs(e))), np.finfo(float).tiny) for e in self.eig0]
        self.eig_max = [np.zeros(len(e)) for e in self.eig0]

    @staticmethod
    def _sorted_eigs(A: np.ndarray) -> np.ndarray:
        w = np.linalg.eigvals(A)
        return w[np.lexsort((w.imag, w.real))]

    def evaluate(self, alpha: LoopElement) -> Dict[Tuple[str, int, int], float]:
        values: Dict[Tuple[str, int, int], float] = {}
        m_max = self.config.invariants_m_max
        power = LoopElement.identity(alpha.n)
        for m in range(1, m_max + 1):
            power = loop_mul(power, alpha)
            traces = trace_series(power)
            a, b = self.ranges[("trace", m)]
            for e in range(b, a - 1, -1):
                values[("trace", m, e)] = traces.get(e, 0.0)
        if self.root is not None:
            try:
                root = fractional_power_series(alpha, 1, self.root, self.config.fractional_order, tol=FRACTIONAL_TOP_TOL)
            except (TopNotIdentityError, DegreeNotDivisibleError) as e:
                # the integrator decides whether the run ends; this family stops here
                logger.warning(f"Dropping fractional invariants at t={self.t_reached:.6g}: {str(e)}")
                self.root = None
                self.fractional_dropped_at = self.t_reached
                return values
            power = LoopElement.identity(alpha.n)
            for m in range(1, m_max + 1):
                power = loop_mul(power, root)
                if ("fractional", m) not in self.ranges:
                    continue
                traces = trace_series(power)
                a, b = self.ranges[("fractional", m)]
                for e in range(b, a - 1, -1):
                    values[("fractional", m, e)] = traces.get(e, 0.0)
        return values

    def drift_rows(self, t: float, alpha: LoopElement) -> List[dict]:
        rows = []
        for key, value in self.evaluate(alpha).items():
            kind, m, e = key
            abs_drift = abs(value - self.initial[key])
            rows.append(
                {
                    "t": t,
                    "invariant_id": self.invariant_id(key),
                    "m": m,
                    "exponent": e,
                    "value": value,
                    "abs_drift": abs_drift,
                    "rel_drift": self._relative(key, abs_drift),
                    "coeff_rel_drift": self._coeff_relative(key, abs_drift),
                }
            )
        return rows

    def invariant_id(self, key: Tuple[str, int, int]) -> str:
        kind, m, e = key
        if kind == "fractional":
            return f"tr(alpha^{m}/{self.config.fractional_root})[{e}]"
        return f"tr(alpha^{m})[{e}]"

    def _relative(self, key: Tuple[str, int, int], abs_drift: float) -> float:
        scale = self.scales[key[:2]]
        return abs_drift / max(scale, np.finfo(float).tiny) if abs_drift else 0.0

    def _coeff_relative(self, key: Tuple[str, int, int], abs_drift: float) -> float:
        initial = abs(self.initial[key])
        if initial <= COEFF_FLOOR * self.scales[key[:2]] or initial == 0.0:
            return float("nan")
        return abs_drift / initial

    def observe(self, t: float, alpha: LoopElement):
        self.steps += 1
        self.t_reached = t
        for key, value in self.evaluate(alpha).items():
            self.max_abs[key] = max(self.max_abs[key], abs(value - self.initial[key]))
        for i, lam in enumerate(self.lambdas):
            current = np.linalg.eigvals(alpha.evaluate(lam))
            # pair with the previous step to follow each eigenvalue
            rows, cols = linear_sum_assignment(np.abs(self.eig_prev[i][:, None] - current[None, :]))
            matched = np.empty_like(current)
            matched[rows] = current[cols]
            self.eig_prev[i] = matched
            self.eig_max[i] = np.maximum(self.eig_max[i], np.abs(matched - self.eig0[i]))

    def spectrum_rows(self, t: float, alpha: LoopElement) -> List[dict]:
        rows = []
        for lam, w0 in zip(self.lambdas, self.eig0):
            current = np.linalg.eigvals(alpha.evaluate(lam))
            rows_idx, cols = linear_sum_assignment(np.abs(w0[:, None] - current[None, :]))
            for i, j in zip(rows_idx, cols):
                rows.append(
                    {
                        "t": t,
                        "lambda": lam,
                        "index": int(i),
                        "real": float(current[j].real),
                        "imag": float(current[j].imag),
                        "abs_drift": float(abs(current[j] - w0[i])),
                    }
                )
        return rows

    def report(self, truncation_leakage: float = 0.0) -> ConservationReport:
        invariants = [
            InvariantDrift(
                invariant_id=self.invariant_id(key),
                kind=key[0],
                m=key[1],
                exponent=key[2],
                initial=self.initial[key],
                max_abs_drift=drift,
                max_rel_drift=self._relative(key, drift),
                max_coeff_rel_drift=_optional(self._coeff_relative(key, drift)),
            )
            for key, drift in self.max_abs.items()
        ]
        eigenvalues = [
            EigenvalueDrift(
                lambda_value=lam,
                index=i,
                initial_real=float(w0[i].real),
                initial_imag=float(w0[i].imag),
                max_abs_drift=float(drift[i]),
                max_rel_drift=float(drift[i] / scale),
            )
            for lam, w0, drift, scale in zip(self.lambdas, self.eig0, self.eig_max, self.eig_scale)
            for i in range(len(w0))
        ]
        return ConservationReport(
            invariants=invariants,
            eigenvalues=eigenvalues,
            t_reached=self.t_reached,
            steps=self.steps,
            closed=self.closed,
            spectrum_exact=self.spectrum_exact,
            truncation_leakage=truncation_leakage,
            fractional_dropped_at=self.fractional_dropped_at,
        )


def _optional(value: float) -> Optional[float]:
    return None if np.isnan(value) else value


@dataclass
class FlowResult:
    times: np.ndarray
    snapshots: List[LoopElement]
    report: ConservationReport
    conservation_rows: List[dict] = field(default_factory=list)
    spectrum_rows: List[dict] = field(default_factory=list)
    window: Optional[Tuple[int, int]] = None
    label: str = ""


def _run(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    y0: np.ndarray,
    to_alpha: Callable[[np.ndarray], LoopElement],
    monitor: ConservationMonitor,
    config: FlowConfig,
    leakage: Callable[[], float],
    window: Tuple[int, int],
    label: str,
) -> FlowResult:
    times = np.linspace(0.0, config.t_end, config.snapshot_count)
    try:
        result = integrate(
            rhs,
            y0,
            config.t_end,
            rtol=config.rtol,
            atol=config.atol,
            max_step=config.max_step,
            t_eval=times,
            on_step=lambda t, y: monitor.observe(t, to_alpha(y)),
            **guard_options(config),
        )
    except LaxMarkovError as e:
        logger.error(f"Flow {label} failed: {str(e)}")
        raise

    snapshots = [to_alpha(y) for y in result.y]
    conservation_rows, spectrum_rows = [], []
    for t, snap in zip(result.t, snapshots):
        conservation_rows.extend(monitor.drift_rows(float(t), snap))
        spectrum_rows.extend(monitor.spectrum_rows(float(t), snap))
    report = monitor.report(truncation_leakage=leakage())
    logger.info(
        f"Flow {label} reached t={report.t_reached:.6g} in {report.steps} steps; "
        f"max invariant drift {report.max_invariant_rel_drift():.3e}, "
        f"max eigenvalue drift {report.max_eigenvalue_rel_drift():.3e}"
    )
    return FlowResult(
        times=result.t,
        snapshots=snapshots,
        report=report,
        conservation_rows=conservation_rows,
        spectrum_rows=spectrum_rows,
        window=window,
        label=label,
    )


def integrate_flow(alpha0: LoopElement, rule: GeneratorRule, config: FlowConfig) -> FlowResult:
    """
    Integrate d alpha/dt = [G(alpha), alpha] on the coefficient window of alpha0.

    The window is [val(alpha0), deg(alpha0) + padding] with no padding for
    closed rules. Field coefficients outside the window are dropped and their
    largest magnitude is reported as truncation leakage.
    """
    if alpha0.is_zero():
        raise ZeroElementError("cannot integrate a flow from the zero element")
    padding = 0 if rule.closed else config.window_padding
    window = CoefficientWindow(valuation(alpha0), degree(alpha0) + padding, alpha0.n)
    leak = [0.0]

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        alpha = window.unpack(y)
        velocity = lax_field(alpha, rule.generator(alpha))
        leak[0] = max(leak[0], window.leakage(velocity))
        return window.pack(velocity)

    monitor = ConservationMonitor(alpha0, config, window, closed=rule.closed, spectrum_exact=rule.closed)
    return _run(
        rhs,
        window.pack(alpha0),
        window.unpack,
        monitor,
        config,
        lambda: leak[0],
        (window.lo, window.hi),
        rule.label(),
    )


def integrate_naive_riemann(
    rep: QuasiRep,
    U0,
    V0,
    config: FlowConfig,
    ordering: ProductOrdering = ProductOrdering.LEFT,
) -> FlowResult:
    """
    Integrate the naive matrix discretization with Z frozen, monitoring the
    same functionals of lambda^3 I + lambda^2 U + lambda V + Z as the Lax flows.
    """
    U0, V0 = as_square_pair(U0, V0)
    n = rep.n
    if U0.shape[0] != n:
        raise DimensionMismatchError(f"state size {U0.shape[0]} does not match mesh size {n}")
    Z = rep.Z

    def to_alpha(y: np.ndarray) -> LoopElement:
        U, V = y.reshape(2, n, n)
        return riemann_element(U, V, Z)

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        U, V = y.reshape(2, n, n)
        dU, dV = naive_discretize_riemann(rep, U, V, ordering=ordering, require_diagonal_state=False)
        return np.concatenate([dU.ravel(), dV.ravel()])

    alpha0 = riemann_element(U0, V0, Z)
    window = CoefficientWindow(valuation(alpha0), degree(alpha0), n)
    monitor = ConservationMonitor(alpha0, config, window, closed=True, spectrum_exact=False)
    return _run(
        rhs,
        np.concatenate([U0.ravel(), V0.ravel()]),
        to_alpha,
        monitor,
        config,
        lambda: 0.0,
        (window.lo, window.hi),
        f"naive-{ProductOrdering(ordering).value}",
    )
