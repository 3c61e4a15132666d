# ./models/flow_models.py
import math
import os
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from typing_extensions import TypedDict

load_dotenv()

DEFAULT_OUT_DIR = os.getenv("LAX_MARKOV_OUT_DIR", "out")


class MeshKind(str, Enum):
    UNIFORM = "uniform"
    CHEBYSHEV = "chebyshev"
    EXPLICIT = "explicit"


class GeneratorKind(str, Enum):
    CASIMIR = "casimir"
    FIXED = "fixed"
    PAPER_B = "paper_B"
    NAIVE = "naive"


class BracketVariant(str, Enum):
    CLASSICAL = "classical"
    DEFORMED = "deformed"


class ProductOrdering(str, Enum):
    LEFT = "left"
    SYMMETRIC = "symmetric"


class CasimirSpec(BaseModel):
    """Index pair (n, k) selecting the functional gamma_n^(k)."""

    model_config = ConfigDict(frozen=True)

    n: int = Field(ge=0)
    k: int

    def label(self) -> str:
        return f"({self.n},{self.k})"


class FlowConfig(BaseModel):
    t_end: float = Field(1.0, gt=0)
    rtol: float = Field(1e-9, gt=0)
    atol: float = Field(1e-12, gt=0)
    # None leaves the step unbounded
    max_step: Optional[float] = Field(None, gt=0)
    invariants_m_max: int = Field(4, ge=1)
    snapshot_count: int = Field(11, ge=2)
    lambda_samples: List[float] = [-2.0, -1.0, 1.0, 2.0]
    window_padding: int = Field(3, ge=0)
    fractional_root: Optional[int] = Field(3, ge=2)
    fractional_order: int = Field(6, ge=1)
    # blow-up guards for the integrator
    max_steps: int = Field(20000, ge=1)
    growth_limit: float = Field(1e6, gt=1)
    min_step_fraction: float = Field(1e-10, ge=0, lt=1)

    @field_validator("t_end")
    def t_end_must_be_finite(cls, v):
        if not math.isfinite(v):
            raise ValueError("t_end must be finite")
        return v


class MeshSpec(BaseModel):
    kind: MeshKind = MeshKind.CHEBYSHEV
    n: Optional[int] = Field(8, ge=2)
    interval: Tuple[float, float] = (-1.0, 1.0)
    nodes: Optional[List[float]] = None

    @model_validator(mode="after")
    def explicit_needs_nodes(self):
        if self.kind == MeshKind.EXPLICIT and not self.nodes:
            raise ValueError("an explicit mesh needs a node list")
        return self


class FlowSpec(BaseModel):
    rule: GeneratorKind = GeneratorKind.CASIMIR
    casimir: CasimirSpec = Field(default_factory=lambda: CasimirSpec(n=2, k=4))
    # loop element JSON ({"exponent": matrix}) for the fixed rule
    fixed: Optional[Dict[str, List[List[float]]]] = None
    ordering: ProductOrdering = ProductOrdering.LEFT

    @model_validator(mode="after")
    def fixed_needs_generator(self):
        if self.rule == GeneratorKind.FIXED and self.fixed is None:
            raise ValueError("the fixed rule needs a generator under 'fixed'")
        return self


class ExperimentConfig(BaseModel):
    mesh: MeshSpec = Field(default_factory=MeshSpec)
    # u = x, v = 1 + x^2/10 keeps u^2 + 8v > 0, the hyperbolic side of the system
    u0: str = "poly:0,1"
    v0: str = "poly:1,0,0.1"
    flow: FlowSpec = Field(default_factory=FlowSpec)
    flow_config: FlowConfig = Field(default_factory=FlowConfig)
    n_sweep: List[int] = [2, 4, 8, 16]
    output_dir: str = DEFAULT_OUT_DIR
    seed: int = Field(0, ge=0, lt=2**64)
    random_states: int = Field(20, ge=0)
    involutivity_size: int = Field(4, ge=1)
    involutivity_samples: int = Field(20, ge=1)
    involutivity_n_max: int = Field(3, ge=0)
    involutivity_k_max: int = Field(5, ge=0)
    observable_degrees: List[int] = [0, 1]
    reference_rtol: float = Field(1e-12, gt=0)

    @field_validator("n_sweep")
    def sweep_sizes_at_least_two(cls, v):
        if any(n < 2 for n in v):
            raise ValueError("every N in n_sweep must be at least 2")
        return v

    @field_validator("u0", "v0")
    def profile_must_parse(cls, v):
        # imported here so models stay importable without the numeric stack
        from tools.profile_tools import parse_profile

        parse_profile(v)
        return v


class InvariantDrift(BaseModel):
    invariant_id: str
    kind: str  # "trace" or "fractional"
    m: int
    exponent: int
    initial: float
    max_abs_drift: float = Field(ge=0)
    max_rel_drift: float = Field(ge=0)
    # drift over the coefficient's own initial value; None when that value is negligible
    max_coeff_rel_drift: Optional[float] = Field(None, ge=0)


class EigenvalueDrift(BaseModel):
    lambda_value: float
    index: int
    initial_real: float
    initial_imag: float
    max_abs_drift: float = Field(ge=0)
    max_rel_drift: float = Field(ge=0)


class ConservationReport(BaseModel):
    invariants: List[InvariantDrift] = []
    eigenvalues: List[EigenvalueDrift] = []
    t_reached: float = 0.0
    steps: int = 0
    closed: bool = True
    spectrum_exact: bool = True
    truncation_leakage: float = 0.0
    # time at which the fractional root stopped existing numerically
    fractional_dropped_at: Optional[float] = None

    def max_invariant_rel_drift(self) -> float:
        return max((r.max_rel_drift for r in self.invariants), default=0.0)

    def max_coeff_rel_drift(self) -> float:
        return max((r.max_coeff_rel_drift for r in self.invariants if r.max_coeff_rel_drift is not None), default=0.0)

    def max_eigenvalue_rel_drift(self) -> float:
        return max((r.max_rel_drift for r in self.eigenvalues), default=0.0)


class PrintedFormulaResiduals(BaseModel):
    lambda3_norm: float
    lambda3_closed_form: float
    lambda2_vs_printed_dU: float
    lambda1_vs_printed_dV: float
    generator_vs_printed: float
    generator_oracle: float


class LabState(TypedDict):
    command: str
    config: ExperimentConfig
    out_dir: Path
    messages: List[str]
    status: str
    outputs: Dict[str, str]
    summary: Dict[str, Any]
    response: Dict[str, Any]
