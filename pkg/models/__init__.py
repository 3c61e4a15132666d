from .flow_models import (
    MeshKind,
    GeneratorKind,
    BracketVariant,
    ProductOrdering,
    CasimirSpec,
    FlowConfig,
    MeshSpec,
    FlowSpec,
    ExperimentConfig,
    InvariantDrift,
    EigenvalueDrift,
    ConservationReport,
    PrintedFormulaResiduals,
    LabState,
)

__all__ = [
    "MeshKind",
    "GeneratorKind",
    "BracketVariant",
    "ProductOrdering",
    "CasimirSpec",
    "FlowConfig",
    "MeshSpec",
    "FlowSpec",
    "ExperimentConfig",
    "InvariantDrift",
    "EigenvalueDrift",
    "ConservationReport",
    "PrintedFormulaResiduals",
    "LabState",
]
