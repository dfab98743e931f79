"""Global value chain metrics from inter-country input-output tables."""
from gvc.icio import (
    BalanceReport,
    CoefficientSet,
    IcioTable,
    coefficients,
    load_table,
    synth_table,
    va_embodied,
    validate,
    write_table,
)
from gvc.kernels import BACKEND
from gvc.network import FlowNetwork, build_network, network_metrics
from gvc.panel import PanelDataset, RegressionSpec, assemble_panel, fit, fit_lpm_binary, template
from gvc.social import SocioEconomicAccounts, labor_content, load_sea
from gvc.tiva import decompose_all, decompose_exports, dvx, gross_exports, gvc_indices

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BalanceReport",
    "CoefficientSet",
    "FlowNetwork",
    "IcioTable",
    "PanelDataset",
    "RegressionSpec",
    "SocioEconomicAccounts",
    "assemble_panel",
    "build_network",
    "coefficients",
    "decompose_all",
    "decompose_exports",
    "dvx",
    "fit",
    "fit_lpm_binary",
    "gross_exports",
    "gvc_indices",
    "labor_content",
    "load_sea",
    "load_table",
    "network_metrics",
    "synth_table",
    "template",
    "va_embodied",
    "validate",
    "write_table",
]
