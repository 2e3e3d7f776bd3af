"""Stage-resolved static timing analysis of a five-stage pipeline on FPGA and ASIC fabrics."""

__version__ = "0.1.0"

from .errors import StageStaError
from .fabric_models import (
    AsicFabricModel,
    FpgaFabricModel,
    RealizedDesign,
    default_calibration,
    realize_asic,
    realize_fpga,
)
from .pipeline_gen import PipelineConfig, build_rv32i_graph
from .sta_engine import extract_paths, fmax, hold_slack, setup_slack, worst_path
from .stats_analysis import (
    SweepResult,
    corner_sweep,
    extract_signatures,
    seed_sweep,
    stage_statistics,
)
from .timing_graph import TimingGraph, validate

__all__ = [
    "AsicFabricModel",
    "FpgaFabricModel",
    "PipelineConfig",
    "RealizedDesign",
    "StageStaError",
    "SweepResult",
    "TimingGraph",
    "build_rv32i_graph",
    "corner_sweep",
    "default_calibration",
    "extract_paths",
    "extract_signatures",
    "fmax",
    "hold_slack",
    "realize_asic",
    "realize_fpga",
    "seed_sweep",
    "setup_slack",
    "stage_statistics",
    "validate",
    "worst_path",
]
