"""Transfer-function model of diffusion and laminar flow in a cylindrical duct."""
from .dynamics import SimulationConfig, discretize, greens_function, resolvent_apply, simulate
from .eigensystem import EigenSystem, ModeTable, build_eigensystem
from .flow_coupling import assemble_A_c, build_K_par, build_K_uni
from .geometry import TABLE_I, CylinderGeometry, FlowField, MediumParams, UnitSystem
from .modal_transform import CuboidObserver, ReleaseProfile, SourceSpec, transform_initial
from .model import ChannelModel
from .pbs import PbsConfig, run_pbs
from .regimes import baseline_series, classify, dispersion_factor
from .series import ConcentrationSeries, fwhm, normalized_rmse, peak

__version__ = "0.1.0"
