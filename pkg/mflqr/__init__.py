# flake8: noqa: F401

from importlib import metadata

try:
    package_metadata = metadata.metadata("mflqr")

    __author__ = package_metadata["author-email"]
    __version__ = package_metadata["version"]
except metadata.PackageNotFoundError:
    __author__ = __version__ = None

from mflqr.conf import settings
from mflqr.disturbance import DiscreteDisturbance, atom, bernoulli_shifted
from mflqr.logger import logger, set_log_level
from mflqr.pbd import PseudoBlockMatrix, phi
from mflqr.riccati import control, reconstruct_centralized, solve_centralized, solve_mean_field
from mflqr.simulation import Simulation, ensemble, rollout
from mflqr.system import SystemSpec, per_step
