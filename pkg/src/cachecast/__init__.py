"""Cache-assisted multicast scheduling with Poisson requests over finite file lifetimes."""
from .config import ConfigError, ExperimentConfig
from .phy import InfeasibleLinkError, PhyConfig
from .value_model import ValueTable

__version__ = "0.1.0"

__all__ = ["ConfigError", "ExperimentConfig", "InfeasibleLinkError", "PhyConfig", "ValueTable",
           "__version__"]
