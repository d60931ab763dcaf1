"""Capacity-constrained usefulness simulation for model-guided workflows,
with financial projection and post-deployment monitoring helpers."""

from .workflow import *  # noqa: F401,F403
from .cohort import *  # noqa: F401,F403
from .engine import *  # noqa: F401,F403
from .sweep import *  # noqa: F401,F403
from .finance import *  # noqa: F401,F403
from .monitor import *  # noqa: F401,F403
from .config import *  # noqa: F401,F403
from .report import assemble_report, MissingArtifact  # noqa: F401
from .plotting import emit_plot, heatmap_norm  # noqa: F401

from importlib import resources as _resources


def example_config_path():
    """Path of the bundled PAD example configuration."""
    return _resources.files(__name__) / "data" / "pad_example.yaml"


__version__ = "0.1.0"
