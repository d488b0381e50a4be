"""Farrell-Jones workbench: exact group theory, controlled algebra and flow spaces for Z^n semidirect Z."""

__version__ = "0.1.0"

# Re-export important classes
from fj_workbench.base.client import WorkbenchClient
from fj_workbench.advanced.client import AdvancedWorkbenchClient
from fj_workbench.config import WorkbenchConfig
