"""Runtime configuration and logging setup for the workbench."""

import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

logger = logging.getLogger("fjwb")


@dataclass
class WorkbenchConfig:
    """Configuration shared by the command line, the MCP server and the clients."""

    element_cap: int = 200_000
    subgroup_cap: int = 20_000
    prime_candidate_cap: int = 1_000_000
    word_cap: int = 4096
    quadrature_tolerance: float = 1e-6
    samples: int = 100
    seed: int = 0
    log_level: str = "INFO"
    log_file: Optional[str] = "fjwb.log"

    @classmethod
    def from_env(cls, env_path: Optional[str] = None) -> "WorkbenchConfig":
        """Create a configuration from environment variables.

        The env file named by ``FJWB_ENV_PATH`` (default ``fjwb.env``) is loaded
        first when it exists.

        Args:
            env_path: Explicit env file, overriding ``FJWB_ENV_PATH``.

        Returns:
            WorkbenchConfig: Configuration instance.
        """
        path = env_path or os.environ.get("FJWB_ENV_PATH", "fjwb.env")
        if Path(path).exists():
            load_dotenv(path)
            logger.info(f"Loaded environment variables from {path}")

        defaults = cls()
        try:
            return cls(
                element_cap=int(os.environ.get("FJWB_ELEMENT_CAP", defaults.element_cap)),
                subgroup_cap=int(
                    os.environ.get("FJWB_SUBGROUP_CAP", defaults.subgroup_cap)
                ),
                prime_candidate_cap=int(
                    os.environ.get("FJWB_PRIME_CAP", defaults.prime_candidate_cap)
                ),
                word_cap=int(os.environ.get("FJWB_WORD_CAP", defaults.word_cap)),
                quadrature_tolerance=float(
                    os.environ.get("FJWB_TOLERANCE", defaults.quadrature_tolerance)
                ),
                samples=int(os.environ.get("FJWB_SAMPLES", defaults.samples)),
                seed=int(os.environ.get("FJWB_SEED", defaults.seed)),
                log_level=os.environ.get("LOG_LEVEL", defaults.log_level).upper(),
                log_file=os.environ.get("FJWB_LOG_FILE", defaults.log_file) or None,
            )
        except ValueError as e:
            raise ValueError(f"Invalid workbench environment setting: {e}") from e


def configure_logging(config: WorkbenchConfig) -> logging.Logger:
    """Install file and stream handlers on the ``fjwb`` logger.

    Args:
        config: Configuration carrying the level and log file.

    Returns:
        logging.Logger: The configured workbench logger.
    """
    handlers: list[logging.Handler] = [logging.StreamHandler()]
    if config.log_file:
        handlers.insert(0, logging.FileHandler(config.log_file))
    logging.basicConfig(level=logging.INFO, format=LOG_FORMAT, handlers=handlers)
    logger.setLevel(logging.getLevelName(config.log_level))
    return logger
