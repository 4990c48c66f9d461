"""
Configuration settings for framelab.
Handles environment variables and the numeric defaults of every module.
"""

import os
import json
import logging
from pathlib import Path

import dotenv

CONFIG_DIR = Path(__file__).resolve().parent / "config"
DEFAULT_SETTINGS_FILE = CONFIG_DIR / "settings.json"

LOG_FORMAT = "%(asctime)s - %(levelname)s - %(message)s"


class Config:
    """Application configuration class."""

    def __init__(self, json_config=DEFAULT_SETTINGS_FILE, env_file=None):
        """
        Load environment overrides and the JSON defaults.

        Args:
            json_config (str | Path | None): JSON file with the numeric defaults.
                Defaults to the bundled ``config/settings.json``.
            env_file (str | Path | None): Optional ``.env`` file read with python-dotenv.
        """
        # Environment first so a .env file can point at another settings file
        dotenv.load_dotenv(env_file)

        self.LOG_LEVEL = os.getenv("FRAMELAB_LOG_LEVEL", "INFO").upper()
        self.OUT_DIR = os.getenv("FRAMELAB_OUT", "out")
        self.SEED = int(os.getenv("FRAMELAB_SEED")) if os.getenv("FRAMELAB_SEED") else 7

        settings_file = os.getenv("FRAMELAB_SETTINGS") or json_config
        self.SETTINGS_FILE = str(settings_file) if settings_file else None

        data = {}
        if settings_file:
            with open(settings_file, "r", encoding="utf-8") as f:
                data = json.load(f)

        self.MEASURES = data.get("MEASURES", {})
        self.FOURIER = data.get("FOURIER", {})
        self.SPECTRA = data.get("SPECTRA", {})
        self.FRAMES = data.get("FRAMES", {})
        self.SELF_SIMILAR = data.get("SELF_SIMILAR", {})
        self.PRESETS = data.get("PRESETS", [])

    def get(self, section: str, key: str, override=None):
        """
        Return ``override`` when given, else the configured value.

        Example:
            grid = config.get("MEASURES", "default_grid", grid_n)
        """
        if override is not None:
            return override
        try:
            return getattr(self, section)[key]
        except KeyError:
            raise KeyError(f"Missing setting {section}.{key} in {self.SETTINGS_FILE}")

    def validate(self):
        """Validate that all required settings are present and sane."""
        required = {
            "MEASURES": ["min_grid", "density_floor", "growth_factor", "refinement_levels",
                         "mc_samples", "mc_depth", "mc_seed"],
            "FOURIER": ["base_grid", "max_grid", "scan_max_grid", "max_depth", "chunk_elements"],
            "SPECTRA": ["x_step_factor", "separation_gap", "max_pieces", "epsilon_margin",
                        "epsilon_xtol"],
            "FRAMES": ["size_cap", "dense_cap", "jacobi_tol", "jacobi_max_sweeps", "power_tol",
                       "power_max_iter", "diagnostic_grid"],
            "SELF_SIMILAR": ["word_cap", "default_depth", "overlap_threshold", "singular_ratio",
                             "mc_batch"],
        }
        missing = [f"{section}.{key}" for section, keys in required.items()
                   for key in keys if key not in getattr(self, section)]
        if missing:
            raise ValueError(f"Missing required settings: {', '.join(missing)}")

        if self.MEASURES["growth_factor"] <= 1:
            raise ValueError("MEASURES.growth_factor must be greater than 1")
        if self.SPECTRA["x_step_factor"] > 0.25:
            raise ValueError("SPECTRA.x_step_factor must not exceed 1/4")
        if not 0 <= self.SPECTRA["epsilon_margin"] < 0.5:
            raise ValueError("SPECTRA.epsilon_margin must lie in [0, 1/2)")
        if self.LOG_LEVEL not in logging.getLevelNamesMapping():
            raise ValueError(f"Unknown log level {self.LOG_LEVEL}")

        return True


def configure_logging(level: str | None = None):
    """Configure root logging the same way for every entry point."""
    logging.basicConfig(level=level or config.LOG_LEVEL, format=LOG_FORMAT)


# Global config instance
config = Config()
