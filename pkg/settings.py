"""
Configuration and logging setup shared by the CLI and the web server.

Structured settings live in YAML files (config.yaml, prune-run manifests);
deployment knobs come from the environment, optionally loaded from a .env
file next to this module.
"""
import logging
import os
from os.path import dirname, join

import yaml
from dotenv import load_dotenv

logger = logging.getLogger(__name__)

load_dotenv(join(dirname(__file__), ".env"))

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
DEFAULT_CONFIG_PATH = "config.yaml"

DEFAULT_TRAINING = {
    "epochs": 12,
    "batch_size": 32,
    "lr": 0.05,
    "momentum": 0.9,
    "weight_decay": 1e-4,
    "schedule": "step160",
    "step_points": [[0.5, 0.01], [0.75, 0.001]],
}

DEFAULT_GATE = {"P": 500, "M": 32}


def env_str(name, default=None):
    return os.environ.get(name, default)


def env_int(name, default):
    value = os.environ.get(name)
    if value is None or value == "":
        return default
    try:
        return int(value)
    except ValueError:
        logger.warning(f"Ignoring non-integer {name}={value!r}, using {default}")
        return default


def default_workers():
    return max(1, env_int("CARDDECK_WORKERS", 1))


def configure_logging(level=None, log_file=None):
    """Set up root logging the same way for every entry point"""
    level = level or env_str("CARDDECK_LOG_LEVEL", "INFO")
    log_file = log_file or env_str("CARDDECK_LOG_FILE", "carddeck.log")
    handlers = [logging.StreamHandler()]
    if log_file:
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(
        level=getattr(logging, str(level).upper(), logging.INFO),
        format=LOG_FORMAT,
        handlers=handlers,
        force=True,
    )


class ToolkitConfig:
    """Centralized YAML configuration loader"""

    @staticmethod
    def load_config(config_path=DEFAULT_CONFIG_PATH):
        """Load a YAML config file, an empty dict when the path is unset"""
        if not config_path:
            return {}
        with open(config_path, "r") as f:
            config = yaml.safe_load(f)
        if config is None:
            return {}
        if not isinstance(config, dict):
            raise ValueError(f"{config_path} must contain a mapping at top level")
        return config

    @staticmethod
    def save_config(config, config_path):
        with open(config_path, "w") as f:
            yaml.safe_dump(config, f, default_flow_style=False, sort_keys=False)

    @staticmethod
    def get_training(config):
        """Training hyperparameters with defaults filled in"""
        training = dict(DEFAULT_TRAINING)
        if config:
            training.update(config.get("training", {}) or {})
        return training

    @staticmethod
    def get_gate(config):
        gate = dict(DEFAULT_GATE)
        if config:
            gate.update(config.get("gate", {}) or {})
        return gate

    @staticmethod
    def get_section(config, name, default=None):
        if not config:
            return default
        value = config.get(name)
        return default if value is None else value
