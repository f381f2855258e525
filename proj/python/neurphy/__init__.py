"""Python interface to the neurphy simulators and latent dynamics model.

Configuration values are passed as ``{key: text}`` dicts using the same keys
as the command-line tool and config files, e.g. ``{"system": "orbit",
"epochs": "50"}``.
"""

from ._core import (
    Model,
    NeurPhyError,
    Task,
    __version__,
    config_keys,
    default_config,
    generate,
    load_checkpoint,
    load_tasks,
    orbit_params,
    pendulum_step,
    r2_fit,
    run_cli,
    save_checkpoint,
    save_tasks,
    train,
)


def _text(config):
    return {k: v if isinstance(v, str) else _format(v) for k, v in (config or {}).items()}


def _format(v):
    if isinstance(v, (list, tuple)):
        return ",".join(_format(x) for x in v)
    return repr(v) if isinstance(v, float) else str(v)


def configure(**values):
    """Builds a config dict from keyword values of any type."""
    return _text(values)


__all__ = [
    "Model",
    "NeurPhyError",
    "Task",
    "__version__",
    "config_keys",
    "configure",
    "default_config",
    "generate",
    "load_checkpoint",
    "load_tasks",
    "orbit_params",
    "pendulum_step",
    "r2_fit",
    "run_cli",
    "save_checkpoint",
    "save_tasks",
    "train",
]
