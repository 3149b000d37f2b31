"""Config-driven experiment sweeps: specs, runner, plots and the command line."""

from fibermi.experiments.runner import CSV_COLUMNS, ResultRow, read_csv, run, write_csv
from fibermi.experiments.spec import ConfigError, ExperimentSpec, load_preset, load_spec, preset_names

__all__ = ["CSV_COLUMNS", "ConfigError", "ExperimentSpec", "ResultRow", "load_preset", "load_spec",
           "preset_names", "read_csv", "run", "write_csv"]
