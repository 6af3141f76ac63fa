"""Experiment specs, trial runner, sweeps, verification and the CLI."""

from .runner import ExperimentRecord, aggregate, read_records, run_experiment, sweep
from .spec import ConfigError, ExperimentSpec, load_spec, parse_spec_text
from .verify import verify
