"""Experiment harness: streams, runs, replications, traces and the command line."""
from .experiment import MethodConfig, run_experiment
from .replicate import run_replications
from .streams import StreamSpec, parse_stream

__all__ = ["MethodConfig", "StreamSpec", "parse_stream", "run_experiment", "run_replications"]
