"""Scenario scripts, the runner that executes them, and the ``paysim`` CLI."""

from .dsl import Script, ScenarioError, Step, parse_scenario, serialize_scenario
from .runner import ExpectationFailed, RunError, render_transcript, run_scenario

__all__ = [
    "ExpectationFailed", "RunError", "ScenarioError", "Script", "Step", "parse_scenario", "render_transcript",
    "run_scenario", "serialize_scenario",
]
