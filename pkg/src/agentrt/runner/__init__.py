"""Declarative scenario runner and bundled examples."""

from .config import AgentConfig, ContainerConfig, OutputOptions, RunOptions, ScenarioConfig, load_config, parse_config
from .examples import example_path, list_examples
from .scenario import RunReport, ScenarioRun, execute_scenario, run_scenario, run_scenario_async

__all__ = [
    "AgentConfig",
    "ContainerConfig",
    "OutputOptions",
    "RunReport",
    "RunOptions",
    "ScenarioConfig",
    "ScenarioRun",
    "example_path",
    "execute_scenario",
    "list_examples",
    "load_config",
    "parse_config",
    "run_scenario",
    "run_scenario_async",
]
