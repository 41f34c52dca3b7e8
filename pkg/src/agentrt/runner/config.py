"""Scenario configuration: YAML text validated into :class:`ScenarioConfig`.

Schema (see ``docs/config.md`` for the long form)::

    name: text                      # optional
    modules: [python.module, ...]   # imported first; may register agent kinds
    registry_factory: mod:func      # optional codec registry extension
    containers:
      - endpoint: local:main | tcp:127.0.0.1:0 | topic:broker | ec:channel
        codec: json | binary        # default json
        clock: real | external      # default derived from run.mode
    agents:
      - container: 0                # index into containers
        kind: hello.caller          # registered agent kind
        aid: caller                 # optional suggested aid
        process: false              # host in a subprocess behind a mirror
        params: {target: {ref: receiver}}
    run:
      mode: real-time | stepped | distributed-stepped
      max_steps: 10000
      timeout: 30                   # wall seconds for the whole run
      start_time: 0.0
    outputs:
      transcript: path.tsv
      metrics: path.json

Output paths are relative to the working directory. A param value of the form ``{ref: aid}`` is replaced by the address of the
agent registered under that aid. Errors name the offending field and the
line it is on.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from ..codec import FLAVORS
from ..distribution.registry import AGENT_FACTORIES, import_modules
from ..errors import AddressParseError, ConfigError
from ..messaging import Endpoint

MODES = ("real-time", "stepped", "distributed-stepped")
CLOCKS = ("real", "external")
DEFAULT_MODULES = ("agentrt.runner.kinds",)


@dataclass(frozen=True)
class ContainerConfig:
    endpoint: str
    codec: str = "json"
    clock: str = "external"


@dataclass(frozen=True)
class AgentConfig:
    container: int
    kind: str
    aid: str | None = None
    params: dict = field(default_factory=dict)
    process: bool = False


@dataclass(frozen=True)
class RunOptions:
    mode: str = "stepped"
    max_steps: int = 10_000
    timeout: float = 30.0
    start_time: float = 0.0


@dataclass(frozen=True)
class OutputOptions:
    transcript: str | None = None
    metrics: str | None = None


@dataclass(frozen=True)
class ScenarioConfig:
    containers: tuple[ContainerConfig, ...] = ()
    agents: tuple[AgentConfig, ...] = ()
    run: RunOptions = RunOptions()
    outputs: OutputOptions = OutputOptions()
    name: str = "scenario"
    modules: tuple[str, ...] = ()
    registry_factory: str | None = None
    source: str = "<config>"


@dataclass(frozen=True)
class Ref:
    """Placeholder for the address of another agent of the scenario."""

    aid: str


class _Doc:
    """Plain data converted from a YAML node tree, with line lookup by path."""

    def __init__(self, source: str):
        self.source = source
        self.lines: dict[str, int] = {}

    def convert(self, node: yaml.Node, path: str) -> Any:
        self.lines[path] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            out = {}
            for key_node, value_node in node.value:
                key = key_node.value
                sub = f"{path}.{key}" if path else str(key)
                if key in out:
                    raise ConfigError(f"duplicate key {key!r}", self.source, key_node.start_mark.line + 1)
                out[key] = self.convert(value_node, sub)
            return out
        if isinstance(node, yaml.SequenceNode):
            return [self.convert(item, f"{path}[{i}]") for i, item in enumerate(node.value)]
        return _scalar_loader.construct_object(node, deep=True)

    def line(self, path: str) -> int | None:
        while path:
            if path in self.lines:
                return self.lines[path]
            cut = max(path.rfind("."), path.rfind("["))
            path = path[:cut] if cut > 0 else ""
        return self.lines.get("")

    def error(self, path: str, message: str) -> ConfigError:
        return ConfigError(f"{path}: {message}" if path else message, self.source, self.line(path))


_scalar_loader = yaml.SafeLoader("")


def _expect(doc: _Doc, value: Any, types, path: str, what: str) -> Any:
    if isinstance(value, bool) and bool not in (types if isinstance(types, tuple) else (types,)):
        raise doc.error(path, f"expected {what}, got {value!r}")
    if not isinstance(value, types):
        raise doc.error(path, f"expected {what}, got {value!r}")
    return value


def _check_keys(doc: _Doc, mapping: dict, allowed: set[str], path: str) -> None:
    for key in mapping:
        if key not in allowed:
            raise doc.error(f"{path}.{key}" if path else str(key), f"unknown field (allowed: {', '.join(sorted(allowed))})")


def _params(doc: _Doc, value: Any, path: str) -> Any:
    if isinstance(value, dict):
        if set(value) == {"ref"}:
            return Ref(_expect(doc, value["ref"], str, f"{path}.ref", "an aid"))
        return {k: _params(doc, v, f"{path}.{k}") for k, v in value.items()}
    if isinstance(value, list):
        return [_params(doc, v, f"{path}[{i}]") for i, v in enumerate(value)]
    return value


def parse_config(text: str, source: str = "<config>") -> ScenarioConfig:
    doc = _Doc(source)
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        raise ConfigError(f"invalid YAML: {exc.problem or exc}", source, mark.line + 1 if mark else None) from None
    if root is None:
        data: Any = {}
    else:
        data = doc.convert(root, "")
    _expect(doc, data, dict, "", "a mapping at the top level")
    _check_keys(doc, data, {"name", "modules", "registry_factory", "containers", "agents", "run", "outputs"}, "")

    modules = tuple(_expect(doc, data.get("modules", []), list, "modules", "a list of module names"))
    for i, name in enumerate(modules):
        _expect(doc, name, str, f"modules[{i}]", "a module name")
    try:
        import_modules([*DEFAULT_MODULES, *modules])
    except ImportError as exc:
        raise doc.error("modules", f"cannot import: {exc}") from None

    run_data = _expect(doc, data.get("run", {}), dict, "run", "a mapping")
    _check_keys(doc, run_data, {"mode", "max_steps", "timeout", "start_time"}, "run")
    mode = run_data.get("mode", "stepped")
    if mode not in MODES:
        raise doc.error("run.mode", f"unknown mode {mode!r} (expected one of {', '.join(MODES)})")
    max_steps = _expect(doc, run_data.get("max_steps", 10_000), int, "run.max_steps", "an integer")
    if max_steps < 0:
        raise doc.error("run.max_steps", "must be >= 0")
    timeout = _expect(doc, run_data.get("timeout", 30.0), (int, float), "run.timeout", "a number of seconds")
    if timeout <= 0:
        raise doc.error("run.timeout", "must be > 0")
    start_time = _expect(doc, run_data.get("start_time", 0.0), (int, float), "run.start_time", "a number")
    run = RunOptions(mode, max_steps, float(timeout), float(start_time))

    containers = []
    for i, item in enumerate(_expect(doc, data.get("containers", []), list, "containers", "a list")):
        path = f"containers[{i}]"
        _expect(doc, item, dict, path, "a mapping")
        _check_keys(doc, item, {"endpoint", "codec", "clock"}, path)
        if "endpoint" not in item:
            raise doc.error(path, "missing field 'endpoint'")
        endpoint = _expect(doc, item["endpoint"], str, f"{path}.endpoint", "an endpoint")
        try:
            Endpoint.parse(endpoint)
        except AddressParseError as exc:
            raise doc.error(f"{path}.endpoint", str(exc)) from None
        codec = item.get("codec", "json")
        if codec not in FLAVORS:
            raise doc.error(f"{path}.codec", f"unknown codec {codec!r} (expected one of {', '.join(sorted(FLAVORS))})")
        clock = item.get("clock", "real" if mode == "real-time" else "external")
        if clock not in CLOCKS:
            raise doc.error(f"{path}.clock", f"unknown clock {clock!r} (expected real or external)")
        if (mode == "real-time") != (clock == "real"):
            raise doc.error(f"{path}.clock", f"clock {clock!r} does not fit run mode {mode!r}")
        containers.append(ContainerConfig(endpoint, codec, clock))

    agents = []
    explicit_aids: dict[str, int] = {}
    for i, item in enumerate(_expect(doc, data.get("agents", []), list, "agents", "a list")):
        path = f"agents[{i}]"
        _expect(doc, item, dict, path, "a mapping")
        _check_keys(doc, item, {"container", "kind", "aid", "params", "process"}, path)
        for required in ("container", "kind"):
            if required not in item:
                raise doc.error(path, f"missing field {required!r}")
        index = _expect(doc, item["container"], int, f"{path}.container", "a container index")
        if not 0 <= index < len(containers):
            raise doc.error(f"{path}.container", f"no container with index {index} ({len(containers)} defined)")
        kind = _expect(doc, item["kind"], str, f"{path}.kind", "an agent kind")
        if kind not in AGENT_FACTORIES:
            raise doc.error(f"{path}.kind", f"unknown agent kind {kind!r}")
        aid = item.get("aid")
        if aid is not None:
            _expect(doc, aid, str, f"{path}.aid", "an aid")
            if not aid or any(ch.isspace() for ch in aid):
                raise doc.error(f"{path}.aid", f"invalid aid {aid!r}")
            if aid in explicit_aids:
                raise doc.error(f"{path}.aid", f"aid {aid!r} already used by agents[{explicit_aids[aid]}]")
            explicit_aids[aid] = i
        params = _params(doc, _expect(doc, item.get("params", {}), dict, f"{path}.params", "a mapping"), f"{path}.params")
        process = _expect(doc, item.get("process", False), bool, f"{path}.process", "true or false")
        agents.append(AgentConfig(index, kind, aid, params, process))

    for i, entry in enumerate(agents):
        for ref_path, ref in _refs(entry.params, f"agents[{i}].params"):
            if ref.aid not in explicit_aids:
                raise doc.error(ref_path, f"reference to unknown aid {ref.aid!r}")

    out_data = _expect(doc, data.get("outputs", {}), dict, "outputs", "a mapping")
    _check_keys(doc, out_data, {"transcript", "metrics"}, "outputs")
    outputs = OutputOptions(
        transcript=_optional_path(doc, out_data, "transcript"),
        metrics=_optional_path(doc, out_data, "metrics"),
    )
    registry_factory = data.get("registry_factory")
    if registry_factory is not None:
        _expect(doc, registry_factory, str, "registry_factory", "'module:function'")
    name = str(data.get("name", Path(source).stem if source != "<config>" else "scenario"))
    return ScenarioConfig(tuple(containers), tuple(agents), run, outputs, name, modules, registry_factory, source)


def _optional_path(doc: _Doc, data: dict, key: str) -> str | None:
    value = data.get(key)
    if value is None:
        return None
    return _expect(doc, value, str, f"outputs.{key}", "a file path")


def _refs(value: Any, path: str):
    if isinstance(value, Ref):
        yield path + ".ref", value
    elif isinstance(value, dict):
        for k, v in value.items():
            yield from _refs(v, f"{path}.{k}")
    elif isinstance(value, list):
        for i, v in enumerate(value):
            yield from _refs(v, f"{path}[{i}]")


def load_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from None
    return parse_config(text, str(path))
