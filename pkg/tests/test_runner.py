import hashlib
import json
import socket
import subprocess
import sys
import textwrap

import pytest

from agentrt.errors import ConfigError
from agentrt.runner import example_path, list_examples, load_config, parse_config, run_scenario
from agentrt.runner.cli import main as cli_main

HELLO = """\
containers:
  - endpoint: local:main
agents:
  - container: 0
    kind: hello.receiver
    aid: receiver
  - container: 0
    kind: hello.caller
    aid: caller
    params:
      target: {ref: receiver}
run:
  mode: stepped
"""


def config(text):
    return parse_config(textwrap.dedent(text))


@pytest.mark.parametrize(
    "text, line, fragment",
    [
        ("containers: [\n", 2, "invalid YAML"),
        ("containers:\n  - endpoint: bogus\n", 2, "containers[0].endpoint"),
        ("containers:\n  - endpoint: local:a\n    codec: xml\n", 3, "unknown codec"),
        ("containers:\n  - endpoint: local:a\nagents:\n  - container: 3\n    kind: sink\n", 4, "no container with index 3"),
        ("containers:\n  - endpoint: local:a\nagents:\n  - container: 0\n    kind: dragon\n", 5, "unknown agent kind"),
        ("containers:\n  - endpoint: local:a\nagents:\n  - container: 0\n", 4, "missing field 'kind'"),
        ("run:\n  mode: warp\n", 2, "unknown mode"),
        ("run:\n  timeout: -1\n", 2, "run.timeout"),
        ("speed: 3\n", 1, "unknown field"),
        ("containers:\n  - endpoint: local:a\n    clock: real\n", 3, "does not fit run mode"),
        (
            "containers:\n  - endpoint: local:a\nagents:\n  - container: 0\n    kind: ticker\n    params:\n      peer: {ref: ghost}\n",
            7,
            "unknown aid 'ghost'",
        ),
        (
            "containers:\n  - endpoint: local:a\nagents:\n  - {container: 0, kind: sink, aid: x}\n  - {container: 0, kind: sink, aid: x}\n",
            5,
            "already used",
        ),
        ("agents:\n  - container: yes\n    kind: sink\n", 2, "container index"),
        ("- 1\n", 1, "mapping at the top level"),
    ],
)
def test_config_errors_are_line_precise(text, line, fragment):
    with pytest.raises(ConfigError) as info:
        parse_config(text, "scenario.yaml")
    assert info.value.line == line
    assert fragment in str(info.value)
    assert str(info.value).startswith(f"scenario.yaml (line {line}): ")


def test_config_defaults():
    cfg = config(HELLO)
    assert cfg.run.mode == "stepped" and cfg.containers[0].codec == "json"
    assert cfg.containers[0].clock == "external"
    assert cfg.agents[1].params["target"].aid == "receiver"


def test_missing_file_is_a_config_error(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "absent.yaml")


def test_empty_scenario():
    report = run_scenario(config("{}"))
    assert report.messages == 0 and report.exit_status == 0 and report.steps == 0


def test_hello_world_report():
    report = run_scenario(config(HELLO))
    assert (report.messages, report.final_time, report.exit_status) == (100, 5.0, 0)
    assert report.direct_messages == 100
    assert report.counters == {}


def _hash(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.mark.parametrize("name", ["hello_world", "topic_fanout", "distributed_clock_demo"])
def test_stepped_examples_are_bit_identical(name, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    hashes = []
    for i in range(2):
        code = cli_main(["run", name, "--transcript", f"t{i}.tsv", "--metrics", f"m{i}.json"])
        assert code == 0
        hashes.append(_hash(tmp_path / f"t{i}.tsv"))
    assert hashes[0] == hashes[1]
    metrics = json.loads((tmp_path / "m0.json").read_text())
    assert metrics["exit_status"] == 0 and metrics["messages"] > 0


def test_transcript_file_format(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert cli_main(["run", "hello_world", "--transcript", "t.tsv"]) == 0
    lines = (tmp_path / "t.tsv").read_text().splitlines()
    assert len(lines) == 100
    time_, seq, sender, receiver, digest, transport = lines[0].split("\t")
    assert (time_, seq, sender, receiver, transport) == ("5.0", "0", "caller", "receiver", "direct")
    assert len(digest) == 16
    assert lines[1].split("\t")[1:4] == ["0", "receiver", "caller"]


def test_tcp_ports_are_released_between_runs():
    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
    text = HELLO.replace("local:main", f"tcp:127.0.0.1:{port}")
    for _ in range(2):
        report = run_scenario(config(text))
        assert report.exit_status == 0 and report.messages == 100


def test_timeout_gives_partial_report():
    report = run_scenario(
        config(
            """\
            containers:
              - endpoint: local:main
            agents:
              - container: 0
                kind: ticker
                params: {interval: 0.2, ticks: 100}
            run:
              mode: real-time
              timeout: 0.5
            """
        )
    )
    assert report.timed_out and report.exit_status == 3
    assert report.error


def test_bad_params_are_a_runtime_error():
    report = run_scenario(
        config(
            """\
            containers:
              - endpoint: local:main
            agents:
              - container: 0
                kind: sink
                params: {volume: 11}
            """
        )
    )
    assert report.exit_status == 2 and "volume" in report.error


def test_real_time_hello_world_short_delay():
    report = run_scenario(config(HELLO.replace("target: {ref: receiver}", "target: {ref: receiver}\n      delay: 0.1").replace("stepped", "real-time")))
    assert report.messages == 100 and report.exit_status == 0
    assert 0.1 <= report.final_time < 5


def test_cli_exit_codes(tmp_path, capsys):
    assert cli_main(["list-examples"]) == 0
    names = capsys.readouterr().out.split()
    assert "hello_world" in names and "distributed_clock_demo" in names
    assert cli_main(["validate", "hello_world"]) == 0
    bad = tmp_path / "bad.yaml"
    bad.write_text("agents:\n  - container: 0\n    kind: sink\n")
    assert cli_main(["validate", str(bad)]) == 1
    assert "line 2" in capsys.readouterr().err
    assert cli_main(["run", str(bad)]) == 1
    slow = tmp_path / "slow.yaml"
    slow.write_text("containers:\n  - endpoint: local:a\nagents:\n  - {container: 0, kind: ticker, params: {interval: 1, ticks: 9}}\nrun: {mode: real-time, timeout: 0.3}\n")
    assert cli_main(["run", str(slow)]) == 3


def test_console_entry_point_runs():
    result = subprocess.run(
        [sys.executable, "-m", "agentrt", "run", "hello_world", "--json"], capture_output=True, text=True, timeout=60
    )
    assert result.returncode == 0, result.stderr
    report = json.loads(result.stdout)
    assert report["messages"] == 100 and report["final_time"] == 5.0


def test_bundled_examples_validate():
    names = [name for name, _ in list_examples()]
    assert set(names) >= {"hello_world", "hello_world_tcp", "topic_fanout", "mirrored_pingpong", "distributed_clock_demo"}
    for name in names:
        load_config(example_path(name))
