import json
import textwrap
import threading

import pytest

from vcsearch.bridge import BridgeEchoServer
from vcsearch.cli import EXIT_BACKEND, EXIT_OK, EXIT_PLAN, EXIT_USAGE, main


@pytest.fixture
def mini_plan(tmp_path):
    path = tmp_path / "plan.ini"
    path.write_text(
        textwrap.dedent(
            """
            [plan]
            table = carla
            scenario = pedestrian-crossing
            seeds = 0
            output_dir = out

            [algorithm.random]
            population_size = 5
            max_evaluations = 10
            """
        )
    )
    return path


def test_usage_errors():
    assert main([]) == EXIT_USAGE
    assert main(["run"]) == EXIT_USAGE
    assert main(["report", "x.jsonl", "--th-safe", "warm"]) == EXIT_USAGE
    assert main(["run", "plan.ini", "--parallel", "0"]) == EXIT_USAGE


def test_plan_errors(tmp_path):
    missing = tmp_path / "nope.ini"
    assert main(["run", str(missing)]) == EXIT_PLAN
    bad = tmp_path / "bad.ini"
    bad.write_text("[plan]\ntable = carla\n")
    assert main(["run", str(bad)]) == EXIT_PLAN


def test_run_report_replay(mini_plan, tmp_path, capsys):
    assert main(["run", str(mini_plan)]) == EXIT_OK
    out = capsys.readouterr().out
    archive = tmp_path / "out" / "random-seed0.jsonl"
    assert str(archive) in out
    assert archive.exists()

    assert main(
        ["report", str(tmp_path / "out" / "*.jsonl"), "--output", str(tmp_path / "rep")]
    ) == EXIT_OK
    assert (tmp_path / "rep" / "summary.json").exists()
    capsys.readouterr()  # discard the report's file listing

    assert main(["replay", str(archive), "3"]) == EXIT_OK
    replayed = json.loads(capsys.readouterr().out)
    assert replayed["match"] is True

    assert main(["replay", str(archive), "999"]) == EXIT_PLAN


def test_run_with_external_backend(mini_plan, tmp_path):
    server = BridgeEchoServer()
    server.serve_in_background()
    try:
        code = main(
            [
                "run",
                str(mini_plan),
                "--backend",
                f"external:{server.endpoint}",
                "--output",
                str(tmp_path / "ext"),
            ]
        )
        assert code == EXIT_OK
        internal = main(["run", str(mini_plan)])
        assert internal == EXIT_OK
        ext = (tmp_path / "ext" / "random-seed0.jsonl").read_bytes()
        loc = (tmp_path / "out" / "random-seed0.jsonl").read_bytes()
        assert ext == loc  # echo server is backed by the same model
    finally:
        server.shutdown()
        server.server_close()


def test_backend_failure_exit_code(mini_plan, tmp_path):
    code = main(
        [
            "run",
            str(mini_plan),
            "--backend",
            "external:127.0.0.1:1",  # nothing listens here
            "--output",
            str(tmp_path / "dead"),
        ]
    )
    assert code == EXIT_BACKEND


def test_report_unreadable_archive(tmp_path):
    junk = tmp_path / "junk.jsonl"
    junk.write_text("not json\n")
    assert main(["report", str(junk)]) == EXIT_PLAN
