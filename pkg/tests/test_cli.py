"""CLI surface: golden help output and command round-trips."""

from __future__ import annotations

import json

import pytest
from click.testing import CliRunner
from fastapi.testclient import TestClient

from datastation import cli, records
from datastation.service import create_app

TOP_LEVEL_HELP = """\
Usage: main [OPTIONS] COMMAND [ARGS]...

  Talk to a running station.

Options:
  --help  Show this message and exit.

Commands:
  answer   Claim (unless already yours) and answer a human task.
  approve  Decide a pending access request (dataset owner only).
  capsule  Submit a task capsule, or poll one with --status.
  delete   Delete a dataset and everything derived from it.
  result   Release a sealed result.
  search   Search the catalog.
  serve    Run the station HTTP service.
  tasks    List open human tasks.
  upload   Contribute a dataset (or a zip archive of them).
"""


def test_top_level_help_is_stable():
    result = CliRunner().invoke(cli.main, ["--help"])
    assert result.exit_code == 0
    assert result.output == TOP_LEVEL_HELP


@pytest.mark.parametrize(
    "command,expected_fragment",
    [
        ("upload", "--key-file"),
        ("capsule", "--status"),
        ("result", "--token"),
        ("approve", "--deny"),
        ("tasks", "--mine"),
        ("answer", "--no-claim"),
        ("search", "--keyword"),
        ("serve", "--config"),
    ],
)
def test_subcommand_help(command, expected_fragment):
    result = CliRunner().invoke(cli.main, [command, "--help"])
    assert result.exit_code == 0
    assert expected_fragment in result.output


@pytest.fixture
def cli_env(station, monkeypatch, tmp_path):
    app = create_app(station)

    def fake_client():
        secret = __import__("os").environ.get("STATION_IDENTITY", "")
        headers = {"Authorization": f"Bearer {secret}"} if secret else {}
        return TestClient(app, headers=headers)

    monkeypatch.setattr(cli, "_client", fake_client)
    monkeypatch.setenv("STATION_IDENTITY", "owner-secret")
    key_file = tmp_path / "owner.key"
    key_file.write_text(station._test_private_key.hex())
    return CliRunner(), key_file, tmp_path


def test_upload_and_search_round_trip(cli_env, station, monkeypatch):
    runner, key_file, tmp = cli_env
    csv_path = tmp / "pay.csv"
    csv_path.write_bytes(b"salary,employee_id\n100,1\n")
    result = runner.invoke(
        cli.main,
        [
            "upload", str(csv_path),
            "--key-file", str(key_file),
            "--policy", json.dumps({"access": "open"}),
        ],
    )
    assert result.exit_code == 0, result.output
    dataset_id = json.loads(result.output)["dataset_id"]
    assert station.store.exists(dataset_id)

    monkeypatch.setenv("STATION_IDENTITY", "alice-secret")
    found = runner.invoke(cli.main, ["search", "--keyword", "salary"])
    assert found.exit_code == 0
    assert dataset_id in found.output


def test_capsule_submit_and_result(cli_env, station, monkeypatch):
    runner, key_file, tmp = cli_env
    csv_path = tmp / "names.csv"
    csv_path.write_bytes(b"name\nAda\n")
    assert (
        runner.invoke(
            cli.main,
            ["upload", str(csv_path), "--key-file", str(key_file), "--policy", '{"access": "open"}'],
        ).exit_code
        == 0
    )

    capsule_path = tmp / "cap.json"
    capsule_path.write_text(
        records.dumps(
            {
                "task_type": "qbe",
                "payload": {"attributes": ["name"], "example_rows": [["Ada"]]},
                "dos": {"metric": "coverage", "threshold": 1.0},
                "trust": {},
            }
        )
    )
    monkeypatch.setenv("STATION_IDENTITY", "alice-secret")
    submitted = runner.invoke(cli.main, ["capsule", str(capsule_path)])
    assert submitted.exit_code == 0, submitted.output
    body = json.loads(submitted.output)
    assert body["status"] == "satisfied"

    polled = runner.invoke(cli.main, ["capsule", "--status", body["fingerprint"]])
    assert polled.exit_code == 0

    released = runner.invoke(cli.main, ["result", body["result_id"]])
    assert released.exit_code == 0
    assert "Ada" in released.output


def test_cli_surfaces_error_codes(cli_env, monkeypatch):
    runner, _, _ = cli_env
    monkeypatch.setenv("STATION_IDENTITY", "alice-secret")
    result = runner.invoke(cli.main, ["result", "f" * 32])
    assert result.exit_code == 1
    assert "NotFound" in result.output
