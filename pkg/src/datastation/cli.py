"""Command-line client mirroring the HTTP endpoints.

Reads the bearer secret from STATION_IDENTITY and the base URL from
STATION_URL (default http://127.0.0.1:8000). `station serve` runs the
station itself from a config file.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click
import httpx

from . import keys


def _client() -> httpx.Client:
    base = os.environ.get("STATION_URL", "http://127.0.0.1:8000")
    secret = os.environ.get("STATION_IDENTITY", "")
    headers = {"Authorization": f"Bearer {secret}"} if secret else {}
    return httpx.Client(base_url=base, headers=headers, timeout=60.0)


def _show(response: httpx.Response) -> None:
    try:
        body = response.json()
    except ValueError:
        body = {"raw": response.text}
    click.echo(json.dumps(body, indent=2, sort_keys=True))
    if response.status_code >= 400:
        sys.exit(1)


@click.group()
def main():
    """Talk to a running station."""


@main.command()
@click.argument("csv_path", type=click.Path(exists=True, path_type=Path))
@click.option("--key-file", type=click.Path(exists=True, path_type=Path), help="hex Ed25519 private key; signs the upload")
@click.option("--signature", default="", help="precomputed hex signature over the content digest")
@click.option("--owner-key", default="", help="owner public key fingerprint (hex)")
@click.option("--policy", default="", help="access policy record (JSON text or @file)")
@click.option("--bulk", is_flag=True, help="treat CSV_PATH as a zip archive of csv+sig pairs")
def upload(csv_path: Path, key_file: Path | None, signature: str, owner_key: str, policy: str, bulk: bool):
    """Contribute a dataset (or a zip archive of them)."""
    content = csv_path.read_bytes()
    if policy.startswith("@"):
        policy = Path(policy[1:]).read_text()
    if not bulk and key_file is not None:
        private = bytes.fromhex(key_file.read_text().strip())
        signature = keys.sign_content(private, content)
    with _client() as client:
        if bulk:
            response = client.post(
                "/datasets/bulk",
                files={"archive": (csv_path.name, content)},
                data={"policy": policy, "owner_key": owner_key},
            )
        else:
            response = client.post(
                "/datasets",
                files={"csv": (csv_path.name, content)},
                data={"signature": signature, "policy": policy, "owner_key": owner_key},
            )
    _show(response)


@main.command()
@click.argument("capsule_path", required=False, type=click.Path(exists=True, path_type=Path))
@click.option("--status", "fingerprint", default="", help="poll a submitted capsule by fingerprint")
def capsule(capsule_path: Path | None, fingerprint: str):
    """Submit a task capsule, or poll one with --status."""
    with _client() as client:
        if fingerprint:
            _show(client.get(f"/capsules/{fingerprint}"))
            return
        if capsule_path is None:
            raise click.UsageError("pass a capsule file or --status FINGERPRINT")
        _show(client.post("/capsules", content=capsule_path.read_bytes()))


@main.command()
@click.argument("result_id")
@click.option("--token", default="", help="capability token for brokered contributors")
def result(result_id: str, token: str):
    """Release a sealed result."""
    with _client() as client:
        _show(client.get(f"/results/{result_id}", params={"token": token} if token else None))


@main.command()
@click.argument("request_id")
@click.option("--deny", is_flag=True, help="deny instead of approving")
@click.option("--expiry", type=float, default=None, help="token expiry (unix seconds)")
@click.option("--uses", type=int, default=None, help="token use count (omit for unlimited)")
def approve(request_id: str, deny: bool, expiry: float | None, uses: int | None):
    """Decide a pending access request (dataset owner only)."""
    body = {"decision": "deny" if deny else "approve", "expiry": expiry, "uses": uses}
    with _client() as client:
        _show(client.post(f"/access-requests/{request_id}/decision", content=json.dumps(body)))


@main.command()
@click.option("--mine", is_flag=True, help="show tasks you requested instead of the open queue")
def tasks(mine: bool):
    """List open human tasks."""
    with _client() as client:
        _show(client.get("/tasks", params={"mine": mine}))


@main.command()
@click.argument("task_id")
@click.argument("content")
@click.option("--no-claim", is_flag=True, help="skip the implicit claim attempt")
def answer(task_id: str, content: str, no_claim: bool):
    """Claim (unless already yours) and answer a human task."""
    with _client() as client:
        if not no_claim:
            client.post(f"/tasks/{task_id}/claim")  # AlreadyClaimed is fine if it's ours
        _show(client.post(f"/tasks/{task_id}/answer", content=json.dumps({"content": content})))


@main.command()
@click.argument("dataset_id")
def delete(dataset_id: str):
    """Delete a dataset and everything derived from it."""
    with _client() as client:
        _show(client.delete(f"/datasets/{dataset_id}"))


@main.command()
@click.option("--keyword", default="")
@click.option("--creator", default="", help="comma-separated creator key fingerprints")
@click.option("--created-after", type=float, default=None)
@click.option("--requires-why", is_flag=True)
@click.option("--max-depth", type=int, default=None)
def search(keyword: str, creator: str, created_after: float | None, requires_why: bool, max_depth: int | None):
    """Search the catalog."""
    params: dict = {"keyword": keyword, "creator": creator, "requires_why": requires_why}
    if created_after is not None:
        params["created_after"] = created_after
    if max_depth is not None:
        params["max_depth"] = max_depth
    with _client() as client:
        _show(client.get("/catalog/search", params=params))


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
def serve(config_path: Path, host: str, port: int):
    """Run the station HTTP service."""
    import uvicorn

    from .config import load_config
    from .service import create_app
    from .station import Station

    app = create_app(Station(load_config(config_path)))
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
