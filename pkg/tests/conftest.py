from __future__ import annotations

import json
import socket
from pathlib import Path

import pytest

from wfaudit.forge import ForgeClient, ForgeConfig

FIXTURES = Path(__file__).parent / "fixtures"
WORKFLOWS = FIXTURES / "workflows"
CORPUS = FIXTURES / "corpus"
FORGE = FIXTURES / "forge"


@pytest.fixture
def recorded_client() -> ForgeClient:
    return ForgeClient(ForgeConfig.recorded(FORGE))


@pytest.fixture
def corpus_manifest() -> dict:
    return json.loads((CORPUS / "manifest.json").read_text(encoding="utf-8"))


class _NoNetwork(socket.socket):
    def connect(self, *args, **kwargs):  # pragma: no cover - only hit on a leak
        raise OSError("network access disabled in tests")

    def connect_ex(self, *args, **kwargs):  # pragma: no cover
        raise OSError("network access disabled in tests")


@pytest.fixture(autouse=True)
def no_network(monkeypatch):
    """Fail any attempt to open an outbound connection, in every test."""
    monkeypatch.setattr(socket, "socket", _NoNetwork)
    monkeypatch.setattr(socket, "create_connection",
                        lambda *a, **k: (_ for _ in ()).throw(OSError("network access disabled")))
    monkeypatch.setattr(socket, "getaddrinfo",
                        lambda *a, **k: (_ for _ in ()).throw(OSError("network access disabled")))
    yield


def read(path: Path) -> str:
    return path.read_text(encoding="utf-8")
