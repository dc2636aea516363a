"""Code-hosting platform access: workflow download and version resolution.

All remote traffic goes through :class:`JsonFetcher`, which memoizes every
response for the lifetime of the client, honours rate-limit back-off, and can
replay (or record) responses from a fixture directory. In recorded mode no
socket is ever opened.

Fixture layout, one file per request::

    <fixtures>/<namespace>/<url path>[@<sorted query>].json          200 body
    <fixtures>/<namespace>/<url path>[@<sorted query>].<status>.json  other status
"""

from __future__ import annotations

import base64
import enum
import json
import logging
import os
import tempfile
import threading
import time
from dataclasses import dataclass, field
from email.utils import parsedate_to_datetime
from pathlib import Path
from typing import Any, Callable
from urllib.parse import quote, urlencode

import httpx
from packaging.version import InvalidVersion, Version

from .errors import FixtureMiss, NetworkError, RateLimited, RefNotFound, RepoNotFound
from .workflow_model import ActionRef, RefType

logger = logging.getLogger(__name__)

TOKEN_ENV_VARS = ("WFAUDIT_TOKEN", "GITHUB_TOKEN")
WORKFLOW_DIR = ".github/workflows"


class Mode(enum.Enum):
    LIVE = "live"
    RECORDED = "recorded"
    RECORD_WHILE_LIVE = "record"


@dataclass
class ForgeConfig:
    api_base_url: str = "https://api.github.com"
    auth_token: str | None = field(default=None, repr=False)
    cache_dir: Path | None = None
    mode: Mode = Mode.LIVE
    fixtures_dir: Path | None = None
    max_in_flight: int = 8
    max_retries: int = 3
    max_backoff: float = 300.0

    @classmethod
    def from_env(cls, **kwargs: Any) -> "ForgeConfig":
        token = next((os.environ[v] for v in TOKEN_ENV_VARS if os.environ.get(v)), None)
        return cls(auth_token=token, **kwargs)

    @classmethod
    def recorded(cls, fixtures_dir: str | Path) -> "ForgeConfig":
        return cls(mode=Mode.RECORDED, fixtures_dir=Path(fixtures_dir))


@dataclass(frozen=True)
class Response:
    status: int
    body: Any


def fixture_key(path: str, params: dict[str, Any] | None = None) -> str:
    """Canonical, filesystem-safe name for a request."""
    segments = [quote(s, safe="-._~=,+") for s in path.strip("/").split("/")]
    key = "/".join(segments)
    if params:
        key += "@" + quote(urlencode(sorted((k, str(v)) for k, v in params.items())), safe="=&")
    return key


def _atomic_write(target: Path, text: str) -> None:
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=".tmp-", suffix=".json")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def write_fixture(root: Path, namespace: str, path: str, body: Any, *,
                  params: dict[str, Any] | None = None, status: int = 200) -> Path:
    key = fixture_key(path, params)
    suffix = ".json" if status == 200 else f".{status}.json"
    target = Path(root) / namespace / (key + suffix)
    _atomic_write(target, json.dumps(body, indent=2, sort_keys=True) + "\n")
    return target


class JsonFetcher:
    """GET-only JSON client with per-run memoization, back-off and fixture replay."""

    def __init__(
        self,
        base_url: str,
        namespace: str,
        config: ForgeConfig,
        *,
        headers: dict[str, str] | None = None,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
        clock: Callable[[], float] = time.time,
    ):
        self.base_url = base_url.rstrip("/")
        self.namespace = namespace
        self.config = config
        self._headers = headers or {}
        self._transport = transport
        self._sleep = sleep
        self._clock = clock
        self._memo: dict[str, Response] = {}
        self._key_locks: dict[str, threading.Lock] = {}
        self._lock = threading.Lock()
        self._slots = threading.BoundedSemaphore(max(1, config.max_in_flight))
        self._client: httpx.Client | None = None
        self.remote_calls = 0

    def close(self) -> None:
        if self._client is not None:
            self._client.close()
            self._client = None

    def get(self, path: str, params: dict[str, Any] | None = None) -> Response:
        key = fixture_key(path, params)
        with self._lock:
            if key in self._memo:
                return self._memo[key]
            key_lock = self._key_locks.setdefault(key, threading.Lock())
        with key_lock:
            with self._lock:
                if key in self._memo:
                    return self._memo[key]
            response = self._fetch(key, path, params)
            with self._lock:
                self._memo[key] = response
            return response

    # -- backends ---------------------------------------------------------

    def _fixture_root(self) -> Path | None:
        if self.config.mode is Mode.LIVE:
            return self.config.cache_dir
        return self.config.fixtures_dir

    def _read_fixture(self, root: Path, key: str) -> Response | None:
        base = root / self.namespace / key
        ok = base.parent / (base.name + ".json")
        if ok.is_file():
            return Response(200, json.loads(ok.read_text(encoding="utf-8")))
        if base.parent.is_dir():
            for candidate in sorted(base.parent.glob(base.name + ".*.json")):
                status = candidate.name[len(base.name) + 1 : -len(".json")]
                if status.isdigit():
                    return Response(int(status), json.loads(candidate.read_text(encoding="utf-8")))
        return None

    def _fetch(self, key: str, path: str, params: dict[str, Any] | None) -> Response:
        root = self._fixture_root()
        if self.config.mode is Mode.RECORDED:
            if root is None:
                raise FixtureMiss("recorded mode without a fixtures directory")
            hit = self._read_fixture(root, key)
            if hit is None:
                raise FixtureMiss(f"no recorded response for {self.namespace}/{key}")
            return hit
        if root is not None and self.config.mode is Mode.LIVE:
            hit = self._read_fixture(root, key)
            if hit is not None:
                return hit
        response = self._live(path, params)
        if root is not None:
            write_fixture(root, self.namespace, path, response.body, params=params,
                          status=response.status)
        return response

    def _http(self) -> httpx.Client:
        if self._client is None:
            self._client = httpx.Client(
                base_url=self.base_url,
                headers=self._headers,
                transport=self._transport,
                timeout=30.0,
                follow_redirects=True,
            )
        return self._client

    def _backoff_seconds(self, response: httpx.Response) -> float | None:
        if response.status_code not in (403, 429):
            return None
        retry_after = response.headers.get("retry-after")
        if retry_after:
            try:
                return float(retry_after)
            except ValueError:
                try:
                    return parsedate_to_datetime(retry_after).timestamp() - self._clock()
                except (TypeError, ValueError):
                    return 60.0
        if response.headers.get("x-ratelimit-remaining") == "0":
            reset = response.headers.get("x-ratelimit-reset")
            if reset and reset.isdigit():
                return float(reset) - self._clock()
            return 60.0
        if response.status_code == 429:
            return 60.0
        return None

    def _live(self, path: str, params: dict[str, Any] | None) -> Response:
        attempts = 0
        while True:
            with self._slots:
                self.remote_calls += 1
                try:
                    response = self._http().get("/" + path.lstrip("/"), params=params)
                except httpx.HTTPError as exc:
                    raise NetworkError(f"GET {path}: {exc}") from exc
            wait = self._backoff_seconds(response)
            if wait is None:
                break
            attempts += 1
            if attempts > self.config.max_retries:
                raise RateLimited(f"rate limited on {path}", retry_after=wait)
            # Never spin: at least one second, at most the configured ceiling.
            delay = min(max(wait, 1.0), self.config.max_backoff)
            logger.warning("rate limited on %s, sleeping %.0fs", path, delay)
            self._sleep(delay)
        try:
            body = response.json()
        except ValueError:
            body = {"raw": response.text}
        if response.status_code >= 500:
            raise NetworkError(f"GET {path}: HTTP {response.status_code}")
        return Response(response.status_code, body)


@dataclass(frozen=True)
class LatestVersion:
    tag: str
    commit_sha: str
    published_at: str | None = None


def _highest_semver_tag(tags: list[dict[str, Any]]) -> dict[str, Any] | None:
    best: tuple[Version, dict[str, Any]] | None = None
    for entry in tags:
        try:
            version = Version(str(entry.get("name", "")))
        except InvalidVersion:
            continue
        if version.is_prerelease:
            continue
        if best is None or version > best[0]:
            best = (version, entry)
    return best[1] if best else None


def _split_repo(repository: str) -> tuple[str, str]:
    """Accept ``owner/name`` or ``host/owner/name``."""
    parts = repository.strip("/").split("/")
    if len(parts) < 2:
        raise RepoNotFound(f"not a repository identity: {repository!r}")
    return parts[-2], parts[-1]


class ForgeClient:
    """Read-only client for the hosting platform's REST API."""

    def __init__(self, config: ForgeConfig | None = None, *,
                 transport: httpx.BaseTransport | None = None,
                 sleep: Callable[[float], None] = time.sleep):
        self.config = config or ForgeConfig.from_env()
        headers = {"Accept": "application/vnd.github+json", "User-Agent": "wfaudit"}
        if self.config.auth_token:
            headers["Authorization"] = f"Bearer {self.config.auth_token}"
        self.http = JsonFetcher(self.config.api_base_url, "github", self.config,
                                headers=headers, transport=transport, sleep=sleep)

    @property
    def remote_calls(self) -> int:
        return self.http.remote_calls

    def close(self) -> None:
        self.http.close()

    def _repo(self, repository: str) -> dict[str, Any]:
        owner, name = _split_repo(repository)
        response = self.http.get(f"repos/{owner}/{name}")
        if response.status != 200:
            raise RepoNotFound(f"{owner}/{name}: HTTP {response.status}")
        return response.body

    def list_workflows(self, repository: str) -> list[tuple[str, str]]:
        """Every ``.yml``/``.yaml`` file under the workflow directory on the default branch."""
        owner, name = _split_repo(repository)
        self._repo(repository)
        listing = self.http.get(f"repos/{owner}/{name}/contents/{WORKFLOW_DIR}")
        if listing.status == 404:
            return []
        if listing.status != 200 or not isinstance(listing.body, list):
            raise RepoNotFound(f"{owner}/{name}: cannot list {WORKFLOW_DIR} (HTTP {listing.status})")
        out = []
        for entry in sorted(listing.body, key=lambda e: e.get("path", "")):
            path = entry.get("path", "")
            if entry.get("type") != "file" or not path.endswith((".yml", ".yaml")):
                continue
            blob = self.http.get(f"repos/{owner}/{name}/contents/{path}")
            if blob.status != 200:
                raise RepoNotFound(f"{owner}/{name}: cannot fetch {path} (HTTP {blob.status})")
            out.append((path, _decode_content(blob.body)))
        return out

    def _commit_sha(self, owner: str, name: str, ref: str) -> str:
        response = self.http.get(f"repos/{owner}/{name}/commits/{ref}")
        if response.status != 200:
            raise RefNotFound(f"{owner}/{name}@{ref}: HTTP {response.status}")
        return str(response.body["sha"]).lower()

    def latest_version(self, repository: str) -> LatestVersion:
        """Latest release, else highest semantic-version tag, else default-branch head."""
        owner, name = _split_repo(repository)
        release = self.http.get(f"repos/{owner}/{name}/releases/latest")
        if release.status == 200 and release.body.get("tag_name"):
            tag = str(release.body["tag_name"])
            return LatestVersion(tag, self._commit_sha(owner, name, tag),
                                 release.body.get("published_at"))
        tags = self.http.get(f"repos/{owner}/{name}/tags", {"per_page": 100})
        if tags.status == 200 and isinstance(tags.body, list):
            best = _highest_semver_tag(tags.body)
            if best is not None:
                return LatestVersion(str(best["name"]), str(best["commit"]["sha"]).lower())
        branch = self._repo(repository).get("default_branch", "main")
        return LatestVersion("HEAD", self._commit_sha(owner, name, branch))

    def resolve_ref(self, repository: str, ref: ActionRef) -> str:
        if ref.ref_type is RefType.COMMIT_SHA:
            return ref.ref.lower()
        if ref.ref_type not in (RefType.TAG, RefType.BRANCH):
            raise RefNotFound(f"{ref.raw}: not a resolvable reference")
        owner, name = _split_repo(repository)
        if not ref.ref:
            raise RefNotFound(f"{ref.raw}: empty reference")
        return self._commit_sha(owner, name, ref.ref)


def _decode_content(body: dict[str, Any]) -> str:
    content = body.get("content", "")
    if body.get("encoding") == "base64":
        return base64.b64decode(content).decode("utf-8")
    return str(content)
