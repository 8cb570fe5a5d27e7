"""IoC extraction and context enrichment for incidents.

Extraction pulls four indicator kinds out of raw log lines: CVE ids, IPv4
addresses, hostnames, and CWE ids. Matching is purely syntactic; hostnames
additionally require a known top-level label so that dotted token soup in
alert text (malware family names like "Win.Trojan.Something") is not emitted
as a hostname. Values are deduplicated case-insensitively per incident and
keep the 1-based line number of their first occurrence.

Enrichment attaches advisory text per IoC: local knowledge-base hits first,
then remote lookups, both in IoC order. Remote transport failures degrade to
kb-only with a logged warning; they never abort the pipeline. With the remote
side disabled the operation is idempotent given a fixed timestamp source.
"""

from __future__ import annotations

import json
import logging
import os
import re
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import httpx

from .domain import EnrichmentEntry, Incident, IocEntry
from .errors import ConfigError, TransportError

logger = logging.getLogger(__name__)

REMOTE_URL_ENV = "IRPLAN_INTEL_URL"
REMOTE_KEY_ENV = "IRPLAN_INTEL_KEY"
REMOTE_TIMEOUT_S = 5.0

_CVE_RE = re.compile(r"\bCVE-\d{4}-\d{4,7}\b", re.IGNORECASE)
_CWE_RE = re.compile(r"\bCWE-\d+\b", re.IGNORECASE)
# Dotted quad not embedded in a longer dotted/numeric run; octets checked in code.
_IPV4_RE = re.compile(r"(?<![\d.])(\d{1,3}(?:\.\d{1,3}){3})(?![\d.])")
# Labels start with a letter (strict RFC-952 style), may contain digits and
# inner hyphens; at least two labels.
_HOSTNAME_RE = re.compile(
    r"(?<![\w.-])"
    r"((?:[A-Za-z](?:[A-Za-z0-9-]*[A-Za-z0-9])?\.)+"
    r"[A-Za-z](?:[A-Za-z0-9-]*[A-Za-z0-9])?)"
    r"(?![\w.-])"
)

# Last label must be one of these for a dotted token to count as a hostname.
# Alert text is full of dotted identifiers that are not hosts; a curated
# top-level list is how we keep them out while staying dependency-free.
_KNOWN_TLDS = frozenset(
    """
    com net org edu gov mil int arpa info biz name pro aero coop museum
    io ai co us uk de fr nl be ru cn jp kr br in au ca se no fi dk pl cz
    ch at it es pt gr tr ua il za mx ar cl eu asia mobi tel xxx
    dev app cloud xyz top site online tech store space fun live
    onion local lan internal intranet corp home example test invalid
    """.split()
)


def _valid_ipv4(value: str) -> bool:
    return all(0 <= int(octet) <= 255 for octet in value.split("."))


def _valid_hostname(value: str) -> bool:
    labels = value.split(".")
    if len(labels) < 2 or len(value) > 253:
        return False
    return labels[-1].lower() in _KNOWN_TLDS


def normalize_ioc_value(kind: str, value: str) -> str:
    """Canonical form used for dedup and kb keys."""
    if kind in ("cve", "cwe"):
        return value.upper()
    return value.lower()


def extract_iocs(logs: Sequence[str]) -> tuple[IocEntry, ...]:
    """Extract indicators from log lines, first occurrence wins.

    Scans line by line (1-based numbering); within a line, matches are
    ordered by position. Duplicate values of the same kind are
    case-insensitive duplicates and keep their first source line.
    """
    seen: set[tuple[str, str]] = set()
    entries: list[IocEntry] = []
    for line_no, line in enumerate(logs, start=1):
        if not isinstance(line, str):
            continue
        found: list[tuple[int, str, str]] = []
        for match in _CVE_RE.finditer(line):
            found.append((match.start(), "cve", match.group(0)))
        for match in _CWE_RE.finditer(line):
            found.append((match.start(), "cwe", match.group(0)))
        for match in _IPV4_RE.finditer(line):
            if _valid_ipv4(match.group(1)):
                found.append((match.start(), "ipv4", match.group(1)))
        for match in _HOSTNAME_RE.finditer(line):
            if _valid_hostname(match.group(1)):
                found.append((match.start(), "hostname", match.group(1)))
        for _, kind, raw in sorted(found, key=lambda item: item[0]):
            value = normalize_ioc_value(kind, raw)
            key = (kind, value)
            if key in seen:
                continue
            seen.add(key)
            entries.append(IocEntry(kind=kind, value=value, source_line=line_no))
    return tuple(entries)


class KnowledgeBase:
    """Local advisory store: a JSON object mapping IoC value to advisory text."""

    def __init__(self, entries: dict[str, str]):
        self._entries = {key.strip().lower(): text for key, text in entries.items()}

    @classmethod
    def from_file(cls, path: str | Path) -> "KnowledgeBase":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot load knowledge base {path}: {exc}") from exc
        if not isinstance(data, dict) or not all(
            isinstance(v, str) for v in data.values()
        ):
            raise ConfigError(f"knowledge base {path} must map values to text")
        return cls(data)

    def lookup(self, ioc: IocEntry) -> str | None:
        return self._entries.get(ioc.value.lower())

    def __len__(self) -> int:
        return len(self._entries)


def kb_lookup(kb: KnowledgeBase | dict[str, str], ioc: IocEntry) -> str | None:
    """Exact-match lookup on the normalized IoC value."""
    if isinstance(kb, dict):
        kb = KnowledgeBase(kb)
    return kb.lookup(ioc)


class RemoteIntelClient:
    """Minimal client for a remote indicator-context service.

    Issues GET {base_url}/indicator/{kind}/{value} with an API-key header.
    Configured entirely from the environment so no secret ever appears on a
    command line.
    """

    def __init__(self, base_url: str, api_key: str | None = None, timeout_s: float = REMOTE_TIMEOUT_S):
        if not base_url:
            raise ConfigError("remote intel client needs a base URL")
        self.base_url = base_url.rstrip("/")
        self._api_key = api_key
        self.timeout_s = timeout_s

    @classmethod
    def from_env(cls) -> "RemoteIntelClient | None":
        base_url = os.environ.get(REMOTE_URL_ENV, "").strip()
        if not base_url:
            return None
        return cls(base_url, os.environ.get(REMOTE_KEY_ENV) or None)

    def fetch(self, ioc: IocEntry) -> str:
        url = f"{self.base_url}/indicator/{ioc.kind}/{ioc.value}"
        headers = {}
        if self._api_key:
            headers["X-API-Key"] = self._api_key
        try:
            response = httpx.get(url, headers=headers, timeout=self.timeout_s)
        except httpx.HTTPError as exc:
            raise TransportError(f"indicator lookup failed for {ioc.value}: {exc}") from exc
        if response.status_code >= 400:
            raise TransportError(
                f"indicator lookup for {ioc.value} returned {response.status_code}"
            )
        try:
            body = response.json()
        except json.JSONDecodeError:
            return response.text
        if isinstance(body, dict) and isinstance(body.get("advisory"), str):
            return body["advisory"]
        return json.dumps(body, sort_keys=True)


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def enrich(
    incident: Incident,
    kb: KnowledgeBase | dict[str, str] | None = None,
    remote: RemoteIntelClient | None = None,
    now: str | None = None,
) -> Incident:
    """Extract IoCs and attach advisory context to a copy of the incident.

    Previously attached iocs/enrichment are recomputed from scratch, never
    appended to, which is what makes the kb-only path idempotent. ``now``
    pins the recorded timestamp; tests use it, production leaves it None.
    """
    iocs = extract_iocs(incident.logs)
    timestamp = now if now is not None else _utc_now()
    entries: list[EnrichmentEntry] = []
    if kb is not None:
        if isinstance(kb, dict):
            kb = KnowledgeBase(kb)
        for ioc in iocs:
            content = kb.lookup(ioc)
            if content is not None:
                entries.append(
                    EnrichmentEntry(
                        ioc=ioc, source="local_kb", content=content,
                        retrieved_at=timestamp,
                    )
                )
    if remote is not None:
        for ioc in iocs:
            try:
                content = remote.fetch(ioc)
            except TransportError as exc:
                logger.warning(
                    "remote enrichment degraded to kb-only for %s %s: %s",
                    ioc.kind, ioc.value, exc,
                )
                continue
            entries.append(
                EnrichmentEntry(
                    ioc=ioc, source="remote", content=content,
                    retrieved_at=timestamp,
                )
            )
    return replace(incident, iocs=iocs, enrichment=tuple(entries))
