"""Token authentication: hashed-at-rest store, scopes, expiry, issuance.

Secrets are stored only as SHA-256 hashes; the plaintext is returned
exactly once at issuance and never persisted or logged.
"""

from __future__ import annotations

import hashlib
import hmac
import json
import os
import secrets
import stat
import threading
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional

ENV_TOKEN = "MCP_GUARDIAN_TOKEN"


class AuthFailure(Enum):
    MISSING_TOKEN = "missing_token"
    UNKNOWN_TOKEN = "unknown_token"
    EXPIRED = "expired"
    REVOKED = "revoked"


class Unauthorized(Exception):
    """Any auth failure. The client-visible message is always the bare
    "Unauthorized"; the reason goes to the audit log only."""

    def __init__(self, reason: AuthFailure):
        self.reason = reason
        super().__init__("Unauthorized")


class UnknownTokenId(Exception):
    pass


def hash_secret(secret: str) -> str:
    return hashlib.sha256(secret.encode("utf-8")).hexdigest()


@dataclass
class TokenRecord:
    token_id: str
    secret_hash: str  # 64 lowercase hex chars
    scopes: frozenset = frozenset()  # empty set = unrestricted
    expires_at: Optional[int] = None  # epoch ms
    revoked: bool = False

    def to_dict(self) -> dict:
        return {
            "token_id": self.token_id,
            "secret_hash": self.secret_hash,
            "scopes": sorted(self.scopes),
            "expires_at": self.expires_at,
            "revoked": self.revoked,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TokenRecord":
        return cls(
            token_id=d["token_id"],
            secret_hash=d["secret_hash"],
            scopes=frozenset(d.get("scopes") or []),
            expires_at=d.get("expires_at"),
            revoked=bool(d.get("revoked", False)),
        )


@dataclass
class Principal:
    token_id: str
    scopes: frozenset = frozenset()


def check_scope(principal: Principal, tool_name: str) -> bool:
    """True iff any scope pattern matches the tool name.

    Patterns are exact names or trailing-* globs. An empty scope set
    means the token is unrestricted.
    """
    if not principal.scopes:
        return True
    for pattern in principal.scopes:
        if pattern.endswith("*"):
            if tool_name.startswith(pattern[:-1]):
                return True
        elif tool_name == pattern:
            return True
    return False


class TokenStore:
    """Hashed token records, optionally persisted to a JSON file.

    Read-mostly: validations may run concurrently; issue/revoke take the
    write lock and persist immediately.
    """

    def __init__(self, path: Optional[str] = None):
        self.path = path
        self._records: dict[str, TokenRecord] = {}
        self._lock = threading.Lock()
        self._issue_counter = 0
        if path and os.path.exists(path):
            self._load(path)

    def _load(self, path: str) -> None:
        mode = stat.S_IMODE(os.stat(path).st_mode)
        if mode & 0o077:
            warnings.warn(
                f"token store {path} is readable by other users (mode {oct(mode)})",
                stacklevel=2,
            )
        with open(path, encoding="utf-8") as fh:
            for entry in json.load(fh):
                rec = TokenRecord.from_dict(entry)
                self._records[rec.token_id] = rec

    def _persist(self) -> None:
        if not self.path:
            return
        data = [r.to_dict() for r in self._records.values()]
        tmp = self.path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(data, fh, indent=2)
        os.chmod(tmp, 0o600)
        os.replace(tmp, self.path)

    def add_record(self, record: TokenRecord) -> None:
        with self._lock:
            self._records[record.token_id] = record
            self._persist()

    def load_legacy_tokens(self, raw_tokens: Iterable[str]) -> None:
        """Accept a plain list of raw token strings (the reference-setup
        config shape) and hash them at load time."""
        for i, raw in enumerate(raw_tokens):
            rec = TokenRecord(token_id=f"legacy-{i}", secret_hash=hash_secret(raw))
            with self._lock:
                self._records[rec.token_id] = rec

    def records(self) -> list:
        with self._lock:
            return list(self._records.values())

    def get(self, token_id: str) -> Optional[TokenRecord]:
        return self._records.get(token_id)

    def validate_token(self, presented: Optional[str], now: int) -> Principal:
        """Match the presented secret against the store.

        Hash comparison is constant-time. Expired and revoked records
        never validate, regardless of hash match.
        """
        if not presented:
            raise Unauthorized(AuthFailure.MISSING_TOKEN)
        presented_hash = hash_secret(presented)
        matched: Optional[TokenRecord] = None
        # Compare against every record so timing does not reveal which
        # token_id (if any) matched.
        for rec in self._records.values():
            if hmac.compare_digest(presented_hash, rec.secret_hash):
                matched = rec
        if matched is None:
            raise Unauthorized(AuthFailure.UNKNOWN_TOKEN)
        if matched.revoked:
            raise Unauthorized(AuthFailure.REVOKED)
        if matched.expires_at is not None and now >= matched.expires_at:
            raise Unauthorized(AuthFailure.EXPIRED)
        return Principal(token_id=matched.token_id, scopes=matched.scopes)

    def issue_token(
        self,
        scopes: Iterable[str] = (),
        ttl_ms: Optional[int] = None,
        now: int = 0,
        rng=None,
    ) -> tuple:
        """Mint a fresh secret (>= 256 bits, URL-safe) and store its hash.

        Returns (secret, record). The secret is never persisted; the
        token_id is counter-salted so records stay distinct even under a
        seeded test rng.
        """
        if ttl_ms is not None and ttl_ms <= 0:
            raise ValueError("ttl_ms must be positive")
        if rng is None:
            secret = secrets.token_urlsafe(32)
        else:
            secret = "".join(
                rng.choice("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789-_")
                for _ in range(43)
            )
        with self._lock:
            self._issue_counter += 1
            token_id = f"tok-{now}-{self._issue_counter}"
            record = TokenRecord(
                token_id=token_id,
                secret_hash=hash_secret(secret),
                scopes=frozenset(scopes),
                expires_at=(now + ttl_ms) if ttl_ms is not None else None,
            )
            self._records[token_id] = record
            self._persist()
        return secret, record

    def revoke_token(self, token_id: str) -> None:
        """Mark a record revoked. Idempotent."""
        with self._lock:
            rec = self._records.get(token_id)
            if rec is None:
                raise UnknownTokenId(token_id)
            rec.revoked = True
            self._persist()


def session_token_from_env(environ=None) -> Optional[str]:
    env = os.environ if environ is None else environ
    return env.get(ENV_TOKEN) or None
