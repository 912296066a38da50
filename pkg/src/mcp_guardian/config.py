"""Gateway configuration: one JSON document, nested sections per module."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

from .toolguard import GuardAction, PinMode


class ConfigError(Exception):
    pass


@dataclass
class RateLimitConfig:
    max_requests: int = 5
    window_seconds: int = 60
    methods: list = field(default_factory=lambda: ["tools/call"])

    @property
    def window_ms(self) -> int:
        return self.window_seconds * 1000


@dataclass
class WafConfig:
    rules_path: Optional[str] = None
    include_defaults: bool = True


@dataclass
class ToolguardConfig:
    pin_file: Optional[str] = None
    registry_file: Optional[str] = None
    mode: GuardAction = GuardAction.BLOCK
    pin_mode: PinMode = PinMode.TOFU


@dataclass
class LoggingConfig:
    file: str = "mcp_guardian.log"
    remote_url: Optional[str] = None
    queue_size: int = 1024
    raw_params: bool = False


@dataclass
class AuthConfig:
    token_store: Optional[str] = None
    valid_tokens: list = field(default_factory=list)  # legacy raw-token list


@dataclass
class DownstreamConfig:
    command: Optional[list] = None  # argv for a stdio child process
    url: Optional[str] = None  # HTTP downstream


@dataclass
class GuardianConfig:
    auth: AuthConfig = field(default_factory=AuthConfig)
    rate_limit: RateLimitConfig = field(default_factory=RateLimitConfig)
    waf: WafConfig = field(default_factory=WafConfig)
    toolguard: ToolguardConfig = field(default_factory=ToolguardConfig)
    logging: LoggingConfig = field(default_factory=LoggingConfig)
    downstream: DownstreamConfig = field(default_factory=DownstreamConfig)
    listen_addr: Optional[str] = None  # host:port for the HTTP listener
    guard_notifications: bool = False
    probe_timeout_s: float = 10.0

    @classmethod
    def from_dict(cls, d: dict) -> "GuardianConfig":
        cfg = cls()
        auth = d.get("auth", {})
        cfg.auth = AuthConfig(
            token_store=auth.get("token_store"),
            valid_tokens=list(auth.get("valid_tokens", d.get("valid_tokens", []))),
        )
        rl = d.get("rate_limit", {})
        cfg.rate_limit = RateLimitConfig(
            max_requests=rl.get("max_requests", 5),
            window_seconds=rl.get("window_seconds", 60),
            methods=list(rl.get("methods", ["tools/call"])),
        )
        waf = d.get("waf", {})
        cfg.waf = WafConfig(
            rules_path=waf.get("rules_path"),
            include_defaults=bool(waf.get("include_defaults", True)),
        )
        tg = d.get("toolguard", {})
        try:
            cfg.toolguard = ToolguardConfig(
                pin_file=tg.get("pin_file"),
                registry_file=tg.get("registry_file"),
                mode=GuardAction(tg.get("mode", "block")),
                pin_mode=PinMode(tg.get("pin_mode", "tofu")),
            )
        except ValueError as exc:
            raise ConfigError(f"toolguard: {exc}") from exc
        log = d.get("logging", {})
        cfg.logging = LoggingConfig(
            file=log.get("file", "mcp_guardian.log"),
            remote_url=log.get("remote_url"),
            queue_size=log.get("queue_size", 1024),
            raw_params=bool(log.get("raw_params", False)),
        )
        ds = d.get("downstream", {})
        cfg.downstream = DownstreamConfig(command=ds.get("command"), url=ds.get("url"))
        listen = d.get("listen", {})
        cfg.listen_addr = listen.get("addr") if isinstance(listen, dict) else None
        cfg.guard_notifications = bool(d.get("guard_notifications", False))
        cfg.probe_timeout_s = float(d.get("probe_timeout_s", 10.0))
        return cfg

    @classmethod
    def from_file(cls, path: str) -> "GuardianConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot load config {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config root must be a JSON object")
        return cls.from_dict(doc)
