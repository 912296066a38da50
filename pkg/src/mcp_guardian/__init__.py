"""MCP Guardian: a security gateway for Model Context Protocol traffic.

Sits between an AI client and an MCP tool server, running every request
through authentication, scope checks, per-token rate limiting, WAF
scanning, and tool-manifest integrity checks, with a complete JSONL
audit trail.
"""

__version__ = "0.1.0"
