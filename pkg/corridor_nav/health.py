# corridor_nav/health.py
from __future__ import annotations

import logging
import socket
import time
from dataclasses import dataclass
from typing import Optional, Tuple
from urllib.parse import urlsplit

logger = logging.getLogger(__name__)

DEFAULT_PORTS = {"http": 80, "https": 443}


@dataclass
class ProbeResult:
    ok: bool
    reason: str
    latency_ms: Optional[float] = None
    error: Optional[str] = None


def _since(start: float) -> float:
    return (time.perf_counter() - start) * 1000.0


def split_endpoint(base_url: str) -> Tuple[str, int]:
    """Host and port of an http(s) base URL; the scheme default port when none is given."""
    parts = urlsplit(base_url if "://" in base_url else f"http://{base_url}")
    if not parts.hostname:
        raise ValueError(f"No host in endpoint URL: {base_url!r}")
    return parts.hostname, parts.port or DEFAULT_PORTS.get(parts.scheme, 80)


def tcp_probe(host: str, port: int, timeout_ms: int = 300) -> ProbeResult:
    """
    Open and close a TCP connection to (host, port), over IPv4 or IPv6 as the host resolves.
    ok=True only when the connection is accepted; a refusal means no model server is listening.
    """
    start = time.perf_counter()
    try:
        with socket.create_connection((host, port), timeout=timeout_ms / 1000.0):
            pass
    except ConnectionRefusedError:
        return ProbeResult(False, f"{port} refused", latency_ms=_since(start), error="refused")
    except socket.timeout:
        return ProbeResult(False, f"{port} timeout", error="timeout")
    except socket.gaierror as e:
        return ProbeResult(False, f"{host} unresolved", error=f"gaierror: {e}")
    except OSError as e:
        return ProbeResult(False, f"{port} os error", error=f"{e.__class__.__name__}: {e}")
    return ProbeResult(True, f"{port} ok", latency_ms=_since(start))


def probe_endpoint(base_url: str, timeout_ms: int = 1000) -> ProbeResult:
    """Pre-flight reachability check of the model server behind ``base_url``."""
    try:
        host, port = split_endpoint(base_url)
    except ValueError as e:
        return ProbeResult(False, "bad url", error=str(e))
    result = tcp_probe(host, port, timeout_ms)
    if result.ok:
        logger.debug(f"Endpoint {host}:{port} reachable in {result.latency_ms:.1f} ms")
    else:
        logger.warning(f"Endpoint {host}:{port} not reachable: {result.reason}")
    return result
