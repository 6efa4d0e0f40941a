"""TOML configuration for the service and CLI.

The config path comes from --config or the GRIDOPS_CONFIG environment
variable; a missing file yields pure defaults so the suite runs out of
the box against ./gridops-data.
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

DEFAULT_DATA_DIR = "gridops-data"
ENV_CONFIG = "GRIDOPS_CONFIG"


@dataclass
class ServerConfig:
    listen_host: str = "127.0.0.1"
    listen_port: int = 8440
    tls_cert: Optional[str] = None
    tls_key: Optional[str] = None
    trusted_proxy_header: bool = False
    proxy_header_name: str = "x-client-dn"


@dataclass
class SlaConfig:
    threshold: float = 0.80
    quarter_epoch: date = date(2008, 5, 1)


@dataclass
class ProbesConfig:
    parallelism: int = 16
    default_period_min: int = 30


@dataclass
class AlarmsConfig:
    rule_file: Optional[str] = None


@dataclass
class StoreConfig:
    data_dir: str = DEFAULT_DATA_DIR


@dataclass
class OperationsConfig:
    rota_file: Optional[str] = None


@dataclass
class Config:
    server: ServerConfig = field(default_factory=ServerConfig)
    sla: SlaConfig = field(default_factory=SlaConfig)
    probes: ProbesConfig = field(default_factory=ProbesConfig)
    alarms: AlarmsConfig = field(default_factory=AlarmsConfig)
    store: StoreConfig = field(default_factory=StoreConfig)
    operations: OperationsConfig = field(default_factory=OperationsConfig)
    build_version: str = "0.1.0"


def load_config(path: str | Path | None = None) -> Config:
    """Load config from path, $GRIDOPS_CONFIG, or defaults (in that order)."""
    if path is None:
        path = os.environ.get(ENV_CONFIG)
    cfg = Config()
    if path is None:
        return cfg
    with open(path, "rb") as fh:
        data = tomllib.load(fh)

    server = data.get("server", {})
    cfg.server = ServerConfig(
        listen_host=server.get("listen_host", cfg.server.listen_host),
        listen_port=int(server.get("listen_port", cfg.server.listen_port)),
        tls_cert=server.get("tls_cert"),
        tls_key=server.get("tls_key"),
        trusted_proxy_header=bool(server.get("trusted_proxy_header", False)),
        proxy_header_name=server.get("proxy_header_name", cfg.server.proxy_header_name),
    )
    sla = data.get("sla", {})
    epoch = sla.get("quarter_epoch", cfg.sla.quarter_epoch)
    if isinstance(epoch, str):
        epoch = date.fromisoformat(epoch)
    cfg.sla = SlaConfig(threshold=float(sla.get("threshold", cfg.sla.threshold)), quarter_epoch=epoch)

    probes = data.get("probes", {})
    cfg.probes = ProbesConfig(
        parallelism=int(probes.get("parallelism", cfg.probes.parallelism)),
        default_period_min=int(probes.get("default_period_min", cfg.probes.default_period_min)),
    )
    alarms = data.get("alarms", {})
    cfg.alarms = AlarmsConfig(rule_file=alarms.get("rule_file"))
    store = data.get("store", {})
    cfg.store = StoreConfig(data_dir=store.get("data_dir", cfg.store.data_dir))
    operations = data.get("operations", {})
    cfg.operations = OperationsConfig(rota_file=operations.get("rota_file"))
    return cfg
