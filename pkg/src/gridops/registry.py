"""Hierarchical inventory of grid resources and the people who run them.

The tree is strictly layered: ROC nodes sit at the top, each country hangs
off a ROC, sites off countries, and services off sites. Contacts attach to
nodes and carry either viewer or admin privilege; certificate identities
(X.509 subject DNs) map onto contacts. Admin privilege is inherited
downwards: an admin at a node can edit anything in that subtree, and any
mapped identity may view everything.
"""

from __future__ import annotations

import json
import re
import threading
from dataclasses import dataclass, field, replace
from datetime import datetime
from decimal import Decimal, InvalidOperation
from enum import Enum
from typing import Callable, Iterator, Optional

from .errors import (
    AuthzDenied,
    DuplicateSiblingName,
    HierarchyViolation,
    UnknownIdentity,
    UnknownNode,
    ValidationError,
)
from .timeutil import ensure_utc, format_ts, utcnow


class NodeKind(str, Enum):
    ROC = "ROC"
    COUNTRY = "COUNTRY"
    SITE = "SITE"
    SERVICE = "SERVICE"


# parent kind required for each kind; ROC is a root
PARENT_KIND = {
    NodeKind.ROC: None,
    NodeKind.COUNTRY: NodeKind.ROC,
    NodeKind.SITE: NodeKind.COUNTRY,
    NodeKind.SERVICE: NodeKind.SITE,
}

KIND_RANK = {
    NodeKind.ROC: 0,
    NodeKind.COUNTRY: 1,
    NodeKind.SITE: 2,
    NodeKind.SERVICE: 3,
}


class NodeStatus(str, Enum):
    ACTIVE = "ACTIVE"
    SUSPENDED = "SUSPENDED"


class ServiceType(str, Enum):
    CE = "CE"
    SE = "SE"
    SBDII = "sBDII"
    WMS = "WMS"
    VOMS = "VOMS"
    LFC = "LFC"
    FTS = "FTS"
    MYPROXY = "MYPROXY"
    OTHER = "OTHER"


class Privilege(str, Enum):
    VIEWER = "VIEWER"
    ADMIN = "ADMIN"


class Action(str, Enum):
    VIEW = "VIEW"
    EDIT = "EDIT"
    ADMIN = "ADMIN"


_EMAIL_RE = re.compile(r"^[^@\s]+@[^@\s]+\.[^@\s]+$")
_ENDPOINT_RE = re.compile(r"^[A-Za-z0-9.\-]+:\d+$")


@dataclass
class RegistryNode:
    id: str
    kind: NodeKind
    name: str
    parent: Optional[str] = None
    attributes: dict[str, str] = field(default_factory=dict)
    status: NodeStatus = NodeStatus.ACTIVE

    def __post_init__(self):
        self.kind = NodeKind(self.kind)
        self.status = NodeStatus(self.status)

    # attribute accessors; SITE and SERVICE carry a required schema,
    # the rest of the map is free-form
    @property
    def cpu_count(self) -> int:
        return int(self.attributes["cpu_count"])

    @property
    def storage_tb(self) -> Decimal:
        return Decimal(self.attributes["storage_tb"])

    @property
    def service_type(self) -> ServiceType:
        return ServiceType(self.attributes["service_type"])

    @property
    def endpoint(self) -> str:
        return self.attributes["endpoint"]

    @property
    def critical(self) -> bool:
        return self.attributes.get("critical", "false").lower() == "true"

    def validate(self) -> None:
        if not self.name:
            raise ValidationError("node name must be non-empty")
        if self.kind is NodeKind.SITE:
            try:
                if self.cpu_count < 0:
                    raise ValidationError("cpu_count must be >= 0")
                if self.storage_tb < 0:
                    raise ValidationError("storage_tb must be >= 0")
            except (KeyError, ValueError, InvalidOperation) as exc:
                raise ValidationError(
                    f"site requires numeric cpu_count and storage_tb: {exc}"
                ) from exc
        elif self.kind is NodeKind.SERVICE:
            try:
                self.service_type
            except (KeyError, ValueError) as exc:
                raise ValidationError(f"service requires a valid service_type: {exc}") from exc
            endpoint = self.attributes.get("endpoint", "")
            if not _ENDPOINT_RE.match(endpoint):
                raise ValidationError(f"service endpoint must be host:port, got {endpoint!r}")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind.value,
            "name": self.name,
            "parent": self.parent,
            "attributes": dict(sorted(self.attributes.items())),
            "status": self.status.value,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RegistryNode":
        return cls(
            id=data["id"],
            kind=NodeKind(data["kind"]),
            name=data["name"],
            parent=data.get("parent"),
            attributes=dict(data.get("attributes", {})),
            status=NodeStatus(data.get("status", "ACTIVE")),
        )


@dataclass
class Contact:
    id: str
    name: str
    email: str
    phone: str
    node: str
    privilege: Privilege

    def __post_init__(self):
        self.privilege = Privilege(self.privilege)
        if not _EMAIL_RE.match(self.email):
            raise ValidationError(f"invalid contact email {self.email!r}")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "email": self.email,
            "phone": self.phone,
            "node": self.node,
            "privilege": self.privilege.value,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Contact":
        return cls(**data)


@dataclass(frozen=True)
class CertIdentity:
    subject_dn: str
    mapped_contact: str


def normalize_dn(dn: str) -> str:
    """Canonicalize a subject DN for exact-match comparison.

    Accepts both comma-separated RFC-2253 form and OpenSSL slash form
    ("/C=RS/O=.../CN=..."). Attribute types are upper-cased, surrounding
    whitespace stripped, components rejoined with ','. Values keep their
    case (CNs are case-sensitive in practice on this infrastructure).
    """
    dn = dn.strip()
    if dn.startswith("/"):
        parts = [p for p in dn.split("/") if p]
    else:
        parts = [p for p in dn.split(",") if p.strip()]
    out = []
    for part in parts:
        if "=" not in part:
            raise ValidationError(f"malformed DN component {part!r}")
        key, _, value = part.partition("=")
        out.append(f"{key.strip().upper()}={value.strip()}")
    if not out:
        raise ValidationError("empty DN")
    return ",".join(out)


@dataclass
class ResourceTotals:
    cpu_total: int = 0
    storage_tb_total: Decimal = Decimal("0")
    site_count: int = 0

    def __add__(self, other: "ResourceTotals") -> "ResourceTotals":
        return ResourceTotals(
            self.cpu_total + other.cpu_total,
            self.storage_tb_total + other.storage_tb_total,
            self.site_count + other.site_count,
        )

    def to_dict(self) -> dict:
        return {
            "cpu_total": self.cpu_total,
            "storage_tb_total": float(self.storage_tb_total),
            "site_count": self.site_count,
        }


@dataclass
class TopologySnapshot:
    generated_at: datetime
    version: int
    nodes: list[RegistryNode]

    def to_document(self) -> str:
        """Stable serialization: nodes ordered by (kind rank, name)."""
        ordered = sorted(self.nodes, key=lambda n: (KIND_RANK[n.kind], n.name))
        doc = {
            "version": self.version,
            "generated_at": format_ts(self.generated_at),
            "nodes": [n.to_dict() for n in ordered],
        }
        return json.dumps(doc, separators=(",", ":"), sort_keys=False)

    @classmethod
    def from_document(cls, text: str) -> "TopologySnapshot":
        doc = json.loads(text)
        from .timeutil import parse_ts

        return cls(
            generated_at=parse_ts(doc["generated_at"]),
            version=int(doc["version"]),
            nodes=[RegistryNode.from_dict(d) for d in doc["nodes"]],
        )


AuditSink = Callable[[str, str, str, str], None]  # actor, operation, target, outcome


class Registry:
    """In-memory registry with single-writer mutation discipline.

    Reads take the lock only long enough to copy references; mutations are
    serialized and bump the snapshot version, whose value is the
    linearization point for exports.
    """

    def __init__(self, audit: AuditSink | None = None, clock: Callable[[], datetime] | None = None):
        self._lock = threading.RLock()
        self._nodes: dict[str, RegistryNode] = {}
        self._children: dict[str, list[str]] = {}
        self._contacts: dict[str, Contact] = {}
        self._identities: dict[str, CertIdentity] = {}
        self._version = 0
        self._clock = clock or utcnow
        self._mutated_at = self._clock()
        self._audit = audit or (lambda actor, op, target, outcome: None)

    # ------------------------------------------------------------------
    # plumbing

    @property
    def version(self) -> int:
        return self._version

    @property
    def mutated_at(self) -> datetime:
        return self._mutated_at

    def restore_counters(self, version: int, mutated_at: datetime) -> None:
        """Reinstate persisted version/timestamp after a replayed load."""
        with self._lock:
            self._version = version
            self._mutated_at = ensure_utc(mutated_at)

    def node(self, node_id: str) -> RegistryNode:
        try:
            return self._nodes[node_id]
        except KeyError:
            raise UnknownNode(f"no node {node_id!r}") from None

    def find_node(self, node_id: str) -> Optional[RegistryNode]:
        return self._nodes.get(node_id)

    def has_node(self, node_id: str) -> bool:
        return node_id in self._nodes

    def children(self, node_id: str) -> list[RegistryNode]:
        return [self._nodes[c] for c in self._children.get(node_id, [])]

    def nodes(self) -> list[RegistryNode]:
        return list(self._nodes.values())

    def contact(self, contact_id: str) -> Contact:
        return self._contacts[contact_id]

    def contacts_at(self, node_id: str) -> list[Contact]:
        return sorted(
            (c for c in self._contacts.values() if c.node == node_id),
            key=lambda c: c.id,
        )

    def ancestors_or_self(self, node_id: str) -> Iterator[RegistryNode]:
        node = self.node(node_id)
        while node is not None:
            yield node
            node = self._nodes.get(node.parent) if node.parent else None

    def country_of(self, node_id: str) -> Optional[RegistryNode]:
        for anc in self.ancestors_or_self(node_id):
            if anc.kind is NodeKind.COUNTRY:
                return anc
        return None

    def site_of(self, node_id: str) -> Optional[RegistryNode]:
        for anc in self.ancestors_or_self(node_id):
            if anc.kind is NodeKind.SITE:
                return anc
        return None

    def iter_subtree(self, scope: str) -> Iterator[RegistryNode]:
        """Depth-first walk, children in name order (deterministic)."""
        node = self.node(scope)
        yield node
        for child in sorted(self.children(node.id), key=lambda n: n.name):
            yield from self.iter_subtree(child.id)

    def services_under(self, scope: str) -> list[RegistryNode]:
        return [n for n in self.iter_subtree(scope) if n.kind is NodeKind.SERVICE]

    def sites_under(self, scope: str) -> list[RegistryNode]:
        return [n for n in self.iter_subtree(scope) if n.kind is NodeKind.SITE]

    # ------------------------------------------------------------------
    # bootstrap / seeding (no actor; used by imports and fixtures)

    def seed_node(self, node: RegistryNode) -> str:
        with self._lock:
            self._validate_placement(node)
            self._put(node)
            self._bump()
        return node.id

    def seed_contact(self, contact: Contact) -> str:
        with self._lock:
            if contact.node not in self._nodes:
                raise UnknownNode(f"contact {contact.id} attached to missing node {contact.node}")
            self._contacts[contact.id] = contact
        return contact.id

    def map_identity(self, subject_dn: str, contact_id: str) -> CertIdentity:
        with self._lock:
            if contact_id not in self._contacts:
                raise ValidationError(f"identity maps to unknown contact {contact_id!r}")
            ident = CertIdentity(normalize_dn(subject_dn), contact_id)
            self._identities[ident.subject_dn] = ident
        return ident

    def identity(self, subject_dn: str) -> CertIdentity:
        ident = self._identities.get(normalize_dn(subject_dn))
        if ident is None:
            raise UnknownIdentity(f"no mapping for DN {subject_dn!r}")
        return ident

    def has_identity(self, subject_dn: str) -> bool:
        try:
            return normalize_dn(subject_dn) in self._identities
        except ValidationError:
            return False

    # ------------------------------------------------------------------
    # operations

    def upsert_node(self, actor: CertIdentity, node: RegistryNode) -> str:
        """Insert or update a node after hierarchy and authz checks.

        Authorization target is the parent path (the node itself for ROC
        updates). A brand-new ROC cannot be created through this call:
        bootstrap goes through seed_node / import_topology.
        """
        with self._lock:
            node.validate()
            authz_target = node.parent if node.parent is not None else (
                node.id if node.id in self._nodes else None
            )
            if authz_target is None or not self.check_authz(actor, Action.EDIT, authz_target):
                self._audit(actor.subject_dn, "upsert_node", node.id, "AUTHZ_DENIED")
                raise AuthzDenied(f"EDIT denied at {authz_target or '<root>'}")
            self._validate_placement(node)
            self._put(node)
            self._bump()
            self._audit(actor.subject_dn, "upsert_node", node.id, "OK")
            return node.id

    def check_authz(self, actor: CertIdentity, action: Action | str, node_id: str) -> bool:
        """True iff some ancestor-or-self contact of the actor grants action.

        ADMIN privilege grants ADMIN, EDIT and VIEW on the whole subtree;
        any mapped identity may VIEW anything.
        """
        action = Action(action)
        ident = self._identities.get(normalize_dn(actor.subject_dn))
        if ident is None:
            raise UnknownIdentity(f"no mapping for DN {actor.subject_dn!r}")
        if node_id not in self._nodes:
            raise UnknownNode(f"no node {node_id!r}")
        if action is Action.VIEW:
            return True
        contact = self._contacts.get(ident.mapped_contact)
        if contact is None or contact.privilege is not Privilege.ADMIN:
            return False
        return any(anc.id == contact.node for anc in self.ancestors_or_self(node_id))

    def resource_summary(self, scope: str) -> ResourceTotals:
        """Sum cpu/storage over ACTIVE descendant sites of scope.

        Only the site's own status matters, which keeps the roll-up
        additive across every level of the tree.
        """
        totals = ResourceTotals()
        for node in self.iter_subtree(scope):
            if node.kind is NodeKind.SITE and node.status is NodeStatus.ACTIVE:
                totals = totals + ResourceTotals(node.cpu_count, node.storage_tb, 1)
        return totals

    def export_topology(self, scope: str) -> TopologySnapshot:
        with self._lock:
            nodes = [replace(n, attributes=dict(n.attributes)) for n in self.iter_subtree(scope)]
            return TopologySnapshot(
                generated_at=self._mutated_at, version=self._version, nodes=nodes
            )

    @classmethod
    def import_topology(
        cls,
        snapshot: TopologySnapshot,
        audit: AuditSink | None = None,
        clock: Callable[[], datetime] | None = None,
    ) -> "Registry":
        """Rebuild a registry from a snapshot (bootstrap path, no actor)."""
        reg = cls(audit=audit, clock=clock)
        pending = sorted(snapshot.nodes, key=lambda n: KIND_RANK[n.kind])
        for node in pending:
            reg.seed_node(node)
        reg._version = snapshot.version
        reg._mutated_at = ensure_utc(snapshot.generated_at)
        return reg

    # ------------------------------------------------------------------
    # internals

    def _validate_placement(self, node: RegistryNode) -> None:
        node.validate()
        old = self._nodes.get(node.id)
        if old is not None and old.kind is not node.kind:
            raise HierarchyViolation(f"node {node.id!r} cannot change kind")
        want_parent = PARENT_KIND[node.kind]
        if want_parent is None:
            if node.parent is not None:
                raise HierarchyViolation("ROC nodes have no parent")
        else:
            if node.parent is None:
                raise HierarchyViolation(f"{node.kind.value} requires a {want_parent.value} parent")
            parent = self._nodes.get(node.parent)
            if parent is None:
                raise UnknownNode(f"parent {node.parent!r} does not exist")
            if parent.kind is not want_parent:
                raise HierarchyViolation(
                    f"{node.kind.value} parent must be {want_parent.value}, "
                    f"got {parent.kind.value}"
                )
        for sibling_id in self._children.get(node.parent, []) if node.parent else [
            nid for nid, n in self._nodes.items() if n.parent is None
        ]:
            sibling = self._nodes[sibling_id]
            if sibling.id != node.id and sibling.name == node.name:
                raise DuplicateSiblingName(f"{node.name!r} already exists under {node.parent!r}")

    def _put(self, node: RegistryNode) -> None:
        old = self._nodes.get(node.id)
        if old is not None and old.parent != node.parent and old.parent is not None:
            self._children[old.parent].remove(node.id)
        self._nodes[node.id] = node
        if node.parent is not None:
            siblings = self._children.setdefault(node.parent, [])
            if node.id not in siblings:
                siblings.append(node.id)

    def _bump(self) -> None:
        self._version += 1
        self._mutated_at = self._clock()


def roots(registry: Registry) -> list[RegistryNode]:
    return [n for n in registry.nodes() if n.parent is None]
