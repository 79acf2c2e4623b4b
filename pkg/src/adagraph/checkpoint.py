"""Checkpoint files: network, graph and optional metadata classifier in one
JSON document with full float precision."""

from __future__ import annotations

import json

from .graph import DomainGraph
from .network import Network, network_from_dict, network_to_dict


def save_checkpoint(path: str, net: Network, graph: DomainGraph | None = None,
                    source: str | None = None,
                    metadata_classifier: Network | None = None,
                    class_ids: list[str] | None = None) -> None:
    doc = {
        "network": network_to_dict(net),
        "graph": None if graph is None else graph.to_dict(),
        "source": source,
        "metadata_classifier": None if metadata_classifier is None else {
            "network": network_to_dict(metadata_classifier),
            "class_ids": class_ids,
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_checkpoint(path: str) -> dict:
    """Returns {"network", "graph", "source", "metadata_classifier",
    "class_ids"} with deserialized objects (None where absent)."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    out = {
        "network": network_from_dict(doc["network"]),
        "graph": None if doc["graph"] is None else DomainGraph.from_dict(doc["graph"]),
        "source": doc.get("source"),
        "metadata_classifier": None,
        "class_ids": None,
    }
    mc = doc.get("metadata_classifier")
    if mc is not None:
        out["metadata_classifier"] = network_from_dict(mc["network"])
        out["class_ids"] = mc["class_ids"]
    return out
