"""Privacy-preserving multi-agent logistics planning simulator."""

__version__ = "0.1.0"

from .worlds import (  # noqa: F401
    LocalMap,
    LogisticWorld,
    NodeId,
    Task,
    degree_distribution,
    example_local_map,
    example_world,
    generate_world,
    load_world,
    neighbors,
    shortest_path,
)
