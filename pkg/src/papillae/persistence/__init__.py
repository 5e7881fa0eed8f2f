from .rips import (
    DiagramConfig,
    PersistenceDiagram,
    RipsFiltration,
    SimplexCapError,
    build_filtration,
    compute_h0,
    compute_h1,
    diagram,
    diagram_from_distances,
    pairwise_distances,
)
