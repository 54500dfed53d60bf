"""Mapper graphs over point clouds, filtrations of DBSCAN cluster covers,
GF(2) homology of their nerves and perturbation stability checks."""

from .clustering import (Clustering, DbscanParams, Kind, LinkageParams, PointLabel, agglomerative,
                         classify_points, dbscan, detect_free_border, epsilon_neighborhood, ordering_oracle,
                         single_linkage)
from .cover import (IntervalCover, PullbackCover, build_interval_cover, check_cover_refinement,
                    interval_growth_for_delta, pullback)
from .filtration import (BiFiltrationGrid, CoverMap, FreeBorderObstruction, SimplicialMap, Tower,
                         build_bifiltration, build_grid, build_tower, compose, cover_map,
                         induced_simplicial_map)
from .homology import (HomologyBasis, HomologyMap, homology, induced_homology_map, persistence_diagram,
                       rank_invariant)
from .interleaving import InterleavingReport, verify_interleaving
from .mapper import ClusterCover, SimplicialComplex, build_cluster_cover, mapper_graph, nerve
from .pointcloud import (FilterAssignment, OrderedPointCloud, Perturbation, eval_filter, load_cloud,
                         pairwise_distance, perturb, read_csv)
from .stability import StabilityExperiment, run_stability

__version__ = "0.1.0"
