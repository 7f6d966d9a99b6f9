"""WiFi RSS fingerprint positioning with graph neural networks over local communities."""
from .fingerprints import (DatasetSplit, Fingerprint, WapIndex, build_wap_index, load_dataset,
                           load_dataset_dir, rss_vector, split_dataset, write_dataset)
from .graph import (CommunityGraph, NormalizationParams, build_graph, edge_weight,
                    fit_normalization)
from .metrics import ErrorReport, compute_report, emit_comparison, squared_error
from .model import (DnlModel, TrainingConfig, forward, load_checkpoint, predict, save_checkpoint,
                    train)
from .neighborhood import (LocalCommunity, ReferenceSet, knn_predict, manhattan_distance,
                           select_neighbors, wknn_predict)
from .synth import RadioMapConfig, generate, inject_outliers

__version__ = "0.1.0"
