"""Constants for the landmark re-ranking pipeline."""

from typing import Final

DOMAIN: Final = "landmark_rerank"
VERSION: Final = "1.0.0"

# configuration keys
CONF_MODELS: Final = "models"
CONF_TRAIN_LABELS: Final = "train_labels"
CONF_GT: Final = "gt"
CONF_OUT: Final = "out"
CONF_REPORT: Final = "report"
CONF_K_NEIGHBORS: Final = "k_neighbors"
CONF_K_TRAIN_PENALTY: Final = "k_train_penalty"
CONF_K_TEST_PENALTY: Final = "k_test_penalty"
CONF_APPLY_B: Final = "apply_b"
CONF_APPLY_C: Final = "apply_c"
CONF_N_QUANTILES: Final = "n_quantiles"
CONF_TRANSFORM_MODE: Final = "transform_mode"
CONF_ENSEMBLE_MODE: Final = "ensemble_mode"
CONF_POOLED_C: Final = "pooled_c"
CONF_FILTER_TRAIN_CLASSES: Final = "filter_train_classes"
CONF_THREADS: Final = "threads"
CONF_BLOCK_SIZE: Final = "block_size"

# defaults
DEFAULT_K_NEIGHBORS: Final = 3
DEFAULT_K_TRAIN_PENALTY: Final = 5
DEFAULT_K_TEST_PENALTY: Final = 10
DEFAULT_N_QUANTILES: Final = 1000
DEFAULT_TRANSFORM_MODE: Final = "all_roles"
DEFAULT_ENSEMBLE_MODE: Final = "concat"
DEFAULT_POOLED_C: Final = "mean"
DEFAULT_THREADS: Final = 1
DEFAULT_BLOCK_SIZE: Final = 256
MAX_THREADS: Final = 256

# files inside a model directory
TEST_FILE: Final = "test"
TRAIN_FILE: Final = "train"
NONLANDMARK_FILE: Final = "nonlandmark"
EMBEDDING_SUFFIXES: Final = (".emb", ".csv")
TRAIN_LABELS_FILE: Final = "train_labels.csv"
TEST_GT_FILE: Final = "test_gt.csv"

# pipeline stages, used in error reports
STAGE_LOAD: Final = "load"
STAGE_FILTER: Final = "filter"
STAGE_ENSEMBLE: Final = "ensemble"
STAGE_RANK: Final = "rank"
STAGE_WRITE: Final = "write"
STAGE_SCORE: Final = "score"
STAGE_REPORT: Final = "report"

# exit codes
EXIT_OK: Final = 0
EXIT_VALIDATION: Final = 1
EXIT_IO: Final = 2
EXIT_INTERNAL: Final = 3
