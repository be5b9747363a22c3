"""gapatch: black-box adversarial forehead-patch toolkit.

Builds a symmetric grayscale patch by greedy zero-order search over random
Gaussian blobs, guided only by similarity scores from a pluggable
verification oracle, and evaluates it (ASR, misidentification, baselines,
ablations, geometry sweeps, query-budget curves).
"""

from .corpus import (Corpus, PhotoParams, build_corpus, export_corpus,
                     forehead_graft_patch, genuine_pairs, gray_rectangle_patch,
                     noise_patch, render_photo)
from .errors import (BudgetExceededError, DegenerateEmbeddingError,
                     InvalidArgumentError, NotFoundError, OracleError,
                     ProtocolError, TransportError)
from .evaluation import (AblationCell, DEFAULT_ABLATION_GRID, EvalReport,
                         PairSelection, SweepSpec, attack_success_rate,
                         curve_to_csv, geometry_sweep, misidentification_rate,
                         queries_vs_asr, run_ablation, sweep_to_csv)
from .optimizer import (GreedyResult, ImagePair, OptimizerConfig, OptTrace,
                        loss, run_greedy, tie_break)
from .oracle import (QueryLedger, SimilarityOracle, ToyOracle,
                     VerificationThreshold, calibrate_threshold, cosine,
                     toy_embed, TOY_PROJECTION_SEED)
from .patch import (GaussianBlob, Patch, Placement, RegionMask, SamplerConfig,
                    add_blob, apply_patch, central_band_mask, default_placement,
                    drop_all_mask, enforce_symmetry, keep_all_mask, mask_patch,
                    render_blob, sample_blob, trim_bottom_mask, trim_top_mask,
                    zero_patch)
from .patch_io import (load_patch, patch_from_json, patch_to_json, patch_to_png,
                       save_patch)
from .remote import RemoteOracle, ThrottleConfig, remote_similarity_client
from .seeding import derive_rng, derive_seed

__version__ = "0.1.0"
