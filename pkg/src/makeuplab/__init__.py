"""makeuplab: pixel-accurate makeup mask extraction and transfer.

Stage 1 locates makeup as a per-pixel alpha mask, either with classical
baselines or a patch-local CNN trained on image-level labels only. Stage 2
composites the mask over a target face and refines the blend with a
coarse-to-fine adversarial generator. A CLI and an HTTP session service sit
on top; masks are ordinary 8-bit grayscale files a human can edit.
"""

__version__ = "0.1.0"

from .imaging import (
    REGION_NAMES,
    RegionSelection,
    alpha_composite,
    load_image,
    load_mask,
    mask_combine,
    poisson_blend,
    save_image,
    save_mask,
)
from .geometry import (
    FACE68,
    LandmarkSet,
    NoFaceError,
    build_warp,
    load_landmarks,
    region_encoding,
    save_landmarks,
    warp_image,
    warp_mask,
)
from .extractor import (
    ExtractorConfig,
    PatchLogitMap,
    aggregate,
    build_extractor,
    extract_mask,
    load_extractor,
    mask_loss,
    patch_logits,
    save_extractor,
    train_extractor,
)
from .gan import (
    DiscriminatorConfig,
    GeneratorConfig,
    TrainingConfig,
    build_discriminator,
    build_generator,
    gan_loss_d,
    gan_loss_g,
    generate,
    load_generator,
    rec_loss,
    save_generator,
    train_application,
)
from .classical import (
    SkinColorModel,
    chroma_deviation_mask,
    fit_skin_gmm,
    gmm_makeup_mask,
    residual_mask,
)
from .data import ManifestEntry, load_manifest, sample_batch, synth_faces, write_manifest
from .evaluation import ROCResult, compare_methods, pairwise_auc, roc
from .pipeline import apply_stage, extract_stage, transfer, warp_reference
