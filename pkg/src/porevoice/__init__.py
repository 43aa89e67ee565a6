"""porevoice: pore-architecture analysis and sonification for slice stacks."""

from .metrics import (
    Pore,
    PoreNetwork,
    TortuosityResult,
    connect_pores,
    coordination_numbers,
    porosity,
    porosity_per_slice,
    quantify_pores,
    shortest_path_lengths,
    tortuosity_distribution,
)
from .segmentation import (
    binarize,
    distance_transform,
    dump_segmentation,
    luminance_histogram,
    majority_filter,
    median_filter,
    otsu_threshold,
    pore_threshold,
    segment_volume,
    watershed_segment,
)
from .sonify import (
    AudioClip,
    SynthConfig,
    batch_sonify,
    encode_wav,
    read_wav,
    sonify_histogram,
    sonify_pixels,
    spectral_peaks,
    voice_frequency,
    write_wav,
)
from .stats import (
    CompareReport,
    ImagePair,
    PairSet,
    analyze_image_2d,
    build_report,
    mean_luminance,
    moving_average,
    mse,
    mse_summary,
    percent_difference,
)
from .volume import (
    GrayVolume,
    TileId,
    convert_depth,
    crop_center,
    downsample,
    ingest_stack,
    load_gray_image,
    save_gray_image,
    tile_reassemble,
    tile_split,
)

__version__ = "0.1.0"
