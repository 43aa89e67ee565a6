"""gan_harness: audio-to-image GAN over paired WAV/image corpora."""

from .data import (
    PairedCorpus,
    PairEntry,
    fit_length,
    load_manifest,
    mse,
    read_image,
    read_wav_samples,
    split_corpus,
    write_image,
)
from .evaluate import evaluate
from .infer import Checkpoint, infer, load_checkpoint
from .toy import make_toy_corpus
from .train import TrainConfig, TrainResult, train

__version__ = "0.1.0"
