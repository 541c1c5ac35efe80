"""Speech-based COVID-19 screening pipeline.

Spectral and ingested self-supervised frame features, mean / self-attention
pooling classifiers, a from-scratch CNN+SAP model, narrow-band corpus
filtering, waveform augmentation, UAR evaluation and attention-weight
analysis. See the README for the CLI walkthrough.
"""

__version__ = "0.1.0"

from .audio_io import BandReport, WavClip, detect_bandwidth, normalize_amplitude, read_wav, write_wav
from .interchange import FeatureMatrix, read_feat, register_tag, write_feat
from .metrics import Confusion, uar
from .model import CnnSapModel, HeadModel, load_checkpoint, save_checkpoint
from .spectral import extract, fbank_240, mel_80, mfcc_39, spectrogram_257
from .training import TrainConfig, evaluate, lr_at, train

__all__ = [
    "__version__",
    "BandReport", "WavClip", "detect_bandwidth", "normalize_amplitude",
    "read_wav", "write_wav",
    "FeatureMatrix", "read_feat", "register_tag", "write_feat",
    "Confusion", "uar",
    "CnnSapModel", "HeadModel", "load_checkpoint", "save_checkpoint",
    "extract", "fbank_240", "mel_80", "mfcc_39", "spectrogram_257",
    "TrainConfig", "evaluate", "lr_at", "train",
]
