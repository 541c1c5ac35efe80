"""Bridge pretrained self-supervised speech encoders into the .feat format."""

__version__ = "0.1.0"

from .export import export, get_upstream
from .upstream import UPSTREAMS, UpstreamSpec, build_encoder

__all__ = ["__version__", "UPSTREAMS", "UpstreamSpec", "build_encoder",
           "export", "get_upstream"]
