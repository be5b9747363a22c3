from .embedder import (BackendDescriptor, ToyBackend, cosine, load_backend,
                       toy_embed)
from .server import BridgeServer, main

__all__ = [
    "BackendDescriptor",
    "BridgeServer",
    "ToyBackend",
    "cosine",
    "load_backend",
    "main",
    "toy_embed",
]

__version__ = "0.1.0"
