from .generator import GeneratorConfig, GeneratorNetwork, build_generator, forward_generator
from .discriminator import DiscriminatorNetwork, build_discriminator
from .features import FeatureExtractor, TinyFeatureExtractor, VggFeatureExtractor, extract_features
from .checkpoint import Checkpoint, read_checkpoint, write_checkpoint

__all__ = [
    "GeneratorConfig",
    "GeneratorNetwork",
    "build_generator",
    "forward_generator",
    "DiscriminatorNetwork",
    "build_discriminator",
    "FeatureExtractor",
    "TinyFeatureExtractor",
    "VggFeatureExtractor",
    "extract_features",
    "Checkpoint",
    "read_checkpoint",
    "write_checkpoint",
]
