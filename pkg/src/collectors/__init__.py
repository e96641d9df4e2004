"""Provider-backed collectors: speech recognition and risk feature extraction."""
from .asr import AsrGateway, AsrProviderDescriptor
from .extraction import ExtractionProviderDescriptor, RiskFeatureExtractor

__all__ = [
    "AsrGateway",
    "AsrProviderDescriptor",
    "ExtractionProviderDescriptor",
    "RiskFeatureExtractor",
]
