from .app import create_app
from .schemas import SynthesisRequest, SynthesisResponse

__all__ = ["create_app", "SynthesisRequest", "SynthesisResponse"]
