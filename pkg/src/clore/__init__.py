"""Zero-shot classification of structured rows by logical reasoning over
natural-language class explanations."""

from .diffmath import BACKEND_NAME as kernel_backend

__version__ = "0.1.0"
