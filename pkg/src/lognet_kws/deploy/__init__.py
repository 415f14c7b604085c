"""Model persistence, C header export, RAM budget and sampling-timer helpers."""

from .header import export_c_header, header_text, parse_header_arrays
from .memory import MemoryBudget, aggregation_footprint, estimate_memory
from .persistence import ModelFormatError, load_model, model_from_bytes, model_to_bytes, save_model
from .timer import timer_interrupt_frequency, timer_notes

__all__ = [
    "export_c_header", "header_text", "parse_header_arrays", "MemoryBudget",
    "aggregation_footprint", "estimate_memory", "ModelFormatError", "load_model",
    "model_from_bytes", "model_to_bytes", "save_model", "timer_interrupt_frequency", "timer_notes",
]
