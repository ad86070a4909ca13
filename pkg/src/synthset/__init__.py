"""synthset: balanced synthetic image datasets with a detection quality gate.

The pipeline samples hierarchically-uniform vehicle labels, renders prompts,
drives text-to-image / image-to-image synthesis backends over a small HTTP
protocol (or an in-process deterministic mock), keeps only images in which a
detector finds exactly one vehicle, crops to its bounding box, augments, and
persists a manifest with full provenance. Evaluation helpers score an
external classifier's predictions against the generated label space.
"""

__version__ = "0.1.0"
