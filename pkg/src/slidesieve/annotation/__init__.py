from .store import AnnotationRecord, AnnotationStore, compute_prevalence
from .service import create_app

__all__ = ["AnnotationRecord", "AnnotationStore", "compute_prevalence", "create_app"]
