"""slidesieve: impurity detection and semantic filtering for scraped
image-text corpora, with a Fréchet-distance evaluation harness."""

from .labels import CATEGORY_NAMES, ImpurityCategory, ImpurityLabelSet, N_CATEGORIES

__version__ = "0.1.0"

__all__ = ["CATEGORY_NAMES", "ImpurityCategory", "ImpurityLabelSet", "N_CATEGORIES", "__version__"]
