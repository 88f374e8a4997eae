"""Find repeated body-movement patterns in motion capture and judge whether
they are meaningful gestures or mannerisms.

Modules
-------
signal
    Containers and file formats for skeletons, transcripts, prosody, face
    tracks, lexicons and annotations.
sisc
    Shift-invariant sparse coding: learn patterns and their activations.
features
    Per-pattern multimodal feature rows and z-score normalization.
models
    LASSO, max-margin, LDA and a small neural network, plus backward
    feature elimination.
metrics, evaluation
    AUC/ROC, Pearson r, Welch's t-test, category weights and the
    repeated-split protocol.
cli
    The ``mannerism`` command-line pipeline.
"""

from .errors import DataError, NumericalError

__version__ = "0.1.0"
__all__ = ["DataError", "NumericalError", "__version__"]
