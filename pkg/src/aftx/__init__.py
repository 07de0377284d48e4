"""aftx: a desk-scale workbench for transferring speech emotion recognition
models to Big-Five personality perception.

Subpackage map:

- ``tensor`` / ``layers`` / ``optim``: float64 autograd core, transformer
  blocks, AdamW.
- ``container``: the "AFTX1" tensor file format.
- ``audio`` / ``augment``: WAV ingestion, log-mel features, spectrogram
  masking.
- ``corpus``: judge-score schemas, majority-vote labeling, folds, synthetic
  corpora.
- ``model``: the transformer SER network, embedding-stack heads, the
  augmentation-baseline CNN.
- ``metrics``: UAR, phi, Pearson, trait-pair tables.
- ``experiment``: pretrain/transfer/baseline protocols and reports.
- ``cli``: the ``aftx`` command.
"""

from .tensor import Parameter, Tensor, backward
from .optim import AdamW, AdamWState, adamw_step

__version__ = "0.1.0"

__all__ = [
    "AdamW",
    "AdamWState",
    "Parameter",
    "Tensor",
    "adamw_step",
    "backward",
    "__version__",
]
