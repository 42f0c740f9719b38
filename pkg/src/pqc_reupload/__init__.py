"""pqc-reupload.

A hybrid quantum-classical classifier that re-uploads classical data into a small
parameterized quantum circuit, simulated exactly on a 4-qubit statevector.

This package provides tools to:
- Build circuit templates from a catalog of architectures
- Encode tabular features and small images as rotation angles
- Train binary and one-vs-others classifiers with parameter-shift gradients
- Cross-validate, sweep and inspect trained models

Example:
    Train on the parity dataset from Python:

    >>> from pqc_reupload import RunConfig
    >>> run = RunConfig(dataset="parity").resolve()
    >>> run.template().arch_id
    'simple-a'

    Or use the CLI:

    $ pqc-reupload train --dataset parity --out runs/parity
"""

from .__version__ import __version__
from .config import RunConfig
from .main import app

__all__ = ["RunConfig", "__version__", "app"]
