"""homlab: a desk-scale numerical laboratory for elliptic periodic
homogenization.

Subpackages solve the periodic corrector problem and compute effective
tensors (``cell``), run oscillating- and constant-coefficient Dirichlet
solves on squares and embedded discs (``elliptic``), recover the homogenized
solution and measure two-scale convergence rates (``twoscale``), assemble
weighted inequalities with Gaussian-exponential weights (``carleman``), and
evaluate three-ball/doubling/growth diagnostics (``continuation``).  The
``homlab`` CLI orchestrates reproducible experiment pipelines.
"""

__version__ = "0.1.0"

from ._kernels import BACKEND as KERNEL_BACKEND

__all__ = ["KERNEL_BACKEND", "__version__"]
