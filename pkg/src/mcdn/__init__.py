"""Angle-closure screening pipeline on synthetic anterior-segment phantoms.

Two parallel conv-net streams (whole image + chamber-angle patch) fused with
a clinical-parameter linear SVM, trained and evaluated on phantoms with
analytically known geometry.
"""

import os

# Cap BLAS/OpenMP pools before numpy loads anywhere in this package.
# MCDN_THREADS defaults to 1 so training runs are bit-reproducible.
_threads = os.environ.get("MCDN_THREADS", "1")
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, _threads)
del _threads, _var

__version__ = "0.1.0"
