"""Matrix Market I/O.

Reading is delegated to :func:`scipy.io.mmread`. Writing is done here so that
output is byte-stable (dense ``array`` format, 17 significant digits).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse

from .linalg import as_matrix


def format_float(x: float) -> str:
    return format(float(x), ".17g")


def write_matrix(path, M, comments=()) -> None:
    A = np.asarray(M, dtype=float)
    if A.ndim != 2:
        A = as_matrix(A)
    lines = ["%%MatrixMarket matrix array real general"]
    lines += [f"% {c}" for c in comments]
    lines.append(f"{A.shape[0]} {A.shape[1]}")
    # array format is column-major
    lines += [format_float(v) for v in A.T.ravel()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_matrix(path) -> np.ndarray:
    A = scipy.io.mmread(str(path))
    if scipy.sparse.issparse(A):
        A = A.toarray()
    return as_matrix(np.asarray(A, dtype=float), str(path))


def read_comments(path) -> list[str]:
    out = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("%%"):
                continue
            if not line.startswith("%"):
                break
            out.append(line[1:].strip())
    return out
