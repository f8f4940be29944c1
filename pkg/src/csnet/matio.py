"""Shared matrix text format: first line "rows cols", then row-major decimals."""

import numpy as np


def save_matrix(path, mat, fmt="%.17g"):
    """Write a 2-D array in the shared text format (one row per line)."""
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    with open(path, "w") as fh:
        fh.write("%d %d\n" % mat.shape)
        for row in mat:
            fh.write(" ".join(fmt % v for v in row) + "\n")


def load_matrix(path):
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError("matrix file %r: first line must be 'rows cols'" % path)
        rows, cols = int(header[0]), int(header[1])
        data = np.loadtxt(fh, ndmin=2)
    if data.shape != (rows, cols):
        raise ValueError(
            "matrix file %r: header says %dx%d, body is %dx%d"
            % (path, rows, cols, data.shape[0], data.shape[1])
        )
    return data


def save_mask(path, mask):
    """Masks use the same format with entries in {0,1}."""
    mask = np.asarray(mask)
    if not np.isin(mask, (0, 1)).all():
        raise ValueError("mask entries must be 0 or 1")
    save_matrix(path, mask, fmt="%d")


def load_mask(path):
    mask = load_matrix(path)
    if not np.isin(mask, (0, 1)).all():
        raise ValueError("mask file %r has entries outside {0,1}" % path)
    return mask
