"""Tied 3x3 kernel parameterizations.

A symmetry level partitions the nine kernel positions into tie classes.
Every position of a class holds the same free parameter, so the kernel
is fixed by one value per class:

    level 0      level 1      level 2      level 3      level 4
    a b c        a b a        a b a        a b a        a a a
    d e f        d e d        d e d        b e b        a e a
    g h i        g h g        a b a        a b a        a a a

Free parameters are ordered by letter.  `expand_kernel` maps them to the
full grid and `fold_gradient` is its transpose, summing a full-kernel
gradient over each class.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, NamedTuple

import numpy as np

LEVELS = (0, 1, 2, 3, 4)

Position = tuple[int, int]

_CORNERS = ((0, 0), (0, 2), (2, 0), (2, 2))
_EDGES = ((0, 1), (1, 0), (1, 2), (2, 1))

TIE_CLASSES: dict[int, tuple[tuple[Position, ...], ...]] = {
    0: tuple(((r, c),) for r in range(3) for c in range(3)),
    1: (
        ((0, 0), (0, 2)),
        ((0, 1),),
        ((1, 0), (1, 2)),
        ((1, 1),),
        ((2, 0), (2, 2)),
        ((2, 1),),
    ),
    2: (_CORNERS, ((0, 1), (2, 1)), ((1, 0), (1, 2)), ((1, 1),)),
    3: (_CORNERS, _EDGES, ((1, 1),)),
    4: (tuple(sorted(_CORNERS + _EDGES)), ((1, 1),)),
}

PARAM_NAMES: dict[int, tuple[str, ...]] = {
    0: tuple("abcdefghi"),
    1: tuple("abdegh"),
    2: tuple("abde"),
    3: tuple("abe"),
    4: tuple("ae"),
}


def _check_level(level) -> int:
    if isinstance(level, SymmetryLevel):
        return level.level
    try:
        lv = int(level)
    except (TypeError, ValueError):
        lv = None
    if lv not in LEVELS or lv != level:
        raise ValueError(f"symmetry level must be one of {LEVELS}, got {level!r}")
    return lv


@dataclass(frozen=True)
class SymmetryLevel:
    level: int

    def __post_init__(self):
        _check_level(self.level)

    def __int__(self):
        return self.level

    def __index__(self):
        return self.level

    @property
    def free_param_count(self) -> int:
        return free_param_count(self.level)

    @property
    def tie_classes(self):
        return TIE_CLASSES[self.level]


def free_param_count(level) -> int:
    return len(TIE_CLASSES[_check_level(level)])


@lru_cache(maxsize=None)
def expansion_matrix(level: int) -> np.ndarray:
    """(9, k) 0/1 matrix E with ``vec(kernel) = E @ params``."""
    classes = TIE_CLASSES[_check_level(level)]
    mat = np.zeros((9, len(classes)))
    for k, cls in enumerate(classes):
        for r, c in cls:
            mat[3 * r + c, k] = 1.0
    mat.flags.writeable = False
    return mat


def expand_kernel(params, level) -> np.ndarray:
    params = np.asarray(params, dtype=np.float64)
    classes = TIE_CLASSES[_check_level(level)]
    if params.shape != (len(classes),):
        raise ValueError(
            f"level {int(level)} takes {len(classes)} free parameters, got shape {params.shape}"
        )
    kernel = np.empty((3, 3))
    for value, cls in zip(params, classes):
        for r, c in cls:
            kernel[r, c] = value
    return kernel


def fold_gradient(full_grad, level) -> np.ndarray:
    full_grad = np.asarray(full_grad, dtype=np.float64)
    if full_grad.shape != (3, 3):
        raise ValueError(f"expected a 3x3 gradient, got shape {full_grad.shape}")
    out = []
    for cls in TIE_CLASSES[_check_level(level)]:
        total = 0.0
        for r, c in cls:
            total += full_grad[r, c]
        out.append(total)
    return np.array(out)


def expand_kernels(values, level) -> np.ndarray:
    """Batched expand: (..., k) free params to (..., 3, 3) kernels."""
    values = np.asarray(values, dtype=np.float64)
    mat = expansion_matrix(level)
    if values.shape[-1] != mat.shape[1]:
        raise ValueError(f"last axis must be {mat.shape[1]}, got {values.shape[-1]}")
    return (values @ mat.T).reshape(values.shape[:-1] + (3, 3))


def fold_gradients(full_grads, level) -> np.ndarray:
    """Batched fold: (..., 3, 3) gradients to (..., k)."""
    full_grads = np.asarray(full_grads, dtype=np.float64)
    if full_grads.shape[-2:] != (3, 3):
        raise ValueError(f"trailing axes must be 3x3, got {full_grads.shape}")
    return full_grads.reshape(full_grads.shape[:-2] + (9,)) @ expansion_matrix(level)


def is_symmetric(kernel, level) -> bool:
    kernel = np.asarray(kernel)
    if kernel.shape != (3, 3):
        raise ValueError(f"expected a 3x3 kernel, got shape {kernel.shape}")
    for cls in TIE_CLASSES[_check_level(level)]:
        first = kernel[cls[0]]
        if any(kernel[p] != first for p in cls[1:]):
            return False
    return True


# Grid transforms act on the last two axes (height, width).

def hflip(x) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(x)[..., ::-1])


def vflip(x) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(x)[..., ::-1, :])


def rot90(x, k: int = 1) -> np.ndarray:
    """Counterclockwise rotation by ``k`` quarter turns."""
    x = np.asarray(x)
    if x.shape[-1] != x.shape[-2]:
        raise ValueError(f"rot90 needs a square grid, got {x.shape[-2]}x{x.shape[-1]}")
    return np.ascontiguousarray(np.rot90(x, k, axes=(-2, -1)))


class GridTransform(NamedTuple):
    name: str
    apply: Callable[[np.ndarray], np.ndarray]

    def __call__(self, x):
        return self.apply(x)


IDENTITY = GridTransform("identity", lambda x: np.array(x, copy=True))
HFLIP = GridTransform("hflip", hflip)
VFLIP = GridTransform("vflip", vflip)
HVFLIP = GridTransform("hflip∘vflip", lambda x: hflip(vflip(x)))
ROT90 = GridTransform("rot90", rot90)
ROT270 = GridTransform("rot270", lambda x: rot90(x, 3))
TRANSPOSE = GridTransform("transpose", lambda x: np.ascontiguousarray(np.swapaxes(x, -1, -2)))
ANTITRANSPOSE = GridTransform("antitranspose", lambda x: hflip(rot90(x)))

_DIHEDRAL = (IDENTITY, HFLIP, VFLIP, HVFLIP, ROT90, ROT270, TRANSPOSE, ANTITRANSPOSE)

_GROUPS = {
    0: (IDENTITY,),
    1: (IDENTITY, HFLIP),
    2: (IDENTITY, HFLIP, VFLIP, HVFLIP),
    3: _DIHEDRAL,
    4: _DIHEDRAL,
}


def symmetry_group(level) -> list[GridTransform]:
    """Grid transforms that fix every kernel of the given level."""
    return list(_GROUPS[_check_level(level)])
