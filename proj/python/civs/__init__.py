"""Reconstruction of image stacks observed through superimposed 2D convolutions.

Thin wrapper over the compiled extension; everything it exports operates on
numpy arrays shaped (depth, rows, cols), with plain 2D arrays accepted as
single-slice stacks.
"""

from ._core import (
    apply_adjoint,
    apply_forward,
    fft2,
    ifft2,
    make_phantom,
    psnr,
    read_container,
    reconstruct,
    sam,
    set_num_threads,
    simulate,
    ssim,
    write_container,
    CivsError,
)

__all__ = [
    "apply_adjoint",
    "apply_forward",
    "fft2",
    "ifft2",
    "make_phantom",
    "psnr",
    "read_container",
    "reconstruct",
    "sam",
    "set_num_threads",
    "simulate",
    "ssim",
    "write_container",
    "CivsError",
]

__version__ = "0.1.0"
