"""2-D transforms and circular correlation for multi-channel planes.

A "plane" is a 2-D float64 array, a "feature map" a (d, H, W) stack of
planes sharing one geometry.  Transforms use the unnormalized forward /
1/m-normalized inverse convention (numpy's default), where m = H * W.
Arbitrary plane sizes are supported; numpy's pocketfft handles mixed-radix
and prime lengths.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatchError, NumericalConsistencyError

#: Largest tolerated imaginary residue when inverting a spectrum that is
#: expected to be conjugate symmetric.
IMAG_RESIDUE_TOL = 1e-8


def _check_plane(p, name="plane"):
    p = np.asarray(p)
    if p.ndim != 2 or p.shape[0] < 1 or p.shape[1] < 1:
        raise DimensionMismatchError(f"{name} must be a nonempty 2-D array, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise NumericalConsistencyError(f"{name} contains non-finite values")
    return p


def dft2(p):
    """Forward 2-D DFT of a real plane (unnormalized)."""
    p = _check_plane(p).astype(np.float64, copy=False)
    return np.fft.fft2(p)


def idft2(q):
    """Inverse 2-D DFT with 1/m normalization, returning the real part.

    The input must be conjugate symmetric up to rounding; the imaginary
    residue is checked against IMAG_RESIDUE_TOL before being discarded.
    """
    q = _check_plane(q, "spectrum")
    out = np.fft.ifft2(q)
    residue = float(np.abs(out.imag).max()) if out.size else 0.0
    if residue >= IMAG_RESIDUE_TOL:
        raise NumericalConsistencyError(
            f"imaginary residue {residue:.3e} exceeds {IMAG_RESIDUE_TOL:.0e}; "
            "input spectrum is not conjugate symmetric"
        )
    return out.real


def circ_correlate(a, b):
    """Circular cross-correlation of two equally sized real planes.

    Returns the plane whose (u, v) entry is sum over (p, q) of
    a[(p+u) % H, (q+v) % W] * b[p, q].  In the frequency domain this is
    the product of a's spectrum with the conjugated spectrum of b.
    """
    a = _check_plane(a, "a")
    b = _check_plane(b, "b")
    if a.shape != b.shape:
        raise DimensionMismatchError(f"shape mismatch: {a.shape} vs {b.shape}")
    return idft2(np.fft.fft2(a) * np.conj(np.fft.fft2(b)))


def fft_channels(fmap):
    """Forward DFT of every channel of a (d, H, W) stack."""
    fmap = np.asarray(fmap, dtype=np.float64)
    if fmap.ndim != 3:
        raise DimensionMismatchError(f"expected (d, H, W) array, got shape {fmap.shape}")
    return np.fft.fft2(fmap, axes=(-2, -1))


def hermitian_symmetrize(spectra):
    """Project spectra onto the conjugate-symmetric subspace.

    Spectra of real signals satisfy S(k) = conj(S(-k)); bins solved
    independently drift apart by rounding, and averaging each bin with the
    conjugate of its mirror restores the symmetry exactly.  Works on the
    last two axes of any stack.
    """
    spectra = np.asarray(spectra, dtype=np.complex128)
    mirrored = np.roll(np.flip(spectra, axis=(-2, -1)), shift=(1, 1), axis=(-2, -1))
    return 0.5 * (spectra + np.conj(mirrored))
