import numpy as np

from koopman.basis.monomials import MonomialBasis
from koopman.edmd.EDMD import KoopmanMethod, KoopmanMatrix, SnapshotSet, _check_basis, _koopman
from koopman.kernel.gram import DEFAULT_POLICY, InversionPolicy, apply_gram_inverse, gram_matrix
from koopman.kernel.kernels import KernelSpec, cross_gram_matrix


def fit_edmd(data: SnapshotSet, basis: MonomialBasis) -> KoopmanMatrix:
    """Standard EDMD with monomials: K = X⁺Y minimizes ‖XK - Y‖_F (L² Galerkin projection)."""
    _check_basis(data, basis)
    xs, ys = data.translated()
    X, Y = basis.evaluate(xs), basis.evaluate(ys)
    K, *_ = np.linalg.lstsq(X, Y, rcond=None)
    return _koopman(K, basis, KoopmanMethod.EDMD, data)


def fit_kernel_edmd(data: SnapshotSet, kernel: KernelSpec, policy: InversionPolicy = DEFAULT_POLICY) -> np.ndarray:
    """Kernel EDMD representation G⁻¹A (M x M) on the translated data."""
    xs, ys = data.translated()
    centred = kernel.recentered()
    G = gram_matrix(centred, xs)
    A = cross_gram_matrix(centred, xs, ys)
    return apply_gram_inverse(G, A.values, policy)


def fit_dmd(data: SnapshotSet) -> np.ndarray:
    """DMD on raw (translated) states: A minimizing ‖A·X - Y‖ with states as columns."""
    xs, ys = data.translated()
    # A Xᵀ = Yᵀ  <=>  X Aᵀ = Y
    At, *_ = np.linalg.lstsq(xs, ys, rcond=None)
    return At.T
