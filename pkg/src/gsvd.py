"""
gsvd.py

Generalized singular value decomposition of the user-channel pair

    H_1 = U_1 Σ_1 V,   H_2 = U_2 Σ_2 V

computed from a QR factorization of the stacked matrix [H_1; H_2] followed by a
cosine-sine decomposition of its orthonormal factor. Also provides the
Δ-augmentation of H_2, the brute-force B-matrix oracle and the exact power
normalization factor t = Tr((H_1^H H_1 + H_2^H H_2)^{-1}).
"""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from errors import ContractViolation, DecompositionError, OracleError

logger = logging.getLogger(__name__)

RANK_TOL = 1e-12
ZERO_TOL = 1e-12
CONDITION_WARNING = 1e8


@dataclass(frozen=True, eq=False)
class GsvdFactors:
    """Factors of the GSVD with Σ blocks laid out per antenna regime.

    Column order of Σ_i: [user-2 private | coupled (μ descending) | user-1 private],
    except for T >= R1+R2 where it is [user-1 private | user-2 private].
    Row order of Σ_1: [coupled | private | zero]; of Σ_2: [private | coupled | zero].
    """

    U1: np.ndarray
    U2: np.ndarray
    V: np.ndarray
    Sigma1: np.ndarray
    Sigma2: np.ndarray
    mu: np.ndarray
    regime: str
    condition: float

    @property
    def S(self):
        return int(self.mu.size)

    @property
    def private_streams(self):
        """Number of interference-free subchannels of (user 1, user 2)."""
        col1 = np.linalg.norm(self.Sigma1, axis=0) > ZERO_TOL
        col2 = np.linalg.norm(self.Sigma2, axis=0) > ZERO_TOL
        return int(np.sum(col1 & ~col2)), int(np.sum(col2 & ~col1))

    @property
    def coupled_gains(self):
        """Squared coupled GSVs (σ_1^2, σ_2^2) in μ order."""
        cols = self._coupled_columns()
        return (
            np.linalg.norm(self.Sigma1[:, cols], axis=0) ** 2,
            np.linalg.norm(self.Sigma2[:, cols], axis=0) ** 2,
        )

    def _coupled_columns(self):
        col1 = np.linalg.norm(self.Sigma1, axis=0) > ZERO_TOL
        col2 = np.linalg.norm(self.Sigma2, axis=0) > ZERO_TOL
        return np.flatnonzero(col1 & col2)

    def reconstruction_residual(self, H1, H2):
        """Largest relative Frobenius residual of H_i - U_i Σ_i V."""
        res = []
        for U, Sigma, H in ((self.U1, self.Sigma1, H1), (self.U2, self.Sigma2, H2)):
            res.append(np.linalg.norm(H - U @ Sigma @ self.V) / max(np.linalg.norm(H), 1e-300))
        return float(max(res))

    def power_factor(self):
        """Tr(W W^H) with W = V^{-1}."""
        W = np.linalg.inv(self.V)
        return float(np.real(np.trace(W @ W.conj().T)))


def antenna_regime(T, R1, R2):
    if T <= min(R1, R2):
        return "coupled"
    if T < R1 + R2:
        return "partial"
    return "private"


def gsvd(H1, H2):
    """GSVD of the pair (H1, H2) with regime-structured Σ blocks and μ sorted descending.

    Raises
    ------
    DecompositionError
        If the stacked matrix [H1; H2] is rank deficient (this includes T > R1+R2).
    """
    H1 = np.asarray(H1, dtype=complex)
    H2 = np.asarray(H2, dtype=complex)
    (R1, T), (R2, T2) = H1.shape, H2.shape
    if T != T2:
        raise DecompositionError(f"H1 has {T} columns but H2 has {T2}")
    if T > R1 + R2:
        raise DecompositionError(f"stacked channel is {R1 + R2}x{T}: column rank at most {R1 + R2} < T")

    Q, Rq = scipy.linalg.qr(np.vstack([H1, H2]), mode="full")
    Rq = Rq[:T, :]
    diag = np.abs(np.diag(Rq))
    if diag.min() <= RANK_TOL * max(diag.max(), 1e-300):
        raise DecompositionError(
            f"stacked channel is rank deficient: smallest/largest R pivot {diag.min() / diag.max():.3e}"
        )

    if T == R1 + R2:
        # square stacked channel: Σ_1 = [I 0], Σ_2 = [0 I] with V the stacked channel itself
        U1, U2 = np.eye(R1, dtype=complex), np.eye(R2, dtype=complex)
        raw1, raw2 = np.eye(R1 + R2)[:R1], np.eye(R1 + R2)[R1:]
        V = Q @ Rq
    else:
        U_full, CS, VH_full = scipy.linalg.cossin(Q, p=R1, q=T)
        U1, U2 = U_full[:R1, :R1], U_full[R1:, R1:]
        raw1, raw2 = CS[:R1, :T].real, CS[R1:, :T].real
        V = VH_full[:T, :T] @ Rq

    return _arrange(U1, U2, V, raw1, raw2, antenna_regime(T, R1, R2))


def _arrange(U1, U2, V, raw1, raw2, regime):
    """Permute the cosine-sine blocks into the regime layout."""
    T = V.shape[0]
    c = np.array([raw1[:, j].max(initial=0.0) for j in range(T)])
    s = np.array([raw2[:, j].max(initial=0.0) for j in range(T)])
    row1 = np.array([int(np.argmax(raw1[:, j])) if raw1.shape[0] else -1 for j in range(T)])
    row2 = np.array([int(np.argmax(raw2[:, j])) if raw2.shape[0] else -1 for j in range(T)])

    coupled = np.flatnonzero((c > ZERO_TOL) & (s > ZERO_TOL))
    private1 = np.flatnonzero((c > ZERO_TOL) & (s <= ZERO_TOL))
    private2 = np.flatnonzero((c <= ZERO_TOL) & (s > ZERO_TOL))
    mu_all = c[coupled] ** 2 / s[coupled] ** 2
    order = np.argsort(-mu_all, kind="stable")
    coupled, mu = coupled[order], mu_all[order]

    if regime == "private":
        cols = np.concatenate([private1, private2])
    else:
        cols = np.concatenate([private2, coupled, private1])

    rows1 = _complete(np.concatenate([row1[coupled], row1[private1]]), raw1.shape[0])
    rows2 = _complete(np.concatenate([row2[private2], row2[coupled]]), raw2.shape[0])

    Sigma1 = raw1[rows1][:, cols]
    Sigma2 = raw2[rows2][:, cols]
    factors = GsvdFactors(
        U1=U1[:, rows1],
        U2=U2[:, rows2],
        V=V[cols, :],
        Sigma1=Sigma1.astype(complex),
        Sigma2=Sigma2.astype(complex),
        mu=mu,
        regime=regime,
        condition=float(np.linalg.cond(V)),
    )
    if factors.condition > CONDITION_WARNING:
        logger.warning("ill-conditioned GSVD factor cond(V)=%.3e", factors.condition)
    return factors


def _complete(rows, n):
    """Extend a list of distinct row indices to a permutation of range(n)."""
    rows = [int(r) for r in rows]
    rest = [r for r in range(n) if r not in set(rows)]
    return np.array(rows + rest, dtype=int)


def augment_h2(H2, delta, T=None, R1=None):
    """Return [H2; Δ·[I_{T-R2} 0]] for the regime R2 < T < R1+R2."""
    H2 = np.asarray(H2, dtype=complex)
    R2, T_cols = H2.shape
    T = T_cols if T is None else T
    if not R2 < T or (R1 is not None and not T < R1 + R2):
        raise ContractViolation(f"augmentation needs R2 < T < R1+R2, got R2={R2}, T={T}, R1={R1}")
    extra = np.zeros((T - R2, T_cols), dtype=complex)
    extra[:, : T - R2] = delta * np.eye(T - R2)
    return np.vstack([H2, extra])


def b_matrix(H1, H2, regime="coupled", delta=1e-4):
    """B = H1 (H2^H H2)^{-1} H1^H, with H2 augmented in the 'partial' regime."""
    H1 = np.asarray(H1, dtype=complex)
    H2 = np.asarray(H2, dtype=complex)
    if regime == "partial":
        H2 = augment_h2(H2, delta, R1=H1.shape[0])
    gram = H2.conj().T @ H2
    try:
        factor = scipy.linalg.cho_factor(gram, check_finite=True)
    except np.linalg.LinAlgError as exc:
        raise OracleError(f"H2^H H2 is singular: {exc}") from exc
    B = H1 @ scipy.linalg.cho_solve(factor, H1.conj().T)
    return 0.5 * (B + B.conj().T)


def power_factor_exact(H1, H2):
    """t = Tr((H1^H H1 + H2^H H2)^{-1})."""
    H1 = np.asarray(H1, dtype=complex)
    H2 = np.asarray(H2, dtype=complex)
    gram = H1.conj().T @ H1 + H2.conj().T @ H2
    try:
        factor = scipy.linalg.cho_factor(gram, check_finite=True)
    except np.linalg.LinAlgError as exc:
        raise OracleError(f"H1^H H1 + H2^H H2 is singular: {exc}") from exc
    inverse = scipy.linalg.cho_solve(factor, np.eye(gram.shape[0]))
    return float(np.real(np.trace(inverse)))
