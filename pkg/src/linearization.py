"""
linearization.py

Block linearizations of the channel functionals and the operator-valued
subordination solver

    G = E_D[(Λ(z) − Lbar − R(G))^{-1}],   R(K) = E[L~ K L~],

where Lbar holds the LoS parts, L~ the zero-mean fluctuations and E_D keeps
the block-diagonal algebra described by a `BlockLayout`. Two layouts are
provided:

* `cauchy_linearization`: the (out, out) block of the resolvent is
  (z − B)^{-1} with B = H_a (H_b^H H_b)^{-1} H_a^H;
* `power_linearization`: the (tx, tx) block is (z − H_1^H H_1 − H_2^H H_2)^{-1}.

The converged solution also yields the potential

    φ(z) = log det(Λ(z) − Lbar − R(G)) + ½ Tr(G R(G)),

whose z-derivative is Tr G_out, and its Wirtinger gradient in the STAR-RIS
coefficients.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from errors import BranchError, ConvergenceError, SingularityError
from misc_tools import lu_inverse
from settings import config

logger = logging.getLogger(__name__)

BRANCH_TOL = 1e-6


@dataclass(frozen=True)
class SolverOptions:
    """Numerical options of the fixed-point solver and the asymptotic pipelines."""

    tol: float = field(default_factory=lambda: config("SOLVER_TOL"))
    max_iters: int = field(default_factory=lambda: config("SOLVER_MAX_ITERS"))
    damping: float = field(default_factory=lambda: config("SOLVER_DAMPING"))
    min_damping: float = 1e-4
    init: str = "deterministic"
    aux_eps: float = 0.0
    spectral_eps: float = field(default_factory=lambda: config("SPECTRAL_EPS"))
    delta: float = field(default_factory=lambda: config("AUGMENT_DELTA"))
    power_eps: float = 1e-4
    quad_epsrel: float = field(default_factory=lambda: config("QUAD_EPSREL"))
    quad_limit: int = 200
    warm_start: bool = True


# -------------------------
# Block bookkeeping
# -------------------------
class BlockLayout:
    """Index tables of the diagonal groups and coupled off-diagonal groups of E_D.

    A group either is a full block (``parts=None``) or is block diagonal over
    ``parts``. A coupling (a, b) keeps the cross blocks between matching parts of
    a and b in both orders.
    """

    def __init__(self, groups, couplings=()):
        self.names = [name for name, _, _ in groups]
        self.sizes = {name: int(size) for name, size, _ in groups}
        self.parts = {name: (tuple(int(p) for p in parts) if parts is not None else None) for name, _, parts in groups}
        self.couplings = tuple(tuple(pair) for pair in couplings)
        self.offsets = {}
        start = 0
        for name in self.names:
            if self.parts[name] is not None and sum(self.parts[name]) != self.sizes[name]:
                raise ValueError(f"parts of {name} do not add up to its size")
            self.offsets[name] = start
            start += self.sizes[name]
        self.n = start
        self.labels = [name for name in self.names for _ in range(self.sizes[name])]
        self.mask = self._build_mask()

    def slice(self, name):
        start = self.offsets[name]
        return slice(start, start + self.sizes[name])

    def part_slices(self, name):
        """Absolute slices of the parts of a group (a single slice for full blocks)."""
        start = self.offsets[name]
        parts = self.parts[name] or (self.sizes[name],)
        slices = []
        for size in parts:
            slices.append(slice(start, start + size))
            start += size
        return slices

    def index_table(self):
        """{group: (start, stop)} for every group."""
        return {name: (self.offsets[name], self.offsets[name] + self.sizes[name]) for name in self.names}

    def _build_mask(self):
        mask = np.zeros((self.n, self.n), dtype=bool)
        for name in self.names:
            for sl in self.part_slices(name):
                mask[sl, sl] = True
        for a, b in self.couplings:
            for sa, sb in zip(self.part_slices(a), self.part_slices(b)):
                mask[sa, sb] = True
                mask[sb, sa] = True
        return mask

    def project(self, X):
        return np.where(self.mask, X, 0.0)

    def is_coupled(self, a, b):
        return a == b or (a, b) in self.couplings or (b, a) in self.couplings

    def blocks(self):
        """(row group, column group) of every stored block."""
        pairs = [(name, name) for name in self.names]
        for a, b in self.couplings:
            pairs += [(a, b), (b, a)]
        return pairs

    def residual(self, new, old):
        """Largest relative Frobenius change over the stored blocks."""
        worst = 0.0
        for a, b in self.blocks():
            sa, sb = self.slice(a), self.slice(b)
            change = np.linalg.norm(new[sa, sb] - old[sa, sb])
            worst = max(worst, change / max(1.0, np.linalg.norm(old[sa, sb])))
        return float(worst)


@dataclass(frozen=True)
class FSlot:
    """F~_user (rows [R_user | L_1..L_K], cols T) placed at (row, col) with a sign."""

    user: int
    row: str
    col: str
    sign: float


@dataclass(frozen=True)
class GSlot:
    """G~_user = [0 | R~_1 Θ_1 | ...] placed at (row, col) with a sign."""

    user: int
    row: str
    col: str
    sign: float


def stacked_los(stats, i):
    """Fbar_i = [Rbar_{0,i}; Fbar_1; ...; Fbar_K]."""
    return np.vstack([stats.link(0, i).los] + [stats.panel(k).los for k in range(1, stats.K + 1)])


def gathered_los(stats, theta, i):
    """Gbar_i = [I | Rbar_{1,i} Θ_{1,i} | ... | Rbar_{K,i} Θ_{K,i}]."""
    R_i = stats.R[i - 1]
    blocks = [np.eye(R_i, dtype=complex)]
    blocks += [stats.link(k, i).los * theta.panel(k, i) for k in range(1, stats.K + 1)]
    return np.hstack(blocks)


class Linearization:
    """A block layout with its deterministic part Lbar and random slots."""

    def __init__(self, layout, Lbar, z_group, stats, theta, f_slots, g_slots, kind, roles):
        self.layout = layout
        self.Lbar = Lbar
        self.z_group = z_group
        self.stats = stats
        self.theta = theta
        self.f_slots = tuple(f_slots)
        self.g_slots = tuple(g_slots)
        self.kind = kind
        self.roles = roles

    @property
    def n(self):
        return self.layout.n

    def spectral_diagonal(self, z, aux_eps=0.0):
        diag = np.full(self.n, 1j * aux_eps, dtype=complex)
        diag[self.layout.slice(self.z_group)] = z
        return diag

    def covariance(self, K):
        """R(K) = E[L~ K L~] for a matrix K supported on the layout."""
        lay, stats = self.layout, self.stats
        out = np.zeros((self.n, self.n), dtype=complex)

        for s in self.f_slots:
            for s2 in self.f_slots:
                if not lay.is_coupled(s.row, s2.row):
                    continue
                sign = s.sign * s2.sign
                rows, rows2 = lay.part_slices(s.row), lay.part_slices(s2.row)
                # rows side: E[F~_s K_tx F~_s2^H]
                K_tx = K[lay.slice(s.col), lay.slice(s2.col)]
                if s.user == s2.user:
                    out[rows[0], rows2[0]] += sign * stats.link(0, s.user).left_expectation(K_tx)
                for k in range(1, stats.K + 1):
                    out[rows[k], rows2[k]] += sign * stats.panel(k).left_expectation(K_tx)
                # column side: E[F~_s^H K_rows F~_s2]
                acc = np.zeros((stats.T, stats.T), dtype=complex)
                if s.user == s2.user:
                    acc += stats.link(0, s.user).right_expectation(K[rows[0], rows2[0]])
                for k in range(1, stats.K + 1):
                    acc += stats.panel(k).right_expectation(K[rows[k], rows2[k]])
                out[lay.slice(s.col), lay.slice(s2.col)] += sign * acc

        for g in self.g_slots:
            sign = g.sign * g.sign
            row = lay.slice(g.row)
            cols = lay.part_slices(g.col)
            K_row = K[row, row]
            for k in range(1, stats.K + 1):
                link = stats.link(k, g.user)
                th = self.theta.panel(k, g.user)
                K_col = K[cols[k], cols[k]]
                out[row, row] += sign * link.left_expectation(th[:, None] * K_col * th.conj()[None, :])
                out[cols[k], cols[k]] += sign * (th.conj()[:, None] * link.right_expectation(K_row) * th[None, :])
        return out


def _place(L, layout, a, b, block):
    L[layout.slice(a), layout.slice(b)] += block


def cauchy_linearization(stats, theta, first=1, couple=True):
    """Linearization of B = H_a (H_b^H H_b)^{-1} H_a^H with a = `first`.

    Groups: out (R_a), f_a (R_a+L), tx (T), g_b (R_b+L), rx_b (R_b),
    f_b (R_b+L), g_a (R_a+L). With ``couple=False`` the (f_a, f_b) cross blocks
    are left out of the algebra.
    """
    a, b = first, 3 - first
    Ra, Rb = stats.R[a - 1], stats.R[b - 1]
    panels = list(stats.panel_sizes)
    L, T = stats.L, stats.T
    layout = BlockLayout(
        [
            ("out", Ra, None),
            ("f_a", Ra + L, [Ra] + panels),
            ("tx", T, None),
            ("g_b", Rb + L, [Rb] + panels),
            ("rx_b", Rb, None),
            ("f_b", Rb + L, [Rb] + panels),
            ("g_a", Ra + L, [Ra] + panels),
        ],
        couplings=[("f_a", "f_b")] if couple else [],
    )
    Fa, Fb = stacked_los(stats, a), stacked_los(stats, b)
    Ga, Gb = gathered_los(stats, theta, a), gathered_los(stats, theta, b)
    Lbar = np.zeros((layout.n, layout.n), dtype=complex)
    _place(Lbar, layout, "out", "g_a", Ga)
    _place(Lbar, layout, "g_a", "out", Ga.conj().T)
    _place(Lbar, layout, "f_a", "tx", Fa)
    _place(Lbar, layout, "tx", "f_a", Fa.conj().T)
    _place(Lbar, layout, "f_a", "g_a", -np.eye(Ra + L))
    _place(Lbar, layout, "g_a", "f_a", -np.eye(Ra + L))
    _place(Lbar, layout, "tx", "f_b", -Fb.conj().T)
    _place(Lbar, layout, "f_b", "tx", -Fb)
    _place(Lbar, layout, "g_b", "rx_b", -Gb.conj().T)
    _place(Lbar, layout, "rx_b", "g_b", -Gb)
    _place(Lbar, layout, "g_b", "f_b", np.eye(Rb + L))
    _place(Lbar, layout, "f_b", "g_b", np.eye(Rb + L))
    _place(Lbar, layout, "rx_b", "rx_b", np.eye(Rb))
    return Linearization(
        layout,
        Lbar,
        "out",
        stats,
        theta,
        f_slots=[FSlot(a, "f_a", "tx", 1.0), FSlot(b, "f_b", "tx", -1.0)],
        g_slots=[GSlot(a, "out", "g_a", 1.0), GSlot(b, "rx_b", "g_b", -1.0)],
        kind="cauchy",
        roles=(a, b),
    )


def power_linearization(stats, theta):
    """Linearization of Q = H_1^H H_1 + H_2^H H_2 in the tx block.

    Groups: tx (T), then per user i: s_i (R_i+L), y_i (R_i+L), w_i (R_i).
    """
    panels = list(stats.panel_sizes)
    L, T = stats.L, stats.T
    groups = [("tx", T, None)]
    for i in (1, 2):
        R_i = stats.R[i - 1]
        groups += [(f"s_{i}", R_i + L, [R_i] + panels), (f"y_{i}", R_i + L, [R_i] + panels), (f"w_{i}", R_i, None)]
    layout = BlockLayout(groups, couplings=[("s_1", "s_2")])
    Lbar = np.zeros((layout.n, layout.n), dtype=complex)
    f_slots, g_slots = [], []
    for i in (1, 2):
        R_i = stats.R[i - 1]
        F, G = stacked_los(stats, i), gathered_los(stats, theta, i)
        _place(Lbar, layout, "tx", f"s_{i}", F.conj().T)
        _place(Lbar, layout, f"s_{i}", "tx", F)
        _place(Lbar, layout, f"s_{i}", f"y_{i}", -np.eye(R_i + L))
        _place(Lbar, layout, f"y_{i}", f"s_{i}", -np.eye(R_i + L))
        _place(Lbar, layout, f"y_{i}", f"w_{i}", G.conj().T)
        _place(Lbar, layout, f"w_{i}", f"y_{i}", G)
        _place(Lbar, layout, f"w_{i}", f"w_{i}", -np.eye(R_i))
        f_slots.append(FSlot(i, f"s_{i}", "tx", 1.0))
        g_slots.append(GSlot(i, f"w_{i}", f"y_{i}", 1.0))
    return Linearization(layout, Lbar, "tx", stats, theta, f_slots, g_slots, kind="power", roles=(1, 2))


# -------------------------
# Solver
# -------------------------
@dataclass(eq=False)
class FixedPoint:
    """Converged E_D-valued resolvent at a spectral point."""

    z: complex
    lin: Linearization
    G: np.ndarray
    X: np.ndarray
    R: np.ndarray
    logdet: complex
    sweeps: int
    residual: float
    history: list

    def block(self, a, b=None):
        lay = self.lin.layout
        return self.G[lay.slice(a), lay.slice(b or a)]

    def r_block(self, a, b=None):
        lay = self.lin.layout
        return self.R[lay.slice(a), lay.slice(b or a)]

    def trace(self, name):
        return complex(np.trace(self.block(name)))

    def residual_frame(self):
        return pd.DataFrame({"sweep": np.arange(1, len(self.history) + 1), "residual": self.history})


def _evaluate(lin, base, G):
    R = lin.covariance(G)
    X, logdet = lu_inverse(base - R, labels=lin.layout.labels)
    return lin.layout.project(X), X, R, logdet


def _initial_guess(lin, base, z, opts):
    if opts.init == "deterministic":
        try:
            X, _ = lu_inverse(base, labels=lin.layout.labels)
            return lin.layout.project(X)
        except SingularityError as exc:
            logger.debug("deterministic initial guess unavailable: %s", exc)
    diag = np.full(lin.n, -1j, dtype=complex)
    diag[lin.layout.slice(lin.z_group)] = 1.0 / z if z != 0 else -1j
    return np.diag(diag)


def solve_fixed_point(lin, z, opts=None, init=None):
    """Damped simultaneous substitution until the largest block change is below `opts.tol`.

    Raises
    ------
    ConvergenceError
        After `opts.max_iters` sweeps, carrying the residual history.
    SingularityError
        When Λ(z) − Lbar − R(G) is singular, naming the block of the smallest pivot.
    """
    opts = opts or SolverOptions()
    base = np.diag(lin.spectral_diagonal(z, opts.aux_eps)) - lin.Lbar
    G = init.copy() if init is not None else _initial_guess(lin, base, z, opts)
    damping = opts.damping
    history = []
    for sweep in range(1, opts.max_iters + 1):
        new, X, R, logdet = _evaluate(lin, base, G)
        residual = lin.layout.residual(new, G)
        history.append(residual)
        logger.debug("fixed point sweep=%d residual=%.3e damping=%.3g", sweep, residual, damping)
        if residual <= opts.tol:
            G = new
            new, X, R, logdet = _evaluate(lin, base, G)
            logger.debug("fixed point converged kind=%s z=%s sweeps=%d", lin.kind, z, sweep)
            return FixedPoint(
                z=z, lin=lin, G=G, X=X, R=R, logdet=logdet, sweeps=sweep,
                residual=lin.layout.residual(new, G), history=history,
            )
        if len(history) > 1 and residual > history[-2]:
            damping = max(0.5 * damping, opts.min_damping)
            if damping < 1e-2:
                logger.warning("fixed point damping reduced to %.2e at sweep %d", damping, sweep)
        G = (1.0 - damping) * G + damping * new
    raise ConvergenceError(
        f"fixed point not reached in {opts.max_iters} sweeps (last residual {history[-1]:.3e})",
        residuals=history,
    )


def fixed_point_defect(fp, opts=None):
    """Change produced by one more evaluation of the right-hand side at the solution."""
    opts = opts or SolverOptions()
    base = np.diag(fp.lin.spectral_diagonal(fp.z, opts.aux_eps)) - fp.lin.Lbar
    new, _, _, _ = _evaluate(fp.lin, base, fp.G)
    return fp.lin.layout.residual(new, fp.G)


# -------------------------
# Potential and gradient
# -------------------------
def potential(fp):
    """Real potential log det(Λ − Lbar − R(G)) + ½ Tr(G R(G)) at a real spectral point.

    Raises
    ------
    BranchError
        If the imaginary parts do not cancel, i.e. the determinant is not real
        or the trace term is not real at this point.
    """
    phase = np.angle(np.exp(1j * np.imag(fp.logdet)))
    trace_term = 0.5 * np.sum(fp.G * fp.R.T)
    scale = max(1.0, abs(np.real(fp.logdet)), abs(np.real(trace_term)))
    if min(abs(phase), abs(abs(phase) - np.pi)) > BRANCH_TOL or abs(np.imag(trace_term)) > BRANCH_TOL * scale:
        raise BranchError(
            f"potential at z={fp.z} has non-cancelling imaginary parts "
            f"(log-det phase {phase:.3e}, trace {np.imag(trace_term):.3e})"
        )
    return float(np.real(fp.logdet) + np.real(trace_term))


def potential_gradient(fp):
    """Wirtinger derivatives ∂φ/∂θ_i^* for i = 1, 2, each of length L."""
    lin, lay, stats = fp.lin, fp.lin.layout, fp.lin.stats
    grads = {1: np.zeros(stats.L, dtype=complex), 2: np.zeros(stats.L, dtype=complex)}
    for g in lin.g_slots:
        row = lay.slice(g.row)
        cols = lay.part_slices(g.col)
        G_row = fp.G[row, row]
        offset = 0
        for k in range(1, stats.K + 1):
            link = stats.link(k, g.user)
            th = lin.theta.panel(k, g.user)
            # resolvent entries between the row group and panel k of the column group
            X_cross = fp.X[row, cols[k]]
            los_term = -g.sign * np.sum(X_cross * link.los.conj(), axis=0)
            Q = link.right_expectation(G_row)
            P = fp.G[cols[k], cols[k]]
            cov_term = -(g.sign**2) * np.einsum("ml,l,lm->m", Q, th, P)
            grads[g.user][offset : offset + th.size] += los_term + cov_term
            offset += th.size
    return grads
