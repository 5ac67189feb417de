# backend/mle_engine.py
"""
Maximum-likelihood chi-matrix reconstruction by the root approach

chi = e e^dag is parameterized by its (s^2 x r) square root e, which keeps
the estimate positive with rank <= r. The likelihood equation I e = J(e) e
is solved by damped fixed-point iteration, with I = sum t Lambda and
J(e) = sum (k / p) Lambda over the real and fictitious rows.
"""
import logging
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import linalg

from .channels import ComplexMatrix, ProcessChi, process_fidelity
from .errors import ConfigError, ConvergenceError, DimensionError, SingularProtocolError
from .measurement_record import MeasurementRecord
from .protocol_builder import TomographyProtocol, normalization_complement, normalization_projectors

logger = logging.getLogger(__name__)

PROB_FLOOR = 1e-12
INIT_SCHEMES = ("perturbed_identity", "random")


@dataclass(frozen=True)
class SolverOptions:
    max_iterations: int = 20000
    convergence_tol: float = 1e-8
    mixing: float = 1.0
    init: str = "perturbed_identity"
    t_phi_factor: float = 100.0
    seed: Optional[int] = 0
    raise_on_nonconvergence: bool = True
    warm_iterations: int = 1000

    def validate(self, path: str = "solver") -> List[str]:
        issues = []
        if self.max_iterations < 1:
            issues.append(f"{path}.max_iterations: must be >= 1")
        if self.warm_iterations < 1:
            issues.append(f"{path}.warm_iterations: must be >= 1")
        if not self.convergence_tol > 0:
            issues.append(f"{path}.convergence_tol: must be positive")
        if not 0.0 < self.mixing <= 1.0:
            issues.append(f"{path}.mixing: must lie in (0, 1]")
        if self.init not in INIT_SCHEMES:
            issues.append(f"{path}.init: must be one of {', '.join(INIT_SCHEMES)}")
        if not self.t_phi_factor > 0:
            issues.append(f"{path}.t_phi_factor: must be positive")
        return issues

    @classmethod
    def from_dict(cls, data: Optional[Dict], path: str = "solver") -> "SolverOptions":
        data = dict(data or {})
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"{path}: unknown fields {sorted(unknown)}")
        # PyYAML reads exponent literals such as 1e-8 as strings
        try:
            for name in ("convergence_tol", "mixing", "t_phi_factor"):
                if name in data:
                    data[name] = float(data[name])
            for name in ("max_iterations", "warm_iterations"):
                if name in data:
                    data[name] = int(data[name])
        except (TypeError, ValueError) as e:
            raise ConfigError(f"{path}: {e}")
        opts = cls(**data)
        issues = opts.validate(path)
        if issues:
            raise ConfigError(issues)
        return opts

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class RootFactor:
    """Square root e of the estimate plus the solver's bookkeeping"""

    e: ComplexMatrix
    iterations: int
    residual: float
    converged: bool
    log_likelihood: float

    @property
    def rank(self) -> int:
        return self.e.shape[1]

    @property
    def chi(self) -> ProcessChi:
        """e e^dag rescaled to trace s"""
        mat = self.e @ self.e.conj().T
        dim = int(round(np.sqrt(mat.shape[0])))
        return ProcessChi(mat * dim / np.trace(mat).real)


class LikelihoodModel:
    """Poisson likelihood of a record under a protocol, evaluated through chi"""

    def __init__(self, rec: MeasurementRecord, proto: TomographyProtocol):
        self.dim = proto.dim
        self.t, self.k = rec.count_grid(proto.m_p, proto.m_m)
        self.rho_conj = proto.prep_array().conj()
        self.effects = proto.effect_array()

        phi_idx, self.t_phi, self.k_phi = rec.fictitious_arrays()
        projectors = normalization_projectors(proto.n_qubits)
        if len(phi_idx) and (phi_idx.min() < 0 or phi_idx.max() >= len(projectors)):
            raise DimensionError("Fictitious rows index outside the normalization projector set")
        self.phi = projectors[phi_idx] if len(phi_idx) else np.zeros((0, self.dim, self.dim), dtype=complex)

        self.i_matrix = self._weighted_operator(self.t, self.t_phi)
        self.real_i_matrix = self._weighted_operator(self.t, np.zeros_like(self.t_phi))

    def _weighted_operator(self, w: np.ndarray, w_phi: np.ndarray) -> ComplexMatrix:
        """sum w_ij (rho_i* x Lambda_j) + sum w_phi (Pi_phi x I_s)"""
        s = self.dim
        real = np.einsum("ij,iux,jvy->uvxy", w, self.rho_conj, self.effects).reshape(s * s, s * s)
        fict = np.kron(np.einsum("f,fux->ux", w_phi, self.phi), np.eye(s))
        return real + fict

    def probabilities(self, chi: ComplexMatrix) -> Tuple[np.ndarray, np.ndarray]:
        """Real-row grid and fictitious-row probabilities (normalized to s) for a raw chi"""
        s = self.dim
        chi4 = chi.reshape(s, s, s, s)
        grid = np.einsum("xyuv,iux,jvy->ij", chi4, self.rho_conj, self.effects).real
        reduced = np.einsum("ikjk->ij", chi4)
        p_phi = np.einsum("ij,fji->f", reduced, self.phi).real
        return grid, p_phi

    def log_likelihood(self, chi: ComplexMatrix, floor: Optional[float] = None) -> float:
        grid, p_phi = self.probabilities(chi)
        total = 0.0
        for t, k, p in ((self.t, self.k, grid), (self.t_phi, self.k_phi, p_phi)):
            if floor is not None:
                p = np.maximum(p, floor)
            elif np.any((p <= 0) & (k > 0)):
                return float("-inf")
            observed = k > 0
            total += float(np.sum(k[observed] * np.log(t[observed] * p[observed])) - np.sum(t * p))
        return total

    def j_matrix(self, chi: ComplexMatrix) -> ComplexMatrix:
        grid, p_phi = self.probabilities(chi)
        return self._weighted_operator(self.k / np.maximum(grid, PROB_FLOOR),
                                       self.k_phi / np.maximum(p_phi, PROB_FLOOR))

    @property
    def total_counts(self) -> float:
        return float(self.k.sum() + self.k_phi.sum())

    def expected_total(self, chi: ComplexMatrix) -> float:
        """sum t p, which equals sum k at any solution of the likelihood equation"""
        return float(np.trace(chi @ self.i_matrix).real)


def log_likelihood(rec: MeasurementRecord, proto: TomographyProtocol, chi: ProcessChi) -> float:
    """sum [k ln(t p) - t p] over every row of rec; -inf if a row with k > 0 has p <= 0"""
    if chi.dim != proto.dim:
        raise DimensionError(f"chi-matrix dimension {chi.dim} does not match protocol dimension {proto.dim}")
    return LikelihoodModel(rec, proto).log_likelihood(chi.matrix)


def with_normalization(rec: MeasurementRecord, proto: TomographyProtocol,
                       opts: SolverOptions) -> MeasurementRecord:
    """Append the fictitious normalization rows unless rec already carries them"""
    if len(rec.fictitious_rows()):
        return rec
    t_phi = opts.t_phi_factor * rec.max_t
    return rec.with_rows(normalization_complement(proto, t_phi))


def _initial_root(size: int, opts: SolverOptions) -> ComplexMatrix:
    """Full-rank starting root: a perturbed maximally-mixed root or a Ginibre matrix"""
    rng = np.random.default_rng(opts.seed)
    noise = (rng.normal(size=(size, size)) + 1j * rng.normal(size=(size, size))) / np.sqrt(2 * size)
    if opts.init == "random":
        return noise
    return np.eye(size, dtype=complex) + 0.1 * noise


def _leading_root(e: ComplexMatrix, rank: int) -> ComplexMatrix:
    """Root of the best rank-r approximation of e e^dag"""
    evals, evecs = linalg.eigh(e @ e.conj().T)
    order = np.argsort(evals)[::-1][:rank]
    # floored so that no column starts at zero, where the iteration would keep it
    return evecs[:, order] * np.sqrt(np.clip(evals[order], 1e-6 * evals[order[0]], None))


def _prepare(rec: MeasurementRecord, proto: TomographyProtocol, opts: SolverOptions):
    issues = opts.validate()
    if issues:
        raise ConfigError(issues)
    model = LikelihoodModel(with_normalization(rec, proto, opts), proto)
    # fictitious rows always make I definite; completeness is a property of the real rows
    i_evals = linalg.eigvalsh(model.real_i_matrix)
    if i_evals[0] <= 1e-10 * i_evals[-1]:
        raise SingularProtocolError(
            f"I matrix is singular (eigenvalue range {i_evals[0]:.3e}..{i_evals[-1]:.3e}); "
            "the protocol is not informationally complete"
        )
    return model, linalg.cho_factor(model.i_matrix)


def _iterate(model: LikelihoodModel, i_factor, e: ComplexMatrix, opts: SolverOptions,
             max_iterations: int) -> RootFactor:
    """Damped fixed-point iteration from e; stops at the residual tolerance or after max_iterations.

    Every iterate is rescaled to sum t p = sum k over all rows. The likelihood
    equation fixes that scale, and it differs from Tr(e e^dag) = s whenever the
    effects do not decompose unity. RootFactor.chi applies the trace normalization.
    """
    def rescaled(root):
        return root * np.sqrt(model.total_counts / model.expected_total(root @ root.conj().T))

    rank = e.shape[1]
    e = rescaled(e)
    chi = e @ e.conj().T
    current = model.log_likelihood(chi, floor=PROB_FLOOR)
    residual = np.inf

    for iteration in range(1, max_iterations + 1):
        j_e = model.j_matrix(chi) @ e
        i_e = model.i_matrix @ e
        residual = float(np.linalg.norm(i_e - j_e) / np.linalg.norm(i_e))
        if residual < opts.convergence_tol:
            return RootFactor(e, iteration - 1, residual, True, current)

        target = linalg.cho_solve(i_factor, j_e)
        mu = opts.mixing
        while True:
            candidate = rescaled((1 - mu) * e + mu * target)
            candidate_chi = candidate @ candidate.conj().T
            value = model.log_likelihood(candidate_chi, floor=PROB_FLOOR)
            # monotonicity guard: halve the step until the likelihood does not drop
            if value >= current - 1e-12 * abs(current) or mu < 1e-6:
                break
            mu /= 2
        e, chi, current = candidate, candidate_chi, value

        if iteration % 1000 == 0:
            logger.debug(f"rank {rank}: iteration {iteration}, residual {residual:.3e}, logL {current:.6f}")

    return RootFactor(e, max_iterations, residual, False, current)


def warm_start(rec: MeasurementRecord, proto: TomographyProtocol,
               opts: SolverOptions = SolverOptions()) -> RootFactor:
    """Full-rank root after at most opts.warm_iterations steps from the configured start.

    The full-rank likelihood is concave in chi, so this root lands near the
    global maximum wherever the iteration began.
    """
    model, i_factor = _prepare(rec, proto, opts)
    size = proto.dim ** 2
    return _iterate(model, i_factor, _initial_root(size, opts), opts, opts.warm_iterations)


def solve_fixed_point(rec: MeasurementRecord, proto: TomographyProtocol, r: int,
                      opts: SolverOptions = SolverOptions(), start: Optional[RootFactor] = None) -> RootFactor:
    """Iterate e <- (1 - mu) e + mu I^-1 J(e) e until the likelihood equation holds.

    Below full rank the iteration starts from the leading r eigenpairs of a
    full-rank warm start (computed here unless `start` supplies one). Low-rank
    iterations started elsewhere can stall on saddle points of the likelihood
    equation, which satisfy the residual test as well.

    Args:
        rec: Counts, with or without fictitious normalization rows
        proto: Protocol the counts were taken with
        r: Rank of the estimate, 1 <= r <= s^2
        opts: Solver options
        start: Full-rank factor to warm-start from, shared across a rank ladder

    Returns:
        RootFactor; its chi is trace-normalized to s
    """
    size = proto.dim ** 2
    if not 1 <= r <= size:
        raise ValueError(f"rank must lie in [1, {size}], got {r}")
    model, i_factor = _prepare(rec, proto, opts)

    if start is not None and start.e.shape != (size, size):
        raise DimensionError(f"Warm start must be a full-rank {size}x{size} root, got {start.e.shape}")
    if r == size:
        e0 = start.e if start is not None else _initial_root(size, opts)
    else:
        if start is None:
            start = _iterate(model, i_factor, _initial_root(size, opts), opts, opts.warm_iterations)
        e0 = _leading_root(start.e, r)

    factor = _iterate(model, i_factor, e0, opts, opts.max_iterations)
    if factor.converged:
        logger.debug(f"rank {r}: converged after {factor.iterations} iterations, residual {factor.residual:.3e}")
        return factor

    message = f"Rank-{r} reconstruction did not converge to tol {opts.convergence_tol:g}"
    if opts.raise_on_nonconvergence:
        raise ConvergenceError(message, factor.residual, opts.max_iterations, chi=factor.chi)
    logger.warning(f"{message} (residual={factor.residual:.3e}); keeping the last iterate")
    return factor


def reconstruct_at_rank(rec: MeasurementRecord, proto: TomographyProtocol, r: int,
                        opts: SolverOptions = SolverOptions()) -> ProcessChi:
    """Rank-r maximum-likelihood chi-matrix, trace normalized to s"""
    return solve_fixed_point(rec, proto, r, opts).chi


def fidelity_report(chi_hat: ProcessChi, reference: ProcessChi) -> float:
    return process_fidelity(chi_hat, reference)
