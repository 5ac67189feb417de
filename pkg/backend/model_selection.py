# backend/model_selection.py
"""
Chi-squared adequacy test and the rank ladder
"""
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import special

from .channels import ProcessChi
from .errors import NumericalError
from .measurement_record import MeasurementRecord
from .mle_engine import RootFactor, SolverOptions, solve_fixed_point, warm_start
from .protocol_builder import TomographyProtocol
from .spam_simulator import protocol_probabilities

logger = logging.getLogger(__name__)

DEFAULT_ALPHA = 0.05
MIN_EXPECTED = 5.0


@dataclass(frozen=True)
class AdequacyReport:
    rank: int
    chi2_stat: float
    dof: int
    p_value: float
    significant: bool
    nu_p: int
    nu_k: int
    nu_k_bases: int
    cells: int
    iterations: int = 0
    residual: float = 0.0
    converged: bool = True
    log_likelihood: float = 0.0

    @property
    def testable(self) -> bool:
        return self.dof >= 1

    @property
    def dof_bases(self) -> int:
        """Degrees of freedom under the reading nu_K = number of bases"""
        return self.cells - self.nu_p - self.nu_k_bases

    def to_dict(self) -> Dict:
        out = asdict(self)
        out["testable"] = self.testable
        out["dof_bases"] = self.dof_bases
        return out


@dataclass(frozen=True, eq=False)
class RankSelection:
    reports: List[AdequacyReport]
    chosen_rank: int
    chi: ProcessChi
    factor: RootFactor
    estimable: bool
    factors: Dict[int, RootFactor] = field(default_factory=dict)

    @property
    def chosen_report(self) -> AdequacyReport:
        return next(report for report in self.reports if report.rank == self.chosen_rank)


def parameter_count(s: int, r: int) -> int:
    """nu_P = 2 s^2 r - r^2 - s^2 real parameters of a rank-r trace-preserving chi"""
    return 2 * s * s * r - r * r - s * s


def degrees_of_freedom(m: int, s: int, r: int, nu_k: int) -> int:
    """nu = m - nu_P - nu_K; a value below 1 means the rank cannot be tested"""
    return m - parameter_count(s, r) - nu_k


def constraint_count(rec: MeasurementRecord, proto: TomographyProtocol) -> Tuple[int, int]:
    """(nu_K under the scheme-count reading, nu_K under the basis-count reading)"""
    if rec.sampling == "poisson_independent":
        return 1, 1
    return proto.scheme_count, proto.m_b


def chi2_survival(stat: float, nu: int) -> float:
    """P(X > stat) for X ~ chi-squared with nu degrees of freedom"""
    if nu < 1:
        raise ValueError(f"nu must be >= 1, got {nu}")
    if math.isinf(stat):
        return 0.0
    return float(special.gammaincc(nu / 2.0, max(stat, 0.0) / 2.0))


def pearson_statistic(observed: np.ndarray, expected: np.ndarray) -> float:
    """sum (O - E)^2 / E"""
    observed = np.asarray(observed, dtype=float)
    expected = np.asarray(expected, dtype=float)
    if np.any(expected <= 0):
        raise NumericalError("Expected count is zero; merge sparse cells before the chi-squared test")
    return float(np.sum((observed - expected) ** 2 / expected))


def merge_sparse_cells(observed: np.ndarray, expected: np.ndarray,
                       threshold: float = MIN_EXPECTED) -> Tuple[np.ndarray, np.ndarray]:
    """Merge the smallest-expectation cell into the next smallest until every E >= threshold.

    A lone cell below threshold is kept; one with E = 0 and O = 0 is dropped.
    """
    obs = list(np.asarray(observed, dtype=float))
    exp = list(np.asarray(expected, dtype=float))
    while len(exp) > 1 and min(exp) < threshold:
        order = np.argsort(exp)
        a, b = int(order[0]), int(order[1])
        exp[b] += exp[a]
        obs[b] += obs[a]
        del exp[a], obs[a]
    if len(exp) == 1 and exp[0] <= 0 and obs[0] == 0:
        return np.zeros(0), np.zeros(0)
    return np.array(obs), np.array(exp)


def chi2_cells(rec: MeasurementRecord, proto: TomographyProtocol, chi_hat: ProcessChi,
               threshold: float = MIN_EXPECTED) -> Tuple[np.ndarray, np.ndarray]:
    """Observed and expected counts of the real rows, sparse cells merged within their scheme"""
    t, k = rec.count_grid(proto.m_p, proto.m_m)
    expected = t * np.clip(protocol_probabilities(chi_hat, proto), 0.0, None)
    if threshold <= 0:
        return k.ravel(), expected.ravel()
    observed_cells, expected_cells = [], []
    for i in range(proto.m_p):
        for idx in proto.groups():
            obs, exp = merge_sparse_cells(k[i, idx], expected[i, idx], threshold)
            observed_cells.append(obs)
            expected_cells.append(exp)
    return np.concatenate(observed_cells), np.concatenate(expected_cells)


def chi2_statistic(rec: MeasurementRecord, proto: TomographyProtocol, chi_hat: ProcessChi,
                   threshold: float = MIN_EXPECTED) -> float:
    """Pearson statistic over the real rows (fictitious rows excluded)"""
    observed, expected = chi2_cells(rec, proto, chi_hat, threshold)
    return pearson_statistic(observed, expected)


def adequacy_report(rec: MeasurementRecord, proto: TomographyProtocol, factor: RootFactor,
                    alpha: float = DEFAULT_ALPHA, threshold: float = MIN_EXPECTED) -> AdequacyReport:
    chi_hat = factor.chi
    observed, expected = chi2_cells(rec, proto, chi_hat, threshold)
    stat = pearson_statistic(observed, expected)
    nu_k, nu_k_bases = constraint_count(rec, proto)
    dof = degrees_of_freedom(len(observed), proto.dim, factor.rank, nu_k)
    p_value = chi2_survival(stat, dof) if dof >= 1 else float("nan")
    return AdequacyReport(
        rank=factor.rank,
        chi2_stat=stat,
        dof=dof,
        p_value=p_value,
        significant=bool(dof >= 1 and p_value >= alpha),
        nu_p=parameter_count(proto.dim, factor.rank),
        nu_k=nu_k,
        nu_k_bases=nu_k_bases,
        cells=len(observed),
        iterations=factor.iterations,
        residual=factor.residual,
        converged=factor.converged,
        log_likelihood=factor.log_likelihood,
    )


def select_rank(rec: MeasurementRecord, proto: TomographyProtocol, alpha: float = DEFAULT_ALPHA,
                opts: SolverOptions = SolverOptions(), ranks: Optional[Sequence[int]] = None,
                threshold: float = MIN_EXPECTED) -> RankSelection:
    """Climb r = 1, 2, ... and stop at the first rank the chi-squared test accepts.

    With no accepted rank the full-rank estimate is returned and the
    selection is flagged as not estimable.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    ladder = list(ranks) if ranks is not None else list(range(1, proto.dim ** 2 + 1))

    # every rank below s^2 starts from the leading eigenpairs of one full-rank solution
    start = warm_start(rec, proto, opts)
    reports, factors = [], {}
    for r in ladder:
        factor = solve_fixed_point(rec, proto, r, opts, start=start)
        report = adequacy_report(rec, proto, factor, alpha, threshold)
        reports.append(report)
        factors[r] = factor
        logger.info(f"rank {r}: chi2={report.chi2_stat:.3f}, nu={report.dof}, p={report.p_value:.4f}")
        if report.significant:
            return RankSelection(reports, r, factor.chi, factor, True, factors)

    last = ladder[-1]
    if len(ladder) > 1 or ranks is None:
        logger.warning(f"No rank passed the chi-squared test at alpha={alpha}; rank not estimable, "
                       f"returning the rank-{last} estimate")
    return RankSelection(reports, last, factors[last].chi, factors[last], False, factors)
