# backend/measurement_record.py
"""
Observed event counts aligned to a tomography protocol
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from .errors import DimensionError

logger = logging.getLogger(__name__)

SAMPLING_MODES = ("poisson_independent", "multinomial_per_scheme")


@dataclass(frozen=True, eq=False)
class MeasurementRecord:
    """Rows of (prep_index, effect_index, t, k, fictitious).

    Fictitious normalization rows use effect_index = -1 and index the
    normalization projector set with prep_index.
    """

    REQUIRED_COLUMNS = ["prep_index", "effect_index", "t", "k", "fictitious"]

    rows: pd.DataFrame
    sampling: str = "multinomial_per_scheme"
    seed: Optional[int] = None
    metadata: Dict = field(default_factory=dict)

    def __post_init__(self):
        missing = [col for col in self.REQUIRED_COLUMNS if col not in self.rows.columns]
        if missing:
            raise DimensionError(f"Measurement record is missing columns: {', '.join(missing)}")
        if self.sampling not in SAMPLING_MODES:
            raise ValueError(f"Unknown sampling mode '{self.sampling}'")
        rows = self.rows[self.REQUIRED_COLUMNS].reset_index(drop=True).astype(
            {"prep_index": int, "effect_index": int, "t": float, "k": float, "fictitious": bool}
        )
        object.__setattr__(self, "rows", rows)

    @classmethod
    def from_grid(cls, t: np.ndarray, k: np.ndarray, sampling: str,
                  seed: Optional[int] = None, metadata: Optional[Dict] = None) -> "MeasurementRecord":
        """Record from (m_p x m_m) arrays, rows ordered preparation-major"""
        m_p, m_m = t.shape
        prep_idx, effect_idx = np.meshgrid(np.arange(m_p), np.arange(m_m), indexing="ij")
        df = pd.DataFrame({
            "prep_index": prep_idx.ravel(),
            "effect_index": effect_idx.ravel(),
            "t": np.asarray(t, dtype=float).ravel(),
            "k": np.asarray(k, dtype=float).ravel(),
            "fictitious": False,
        })
        return cls(df, sampling=sampling, seed=seed, metadata=dict(metadata or {}))

    def __len__(self) -> int:
        return len(self.rows)

    def real_rows(self) -> pd.DataFrame:
        return self.rows[~self.rows["fictitious"]]

    def fictitious_rows(self) -> pd.DataFrame:
        return self.rows[self.rows["fictitious"]]

    @property
    def max_t(self) -> float:
        real = self.real_rows()
        return float(real["t"].max()) if len(real) else 0.0

    @property
    def is_integral(self) -> bool:
        return bool(np.all(np.mod(self.rows["k"], 1.0) == 0))

    def validate(self) -> List[str]:
        issues = []
        if (self.rows["k"] < 0).any():
            issues.append(f"{int((self.rows['k'] < 0).sum())} rows have negative counts")
        if (self.rows["t"] <= 0).any():
            issues.append(f"{int((self.rows['t'] <= 0).sum())} rows have non-positive repetitions")
        fict = self.fictitious_rows()
        if len(fict) and not np.allclose(fict["k"], fict["t"]):
            issues.append("fictitious rows must have k equal to t")
        return issues

    def count_grid(self, m_p: int, m_m: int) -> Tuple[np.ndarray, np.ndarray]:
        """Real rows as dense (m_p x m_m) repetition and count arrays"""
        real = self.real_rows()
        if len(real) != m_p * m_m:
            raise DimensionError(
                f"Record has {len(real)} real rows but the protocol defines {m_p * m_m} (m_p={m_p}, m_m={m_m})"
            )
        if real["prep_index"].max() >= m_p or real["effect_index"].max() >= m_m or (real["effect_index"] < 0).any():
            raise DimensionError("Record indices fall outside the protocol")
        t = np.zeros((m_p, m_m))
        k = np.zeros((m_p, m_m))
        seen = np.zeros((m_p, m_m), dtype=bool)
        i = real["prep_index"].to_numpy()
        j = real["effect_index"].to_numpy()
        t[i, j] = real["t"].to_numpy()
        k[i, j] = real["k"].to_numpy()
        seen[i, j] = True
        if not seen.all():
            raise DimensionError("Record has duplicate (prep_index, effect_index) rows")
        return t, k

    def fictitious_arrays(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        fict = self.fictitious_rows()
        return (fict["prep_index"].to_numpy(), fict["t"].to_numpy(), fict["k"].to_numpy())

    def with_rows(self, other: "MeasurementRecord") -> "MeasurementRecord":
        combined = pd.concat([self.rows, other.rows], ignore_index=True)
        return replace(self, rows=combined)

    def permuted(self, rng: np.random.Generator) -> "MeasurementRecord":
        return replace(self, rows=self.rows.iloc[rng.permutation(len(self.rows))])
