# backend/report_generator.py
"""
Tables and plot data from reconstruction result files
"""
import logging
import os
from typing import Dict, List

import numpy as np
import pandas as pd
import yaml

from .channels import pauli_labels
from .errors import RecordIOError
from .record_io import decode_matrix, file_kind, read_result

logger = logging.getLogger(__name__)

REPORT_FORMATS = ("csv", "structured")


class ReportGenerator:
    """Aggregate result files into histogram, fidelity, Pauli and ladder tables"""

    MODEL_ORDER = ["ippm_true", "gn", "ng", "standard"]

    def __init__(self, output_dir: str = "exports", bins: int = 20):
        self.output_dir = output_dir
        self.bins = bins
        os.makedirs(output_dir, exist_ok=True)

    def load_results(self, paths: List[str]) -> List[Dict]:
        paths = [path for path in paths if file_kind(path) == "result"]
        if not paths:
            raise RecordIOError("No result files to report on")
        results = []
        for path in sorted(paths):
            data = read_result(path)
            data["source"] = os.path.basename(path)
            results.append(data)
        logger.info(f"Loaded {len(results)} result files")
        return results

    def summary_frame(self, results: List[Dict]) -> pd.DataFrame:
        rows = [
            {
                "source": r["source"],
                "protocol_model": r["protocol_model"],
                "n": r.get("n"),
                "trial": r.get("trial"),
                "rank": r["chosen_rank"],
                "estimable": r["estimable"],
                "fidelity": r.get("fidelity"),
            }
            for r in results
        ]
        df = pd.DataFrame(rows)
        df["infidelity"] = 1.0 - df["fidelity"].astype(float)
        return df

    def infidelity_histogram(self, df: pd.DataFrame) -> pd.DataFrame:
        """Counts per infidelity bin and protocol model, on bin edges shared by all models"""
        scored = df.dropna(subset=["infidelity"])
        if scored.empty:
            return pd.DataFrame(columns=["protocol_model", "n", "bin_left", "bin_right", "count"])
        upper = max(float(scored["infidelity"].max()), 1e-12)
        edges = np.linspace(0.0, upper, self.bins + 1)
        rows = []
        for (model, n), group in scored.groupby(["protocol_model", "n"], sort=False):
            counts, _ = np.histogram(group["infidelity"].clip(lower=0.0), bins=edges)
            rows.extend(
                {"protocol_model": model, "n": n, "bin_left": edges[b], "bin_right": edges[b + 1], "count": int(c)}
                for b, c in enumerate(counts)
            )
        return self._ordered(pd.DataFrame(rows))

    def fidelity_table(self, df: pd.DataFrame) -> pd.DataFrame:
        """Mean fidelity with first and third quartiles per model and sample size"""
        scored = df.dropna(subset=["fidelity"])
        table = scored.groupby(["protocol_model", "n"])["fidelity"].agg(
            trials="count",
            mean="mean",
            q1=lambda x: x.quantile(0.25),
            median="median",
            q3=lambda x: x.quantile(0.75),
        ).reset_index()
        return self._ordered(table)

    def rank_frequency(self, df: pd.DataFrame) -> pd.DataFrame:
        """How often each rank was chosen, per model and sample size"""
        counts = df.groupby(["protocol_model", "n", "rank"]).size().rename("count").reset_index()
        totals = counts.groupby(["protocol_model", "n"])["count"].transform("sum")
        counts["share"] = counts["count"] / totals
        return self._ordered(counts)

    def ladder_table(self, results: List[Dict]) -> pd.DataFrame:
        rows = []
        for r in results:
            for report in r.get("ladder", []):
                rows.append({
                    "source": r["source"],
                    "protocol_model": r["protocol_model"],
                    "n": r.get("n"),
                    "trial": r.get("trial"),
                    **{key: report[key] for key in ("rank", "chi2_stat", "dof", "p_value", "significant")},
                })
        return pd.DataFrame(rows)

    def pauli_frames(self, result: Dict) -> Dict[str, pd.DataFrame]:
        """Real and imaginary parts of the Pauli-basis estimate, labeled by Pauli strings"""
        chi = decode_matrix(result["chi_pauli"])
        n_qubits = int(round(np.log2(np.sqrt(chi.shape[0]))))
        labels = pauli_labels(n_qubits)
        return {
            "real": pd.DataFrame(chi.real, index=labels, columns=labels),
            "imag": pd.DataFrame(chi.imag, index=labels, columns=labels),
        }

    def _ordered(self, df: pd.DataFrame) -> pd.DataFrame:
        if df.empty:
            return df
        rank = {model: idx for idx, model in enumerate(self.MODEL_ORDER)}
        key = df["protocol_model"].map(lambda m: rank.get(m, len(rank)))
        return df.assign(_order=key).sort_values(["_order", "n"], kind="stable").drop(columns="_order").reset_index(drop=True)

    def _representatives(self, results: List[Dict]) -> Dict[str, Dict]:
        """First result (by file name) of every model and sample size"""
        chosen = {}
        for r in results:
            chosen.setdefault(f"{r['protocol_model']}_n{r.get('n')}", r)
        return chosen

    def save_reports(self, paths: List[str], fmt: str = "csv", prefix: str = "report") -> Dict[str, str]:
        if fmt not in REPORT_FORMATS:
            raise ValueError(f"Unknown report format '{fmt}' (expected one of {', '.join(REPORT_FORMATS)})")
        results = self.load_results(paths)
        df = self.summary_frame(results)
        tables = {
            "summary": df,
            "histogram": self.infidelity_histogram(df),
            "fidelity": self.fidelity_table(df),
            "rank_frequency": self.rank_frequency(df),
            "ladder": self.ladder_table(results),
        }
        pauli = {key: self.pauli_frames(r) for key, r in self._representatives(results).items()}

        written = {}
        if fmt == "csv":
            for name, table in tables.items():
                path = os.path.join(self.output_dir, f"{prefix}_{name}.csv")
                table.to_csv(path, index=False)
                written[name] = path
            for key, frames in pauli.items():
                for part, frame in frames.items():
                    path = os.path.join(self.output_dir, f"{prefix}_pauli_{key}_{part}.csv")
                    frame.to_csv(path)
                    written[f"pauli_{key}_{part}"] = path
        else:
            path = os.path.join(self.output_dir, f"{prefix}.yaml")
            document = {
                "schema_version": 1,
                "kind": "report",
                **{name: table.to_dict(orient="records") for name, table in tables.items()},
                "pauli": {
                    key: {part: frame.values.tolist() for part, frame in frames.items()} for key, frames in pauli.items()
                },
            }
            with open(path, "w", encoding="utf-8") as f:
                yaml.safe_dump(_plain(document), f, sort_keys=False)
            written["structured"] = path

        logger.info(f"Report written: {len(written)} files in {self.output_dir}")
        return written


def _plain(value):
    """numpy scalars to builtin Python types for yaml.safe_dump"""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    return value
