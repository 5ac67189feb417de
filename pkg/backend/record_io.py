# backend/record_io.py
"""
Count, protocol, calibration and result files

Counts are CSV (one row per protocol row, '#'-prefixed YAML header lines);
everything else is YAML carrying a schema_version field. Complex matrices
are nested lists of [re, im] pairs.
"""
import logging
import os
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
import yaml

from .channels import ComplexMatrix, DensityMatrix, KrausSet, ProcessChi
from .errors import DimensionError, RecordIOError
from .measurement_record import MeasurementRecord
from .protocol_builder import MeasurementEffect, PreparationSpec, Rotation, TomographyProtocol

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


def encode_matrix(mat: ComplexMatrix) -> List:
    mat = np.asarray(mat, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in mat]


def decode_matrix(data) -> ComplexMatrix:
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise DimensionError(f"Matrix must be nested [re, im] pairs, got array of shape {arr.shape}")
    return arr[..., 0] + 1j * arr[..., 1]


def write_yaml(path: str, data: Dict) -> str:
    out = Path(path)
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", encoding="utf-8") as f:
            yaml.safe_dump({"schema_version": SCHEMA_VERSION, **data}, f, sort_keys=False)
    except OSError as e:
        raise RecordIOError(f"Could not write file ({e.strerror})", str(out))
    return str(out)


def read_yaml(path: str, kind: str) -> Dict:
    """Load a YAML file and check its kind and schema version"""
    src = Path(path)
    if not src.exists():
        raise RecordIOError(f"{kind.capitalize()} file not found", str(src))
    try:
        with open(src, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f) or {}
    except (OSError, yaml.YAMLError) as e:
        raise RecordIOError(f"Could not read {kind} file ({e})", str(src))
    if data.get("schema_version") != SCHEMA_VERSION:
        raise RecordIOError(f"Unsupported schema_version {data.get('schema_version')}", str(src))
    if data.get("kind") != kind:
        raise RecordIOError(f"Expected a {kind} file, found '{data.get('kind')}'", str(src))
    return data


class CountFile:
    """Read and validate a CSV count file"""

    REQUIRED_COLUMNS = MeasurementRecord.REQUIRED_COLUMNS

    def __init__(self, csv_path: str):
        self.csv_path = str(csv_path)
        self.df = None
        self.header = {}

    def validate_file(self) -> Tuple[bool, Optional[str]]:
        if not os.path.exists(self.csv_path):
            return False, f"File not found: {self.csv_path}"
        if not self.csv_path.lower().endswith(".csv"):
            return False, "Count file must be a CSV"
        return True, None

    def load(self) -> pd.DataFrame:
        valid, error = self.validate_file()
        if not valid:
            raise RecordIOError(error, self.csv_path)
        try:
            with open(self.csv_path, "r", encoding="utf-8") as f:
                header_lines = [line[2:] for line in f if line.startswith("# ")]
            self.header = yaml.safe_load("".join(header_lines)) or {}
            self.df = pd.read_csv(self.csv_path, comment="#")
        except pd.errors.EmptyDataError:
            raise RecordIOError("Count file is empty", self.csv_path)
        except (OSError, yaml.YAMLError, pd.errors.ParserError) as e:
            raise RecordIOError(f"Error reading count file ({e})", self.csv_path)
        return self.df

    def validate_columns(self) -> Tuple[bool, List[str]]:
        if self.df is None:
            return False, ["DataFrame not loaded"]
        missing = [col for col in self.REQUIRED_COLUMNS if col not in self.df.columns]
        return not missing, missing

    def record(self) -> MeasurementRecord:
        if self.df is None:
            self.load()
        valid, missing = self.validate_columns()
        if not valid:
            raise RecordIOError(f"Count file is missing columns: {', '.join(missing)}", self.csv_path)
        rec = MeasurementRecord(
            self.df,
            sampling=self.header.get("sampling", "multinomial_per_scheme"),
            seed=self.header.get("seed"),
            metadata=dict(self.header),
        )
        issues = rec.validate()
        if issues:
            raise RecordIOError(f"Invalid counts: {'; '.join(issues)}", self.csv_path)
        return rec


def write_counts(rec: MeasurementRecord, path: str, header: Optional[Dict] = None) -> str:
    """CSV count file; header carries protocol reference, seed, sampling and n"""
    meta = {"sampling": rec.sampling, "seed": rec.seed, **rec.metadata, **(header or {})}
    out = Path(path)
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", encoding="utf-8", newline="") as f:
            for line in yaml.safe_dump(meta, sort_keys=False).splitlines():
                f.write(f"# {line}\n")
            rec.rows.to_csv(f, index=False)
    except OSError as e:
        raise RecordIOError(f"Could not write count file ({e.strerror})", str(out))
    return str(out)


def read_counts(path: str) -> MeasurementRecord:
    return CountFile(path).record()


def protocol_to_dict(p: TomographyProtocol) -> Dict:
    return {
        "kind": "protocol",
        "label": p.label,
        "n_qubits": p.n_qubits,
        "preparations": [
            {
                "index": prep.index,
                "state": encode_matrix(prep.state.matrix),
                "rotations": [{"theta": float(r.theta), "axis": [float(x) for x in r.axis]} for r in prep.rotations],
            }
            for prep in p.preparations
        ],
        "basis_rotations": [
            [{"theta": float(r.theta), "axis": [float(x) for x in r.axis]} for r in rots] for rots in p.basis_rotations
        ],
        "effects": [
            {"index": e.index, "group": e.group, "outcome": e.outcome, "operator": encode_matrix(e.operator)}
            for e in p.effects
        ],
    }


def _rotations(items) -> Tuple[Rotation, ...]:
    return tuple(Rotation(float(r["theta"]), tuple(float(x) for x in r["axis"])) for r in items)


def protocol_from_dict(data: Dict) -> TomographyProtocol:
    try:
        preps = tuple(
            PreparationSpec(int(p["index"]), DensityMatrix(decode_matrix(p["state"])), _rotations(p.get("rotations", [])))
            for p in data["preparations"]
        )
        effects = tuple(
            MeasurementEffect(int(e["index"]), decode_matrix(e["operator"]), int(e["group"]), int(e["outcome"]))
            for e in data["effects"]
        )
        bases = tuple(_rotations(rots) for rots in data.get("basis_rotations", []))
        return TomographyProtocol(int(data["n_qubits"]), preps, effects, bases, data.get("label", "standard"))
    except (KeyError, TypeError) as e:
        raise RecordIOError(f"Malformed protocol file (missing or invalid field {e})")


def write_protocol(p: TomographyProtocol, path: str) -> str:
    return write_yaml(path, protocol_to_dict(p))


def read_protocol(path: str) -> TomographyProtocol:
    return protocol_from_dict(read_yaml(path, "protocol"))


def write_calibration(path: str, chi: ProcessChi, kraus: KrausSet, summary: Dict) -> str:
    """Empty-gate tomogram plus its Kraus form"""
    return write_yaml(path, {
        "kind": "calibration",
        **summary,
        "chi": encode_matrix(chi.matrix),
        "kraus": [encode_matrix(op) for op in kraus.operators],
    })


def read_calibration(path: str) -> Tuple[ProcessChi, KrausSet, Dict]:
    data = read_yaml(path, "calibration")
    try:
        chi = ProcessChi(decode_matrix(data.pop("chi")))
        kraus = KrausSet(tuple(decode_matrix(op) for op in data.pop("kraus")), trace_preserving=bool(data.get("trace_preserving", False)))
    except KeyError as e:
        raise RecordIOError(f"Calibration file lacks field {e}", str(path))
    return chi, kraus, data


def write_result(path: str, result: Dict) -> str:
    return write_yaml(path, {"kind": "result", **result})


def read_result(path: str) -> Dict:
    return read_yaml(path, "result")


def file_kind(path: str) -> Optional[str]:
    """The kind field of a YAML file, or None if it is not one of ours"""
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except (OSError, yaml.YAMLError):
        return None
    return data.get("kind") if isinstance(data, dict) else None
