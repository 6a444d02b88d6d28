from pydantic import BaseModel, ConfigDict

from typing import Any, Dict, List, Optional

from app.models.design import ComparisonReport, MinMax, ScanRow, TripleDist


class ReportMeta(BaseModel):
    model_config = ConfigDict(extra="ignore")
    tool_version: str
    m: int
    modulus: List[int]
    generator: Optional[int] = None
    convention: Optional[str] = None
    seed: Optional[int] = None


class CheckReport(BaseModel):
    model_config = ConfigDict(extra="ignore")
    check: str
    m: int
    subject: str
    all_pass: bool
    checked: int = 0
    witnesses: List[Any] = []
    details: Dict[str, Any] = {}


class TheoremReport(BaseModel):
    model_config = ConfigDict(extra="ignore")
    meta: Optional[ReportMeta] = None
    theorem: str
    m: int
    mode: str
    min: int
    holds: bool
    checked: int
    witnesses: List[Any] = []
    seed: Optional[int] = None
    details: Dict[str, Any] = {}


class CarryAuditReport(BaseModel):
    model_config = ConfigDict(extra="ignore")
    meta: Optional[ReportMeta] = None
    theorem: str = "carry-bounds"
    m: int
    mode: str
    instances: int
    holds: bool
    violations: Dict[str, int]
    witnesses: Dict[str, List[Any]] = {}
    max_carry: int
    max_carry_sum: int
    seed: Optional[int] = None


class VerifyReport(BaseModel):
    model_config = ConfigDict(extra="ignore")
    meta: ReportMeta
    family: str
    checks: Dict[str, bool]
    parameters: List[int] = []
    verdict: Optional[str] = None
    all_pass: bool
    details: Dict[str, Any] = {}


class ConstructReport(BaseModel):
    model_config = ConfigDict(extra="ignore")
    meta: ReportMeta
    family: str
    mode: str
    path: str
    cardinality: int


class InvariantsReport(BaseModel):
    model_config = ConfigDict(extra="ignore")
    meta: ReportMeta
    stat: str
    distributions: List[TripleDist] = []
    minmax: List[MinMax] = []
    comparison: Optional[ComparisonReport] = None


class ScanReport(BaseModel):
    model_config = ConfigDict(extra="ignore")
    tool_version: str
    moduli: Dict[str, List[int]]
    rows: List[ScanRow]


class CalibrationReport(BaseModel):
    model_config = ConfigDict(extra="ignore")
    meta: ReportMeta
    convention: str
    convention_evidence: Dict[str, bool]
    dy_labels_swapped: bool
    dy_evidence: Dict[str, bool]


class CharsumReport(BaseModel):
    model_config = ConfigDict(extra="ignore")
    meta: ReportMeta
    family: str
    checks: List[CheckReport]
    all_pass: bool
    details: Dict[str, Any] = {}
