from pydantic import BaseModel, Field, ConfigDict, field_validator

from typing import Dict, List, Literal, Optional, Tuple

Convention = Literal["unordered_distinct", "ordered_distinct"]
Verdict = Literal["difference_set", "partial_difference_set", "neither"]


class DicksonSpec(BaseModel):
    model_config = ConfigDict(extra="ignore", frozen=True)
    n: int = Field(ge=1)
    u: int = Field(ge=0)


class SetFile(BaseModel):
    model_config = ConfigDict(extra="ignore")
    m: int
    modulus: List[int]
    elements: List[int]
    family: Optional[str] = None

    @field_validator("elements")
    @classmethod
    def _sorted_unique(cls, v: List[int]) -> List[int]:
        return sorted(set(int(x) for x in v))


class CountSummary(BaseModel):
    model_config = ConfigDict(extra="ignore")
    min: int
    max: int
    uniform: bool
    count: int


class DsReport(BaseModel):
    model_config = ConfigDict(extra="ignore")
    v: int
    k: int
    lambda_spectrum: Dict[str, CountSummary]
    verdict: Verdict
    lam: Optional[int] = None
    mu: Optional[int] = None
    skew: bool = False

    @property
    def parameters(self) -> List[int]:
        if self.verdict == "difference_set":
            return [self.v, self.k, self.lam]
        if self.verdict == "partial_difference_set":
            return [self.v, self.k, self.lam, self.mu]
        return [self.v, self.k]


class TripleDist(BaseModel):
    model_config = ConfigDict(extra="ignore")
    family_label: str
    m: int
    modulus: List[int] = []
    pair_convention: Convention
    entries: List[Tuple[int, int]]

    @property
    def total(self) -> int:
        return sum(mult for _, mult in self.entries)

    @property
    def min_value(self) -> int:
        return self.entries[0][0]

    @property
    def max_value(self) -> int:
        return self.entries[-1][0]

    def multiplicity(self, value: int) -> int:
        return dict(self.entries).get(value, 0)


class MinMax(BaseModel):
    model_config = ConfigDict(extra="ignore")
    family_label: str
    m: int
    pair_convention: Convention
    min: int
    max: int


class ComparisonReport(BaseModel):
    model_config = ConfigDict(extra="ignore")
    m: int
    pair_convention: Convention
    labels: List[str]
    distinct: List[List[bool]]
    pairwise_distinct: bool
    summary: str


class OrbitCheck(BaseModel):
    model_config = ConfigDict(extra="ignore")
    u: int
    b: int
    b_is_square: bool
    scale: int
    equivalent_to: Literal["equivalent_to_D1", "equivalent_to_Dminus1"]


class FamilySpec(BaseModel):
    model_config = ConfigDict(extra="ignore")
    name: Literal["paley", "dy1", "dy-1", "d7", "image", "set"]
    m: int
    u: Optional[str] = None
    exponents: Optional[List[int]] = None
    set_file: Optional[str] = None
    mode: Literal["shds", "pds"] = "shds"

    @property
    def label(self) -> str:
        if self.name == "d7":
            return f"d7:{self.u}"
        if self.name == "image":
            return "image:" + ",".join(str(e) for e in self.exponents or [])
        if self.name == "set":
            return f"set:{self.set_file}"
        return self.name


class ScanRow(BaseModel):
    model_config = ConfigDict(extra="ignore")
    n: int
    m: int
    u: str
    is_permutation: bool
    is_skew: bool
    is_ds: bool
    is_pds: bool
    is_planar: bool
