from pydantic import BaseModel, ConfigDict


class CheckResult(BaseModel):
    """Outcome of one oracle comparison: passed when value <= threshold.

    Results with enforced=False are diagnostics and never fail a run.
    """

    model_config = ConfigDict(frozen=True)

    name: str
    passed: bool
    value: float
    threshold: float
    cases: int = 1
    detail: str = ""
    enforced: bool = True

    @classmethod
    def at_most(
        cls, name: str, value: float, threshold: float, cases: int = 1, detail: str = "", enforced: bool = True
    ) -> "CheckResult":
        return cls(
            name=name,
            passed=bool(value <= threshold),
            value=float(value),
            threshold=threshold,
            cases=cases,
            detail=detail,
            enforced=enforced,
        )

    @property
    def failed(self) -> bool:
        return self.enforced and not self.passed
