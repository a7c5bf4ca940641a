from __future__ import annotations

from pydantic import BaseModel, Field


class Check(BaseModel):
    """One named expected-outcome assertion and its measured value."""

    name: str
    passed: bool
    value: float | None = None
    threshold: float | None = None
    detail: str = ''

    @classmethod
    def at_most(cls, name: str, value: float, threshold: float, detail: str = '') -> 'Check':
        return cls(name=name, passed=bool(value <= threshold), value=float(value), threshold=float(threshold), detail=detail)

    @classmethod
    def at_least(cls, name: str, value: float, threshold: float, detail: str = '') -> 'Check':
        return cls(name=name, passed=bool(value >= threshold), value=float(value), threshold=float(threshold), detail=detail)

    @classmethod
    def holds(cls, name: str, condition: bool, detail: str = '') -> 'Check':
        return cls(name=name, passed=bool(condition), detail=detail)


class CheckReport(BaseModel):
    scenario: str
    provenance: str = ''
    checks: list[Check] = Field(default_factory=list)
    notes: list[str] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def failures(self) -> list[Check]:
        return [check for check in self.checks if not check.passed]

    def to_text(self) -> str:
        lines = [f'scenario: {self.scenario}']
        if self.provenance:
            lines.append(f'source: {self.provenance}')
        for check in self.checks:
            status = 'PASS' if check.passed else 'FAIL'
            measured = ''
            if check.value is not None:
                measured = f' value={check.value:.6g}'
                if check.threshold is not None:
                    measured += f' threshold={check.threshold:.6g}'
            detail = f' ({check.detail})' if check.detail else ''
            lines.append(f'[{status}] {check.name}{measured}{detail}')
        lines.extend(f'note: {note}' for note in self.notes)
        lines.append(f'result: {"PASS" if self.passed else "FAIL"}')
        return '\n'.join(lines) + '\n'
