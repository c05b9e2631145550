# backend/lagrangian/reports.py
"""Named residual checks and the structured text report written by hslag."""
import math
from dataclasses import dataclass, field

REPORT_SCHEMA = '1.0'

CHECK_STATUS = (
    ('pass', 'Pass'),
    ('fail', 'Fail'),
)


def _fmt(value):
    if value is None:
        return 'nan'
    return format(float(value), '.17g')


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    tol: float
    low: float = None

    @property
    def passed(self):
        value = float(self.value)
        if math.isnan(value):
            return False
        if self.low is not None:
            return self.low <= value <= self.tol
        return value <= self.tol

    @property
    def status(self):
        return 'pass' if self.passed else 'fail'

    def line(self):
        tol = _fmt(self.tol) if self.low is None else f"{_fmt(self.low)}..{_fmt(self.tol)}"
        return f"check = {self.name}, {_fmt(self.value)}, {tol}, {self.status}"


@dataclass
class Report:
    """Ordered set of checks; a name may appear only once."""

    title: str
    checks: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def __contains__(self, name):
        return any(c.name == name for c in self.checks)

    def __getitem__(self, name):
        for check in self.checks:
            if check.name == name:
                return check
        raise KeyError(name)

    def add(self, name, value, tol, low=None):
        if name in self:
            raise ValueError(f"check '{name}' already recorded in report '{self.title}'")
        check = Check(name, float(value), float(tol), None if low is None else float(low))
        self.checks.append(check)
        return check

    def add_range(self, name, value, low, high):
        return self.add(name, value, high, low=low)

    def note(self, key, value):
        self.notes[key] = str(value)

    def warn(self, message):
        self.warnings.append(message)

    def extend(self, other, prefix=''):
        for check in other.checks:
            self.add(prefix + check.name, check.value, check.tol, check.low)
        for key, value in other.notes.items():
            self.note(prefix + key, value)
        self.warnings.extend(other.warnings)
        return self

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    @property
    def failures(self):
        return [c for c in self.checks if not c.passed]

    def lines(self):
        out = [f"# hslag report: {self.title}", f"schema = {REPORT_SCHEMA}"]
        out.extend(f"note = {key}, {value}" for key, value in self.notes.items())
        out.extend(c.line() for c in self.checks)
        out.extend(f"warning = {w}" for w in self.warnings)
        out.append(f"result = {'pass' if self.passed else 'fail'}")
        return out

    def as_text(self):
        return '\n'.join(self.lines()) + '\n'
