"""Validation reports shared by the catalog and template checks."""
from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class Issue:
    code: str
    message: str
    subject: tuple = ()
    severity: str = "error"

    def __str__(self):
        return f"[{self.severity}] {self.code}: {self.message}"


@dataclass
class Report:
    issues: list[Issue] = field(default_factory=list)

    def add(self, code, message, subject=(), severity="error"):
        self.issues.append(Issue(code, message, tuple(subject), severity))

    @property
    def errors(self) -> list[Issue]:
        return [i for i in self.issues if i.severity == "error"]

    @property
    def warnings(self) -> list[Issue]:
        return [i for i in self.issues if i.severity == "warning"]

    @property
    def ok(self) -> bool:
        return not self.errors

    @property
    def codes(self) -> set[str]:
        return {i.code for i in self.issues}

    def __len__(self):
        return len(self.issues)

    def __iter__(self):
        return iter(self.issues)

    def __str__(self):
        if not self.issues:
            return "no issues"
        return "\n".join(str(i) for i in self.issues)
