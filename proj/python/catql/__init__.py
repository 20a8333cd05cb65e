"""Categorical queries over relational, tree and graph data."""

from ._catql import (
    CatqlError,
    Database,
    Result,
    check,
    explain,
    query,
    unsafe_variables,
)

__all__ = [
    "CatqlError",
    "Database",
    "Result",
    "check",
    "explain",
    "query",
    "unsafe_variables",
]
