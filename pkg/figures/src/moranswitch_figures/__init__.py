"""Figure rendering for moranswitch CLI artifacts (CSV/JSON in, images out)."""

from .render import render
from .schemas import (
    FigureSpec,
    SchemaError,
    Table,
    read_table,
    tables_equal,
    validate_columns,
    write_table,
)

__version__ = "0.1.0"
