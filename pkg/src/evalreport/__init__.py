"""Result tables and selection diagnostics"""
from evalreport.summary import REPORT_COLUMNS, Cell, ComparisonTable, build_table, load_summaries, summarize
from evalreport.selection import (
    DEFAULT_TREND_WINDOWS,
    AgentSelection,
    SelectionDiagnostics,
    read_mask_dump,
    selection_report,
    trend_windows,
)

__all__ = [
    "REPORT_COLUMNS",
    "Cell",
    "ComparisonTable",
    "build_table",
    "load_summaries",
    "summarize",
    "DEFAULT_TREND_WINDOWS",
    "AgentSelection",
    "SelectionDiagnostics",
    "read_mask_dump",
    "selection_report",
    "trend_windows",
]
