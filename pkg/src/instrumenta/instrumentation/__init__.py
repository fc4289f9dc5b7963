from .builtins import (BUILTIN_NAMES, build_aggregation_operator, builtin_operator,
                       operator_for_program, program_predicate)
from .operators import (BOT, EMPTY, GhostDecl, GhostNameClash, InstrumentationOperator,
                        InstrumentedProgram, InvalidSelection, MetaSpec, RewriteRule,
                        UnknownOperator, collapse_split_temporaries, compose, full_selection,
                        instrument, instrumentation_space, match_rule, rewrite_statement,
                        space_size, validate_selection)
from .opfile import OperatorFileError, dump_operator, load_operator, make_operator

__all__ = [
    "BOT", "EMPTY", "GhostDecl", "GhostNameClash", "InstrumentationOperator",
    "InstrumentedProgram", "InvalidSelection", "MetaSpec", "RewriteRule", "UnknownOperator",
    "collapse_split_temporaries", "compose", "full_selection", "instrument",
    "instrumentation_space", "match_rule", "rewrite_statement", "space_size",
    "validate_selection", "BUILTIN_NAMES", "build_aggregation_operator", "builtin_operator",
    "operator_for_program", "program_predicate", "OperatorFileError", "dump_operator",
    "load_operator", "make_operator",
]
