"""Perfect-correlation doubles for finite-dimensional matrix algebras."""

from ._epr import (
    EprError,
    MatrixAlgebra,
    Tolerance,
    block_decomposition,
    center,
    centralizer,
    commutant,
    doubles_algebra,
    generate_algebra,
    intersect,
    modular_data,
    modular_double,
    reduce,
    reduced_density,
    run_cli,
    schmidt,
    solve_double,
    span_equal,
    verify_double,
)

__all__ = [
    "EprError",
    "MatrixAlgebra",
    "Tolerance",
    "block_decomposition",
    "center",
    "centralizer",
    "commutant",
    "doubles_algebra",
    "generate_algebra",
    "intersect",
    "modular_data",
    "modular_double",
    "reduce",
    "reduced_density",
    "run_cli",
    "schmidt",
    "solve_double",
    "span_equal",
    "verify_double",
]
