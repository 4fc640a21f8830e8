"""Exact star-product algebra and Wigner-grid propagation for parametrized systems."""

from .covariant import (
    Connection,
    Diffeomorphism,
    SymplecticMatrix,
    christoffel,
    covariant_derivative,
    covariant_star_direct,
    covariant_star_pullback,
    jacobian_symplectic,
    measure_factor,
    pfaffian,
)
from .deltas import (
    DeltaFactor,
    DeltaSymbol,
    DeltaTerm,
    StarChain,
    build_stargenfunction,
    delta_text_form,
    exp_shift_star_delta,
    marginalize_degeneracy,
    moyal_bracket_poly,
    observable_stargenfunction,
    poisson_poly,
    schrodinger_stargen_chain,
    star_exp_linear_left,
    star_poly_left,
    star_poly_right,
    verify_stargen,
)
from .grids import (
    Amplitude,
    BracketOperator,
    GridAxis,
    GridSpec,
    GridState,
    evolve,
    liouville_rhs,
    moyal_rhs,
    normalize_check,
    probability,
    sample,
    step_rk4,
    wigner_of_amplitude,
)
from .moyal import (
    first_noncollapsing_power,
    moyal_bracket,
    star,
    star_exp_classical_check,
    star_exp_series,
    star_power,
)
from .parametrized import (
    ExtendedSystem,
    causal_map,
    classical_histories,
    fixture_coupled_particles,
    hamiltonian_vector_field,
    history_symbol,
    observable_pullback,
    observable_time_derivative,
    parametrize,
    quantum_histories,
)
from .symbols import Gauss, PhaseSpace, Symbol, parse_expression, text_form

__version__ = "0.1.0"

__all__ = [
    "Amplitude",
    "BracketOperator",
    "Connection",
    "DeltaFactor",
    "DeltaSymbol",
    "DeltaTerm",
    "Diffeomorphism",
    "ExtendedSystem",
    "Gauss",
    "GridAxis",
    "GridSpec",
    "GridState",
    "PhaseSpace",
    "StarChain",
    "Symbol",
    "SymplecticMatrix",
    "build_stargenfunction",
    "causal_map",
    "christoffel",
    "classical_histories",
    "covariant_derivative",
    "covariant_star_direct",
    "covariant_star_pullback",
    "delta_text_form",
    "evolve",
    "exp_shift_star_delta",
    "first_noncollapsing_power",
    "fixture_coupled_particles",
    "hamiltonian_vector_field",
    "history_symbol",
    "jacobian_symplectic",
    "liouville_rhs",
    "marginalize_degeneracy",
    "measure_factor",
    "moyal_bracket",
    "moyal_bracket_poly",
    "moyal_rhs",
    "normalize_check",
    "observable_pullback",
    "observable_stargenfunction",
    "observable_time_derivative",
    "parametrize",
    "parse_expression",
    "pfaffian",
    "poisson_poly",
    "probability",
    "quantum_histories",
    "sample",
    "schrodinger_stargen_chain",
    "star",
    "star_exp_classical_check",
    "star_exp_linear_left",
    "star_exp_series",
    "star_poly_left",
    "star_poly_right",
    "star_power",
    "step_rk4",
    "text_form",
    "verify_stargen",
    "wigner_of_amplitude",
]
