"""Path spaces on a grid: Skorokhod metrics, shift-algebra observables,
delay/diffusion dynamics and Monte Carlo expectation semigroups."""

from .errors import (ConfigError, DimensionMismatch, EmptyInterval,
                     HorizonExceeded, KindMismatch, NonFiniteState,
                     NonGridShift, NonGridTime, NotInD0Domain,
                     NotPastDetermined, NotStopped, OutOfRange,
                     PastNotStopped, PathsDisagreeAtZero, PathspaceError,
                     WindowExcludesZero)
from .paths import (PastSegment, PathKind, SampledPath, concat, constant_path,
                    from_function, linear_path, paths_equal, step_path)
from .metrics import (MetricValue, SearchBudget, TimeChange, d_ab_j1, d_c,
                      d_j1, d_minus_j1, d_state, f_delta_bound, lip_cost,
                      modulus, step_representation)
from .observables import (BoundedPolynomial, Const, Coordinate, Cosine,
                          EvalNode, GaussianBump, IntegralNode, LeftLimNode,
                          Observable, Product, Scale, Sum, TestFunction,
                          UserFunction, UserObservable, Window, apply,
                          check_cocycle, d0_derivative, depends_only_on,
                          left_limit_average, shift_obs, validate_gradient)
from .dynamics import (BatchSegment, CheckReport, DelayEvolutionMap,
                       DiscreteDelayDrift, FixedJump, GaussianJump,
                       HistoryDiffusion, HistoryDrift, LevySpec,
                       PointwiseDiffusion, PointwiseDrift,
                       check_evolution_map, check_random_evolution_map,
                       constant_diffusion, evolution_map_dde, levy_delay_flow,
                       residual_sup, sample_levy, simulate_sde, simulate_sdde,
                       solve_dde, validate_lipschitz, validate_nondegenerate)
from .semigroup import (DelayKind, DeterministicKind, ExpectationSpec, F_0star,
                        LawReport, LevyFlowKind, MarkovKind, MCConfig,
                        MCEstimate, Semigroup, check_expectation_axioms,
                        check_finite_delay_invariance, check_homogeneity,
                        check_markov_reduction, check_multiplicativity,
                        check_semigroup_law, conditional_expectation,
                        ensemble_values, expectation, generator_probe,
                        induced_state_semigroup, richardson_extrapolate,
                        semigroup_apply, simplex_generator_check)
from .rng import make_stream

__version__ = "0.1.0"
