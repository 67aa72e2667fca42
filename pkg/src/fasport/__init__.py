"""Fluid-antenna port selection: channels, SINR balancing, heuristics, evolution."""

from .balancing import BeamformingSolution, EffectiveChannel, Evaluator, balance
from .channel import (ArrayConfig, ChannelBatch, CorrelationModel, ScenarioConfig,
                      build_correlation, correlation, generate_batch, map_port,
                      path_loss_db, port_distance)
from .eoh import (EvolutionConfig, FitnessReport, HeuristicCandidate, build_prompt,
                  evaluate_candidate, evolve, manage, parse_response, rank_select)
from .errors import (ConfigError, ConvergenceError, FasportError, NumericError,
                     ParseError, ProviderError, RefusalError, SandboxError)
from .fchan import read_fchan, write_fchan
from .heuristics import (GaConfig, GraspConfig, PortSelection, autoport,
                         crossover_basic, crossover_frequency, exhaustive_search,
                         mutation_basic, mutation_swap_noise, random_selection,
                         repair, run_ga)
from .providers import FixtureProvider, HttpProvider, MockProvider, native_response
from .sandbox import SandboxRunner

__version__ = "0.1.0"
