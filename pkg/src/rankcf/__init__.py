from __future__ import annotations

from .control import ControlFunction as ControlFunction
from .control import QuantileFamily as QuantileFamily
from .control import build as build
from .control import empirical_ranks as empirical_ranks
from .control import quantile as quantile
from .dataset import Dataset as Dataset
from .dataset import Schema as Schema
from .dataset import parse_csv as parse_csv
from .dataset import write_csv as write_csv
from .dgp import DgpConfig as DgpConfig
from .dgp import generate as generate
from .dgp import true_asf as true_asf
from .estimator import ControlFunctionEstimator as ControlFunctionEstimator
from .exc import BandwidthError as BandwidthError
from .exc import CollinearityError as CollinearityError
from .exc import ConfigError as ConfigError
from .exc import CovarianceError as CovarianceError
from .exc import DataError as DataError
from .exc import DegenerateTrimError as DegenerateTrimError
from .exc import DomainError as DomainError
from .exc import NumericalError as NumericalError
from .exc import ParseError as ParseError
from .exc import RankCFError as RankCFError
from .exc import SchemaError as SchemaError
from .exc import ShapeError as ShapeError
from .exc import SingularDesignError as SingularDesignError
from .exc import UnreliableBootstrapError as UnreliableBootstrapError
from .exc import UnsupportedOperationError as UnsupportedOperationError
from .harness import ExperimentConfig as ExperimentConfig
from .harness import run_experiment as run_experiment
from .inference import CovarianceEstimate as CovarianceEstimate
from .inference import delta_method_asf as delta_method_asf
from .inference import exogeneity_test as exogeneity_test
from .inference import pairs_bootstrap as pairs_bootstrap
from .inference import t_statistics as t_statistics
from .liml import FitResult as FitResult
from .liml import NewtonOptions as NewtonOptions
from .liml import Theta as Theta
from .liml import asf_parametric as asf_parametric
from .liml import fit as fit
from .liml import profile_loglik_lambda as profile_loglik_lambda
from .links import LinkFamily as LinkFamily
from .links import LogitLink as LogitLink
from .links import ProbitLink as ProbitLink
from .report import emit_fit_report as emit_fit_report
from .semiparam import SemiparamSpec as SemiparamSpec
from .semiparam import asf_nonparam as asf_nonparam
from .semiparam import fit_semiparam as fit_semiparam
