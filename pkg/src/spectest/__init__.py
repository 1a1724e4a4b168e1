"""Specification tests for parametric regression with SVM-learned RKHS directions."""
from .baselines import VStatResult, gp_test, icm_test, kcm_test, run_baseline, v_statistic
from .errors import ConvergenceError, DegenerateDataError, SpecTestError
from .kernel import KernelSpec, eval_kernel, gram, median_heuristic
from .model import Dataset, FittedModel, ResidualBundle, fit_lasso, fit_ols, residuals
from .projection import Projector, build_projector, project, project_kernel_columns
from .simulation import DgpSpec, McConfig, McReport, gen_dgp, run_mc, time_profile
from .svm import Direction, ShiftedTrainingSet, SvmConfig, shift_values, train_nu_svc, train_ocsvm
from .testing import (
    BootstrapConfig,
    SplitPlan,
    TestResult,
    bootstrap_distribution,
    draw_multipliers,
    mean_projection,
    run_test,
    split,
    t_statistic,
)

__version__ = "0.1.0"
