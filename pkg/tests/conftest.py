"""Shared fixtures; heavy artifacts are session-scoped so the acceptance
suite and module tests reuse one build."""
import numpy as np
import pytest

from dampwave.estimates import (
    EstimationProblem,
    check_exp_I_class,
    check_I_derivative_bounds,
    check_z_uniform_bounds,
)
from dampwave.parametrix import build_parametrix, parametrix_apply
from dampwave.quantize import Grid, dealias_two_thirds, wave_packet
from dampwave.solver import IVPProblem, evolve
from dampwave.symbols import (
    AssumptionParams,
    SampleSpec,
    build_cutoff_b,
    hyperbolic_a,
    multiplier_b,
    shipped_cutoff_family,
)

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def record_acceptance(n, passed, detail):
    line = f"ACCEPTANCE {n:2d}: {'PASS' if passed else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line, flush=True)


@pytest.fixture(scope="session")
def shipped_family():
    return shipped_cutoff_family()


@pytest.fixture(scope="session")
def cutoff_b(shipped_family):
    return build_cutoff_b(shipped_family)


@pytest.fixture(scope="session")
def b_multiplier():
    return multiplier_b(0.5, 1.0)


@pytest.fixture(scope="session")
def a_shipped():
    return hyperbolic_a(0.7, 0.1)


@pytest.fixture(scope="session")
def params_unit():
    return AssumptionParams(gamma=1.0, L=4, Z=1.0, z0=0.0)


@pytest.fixture(scope="session")
def params_verify():
    return AssumptionParams(gamma=1.0, L=4, Z=8.0, z0=0.0)


@pytest.fixture(scope="session")
def grid64():
    return Grid(64)


@pytest.fixture(scope="session")
def grid128():
    return Grid(128)


@pytest.fixture(scope="session")
def grid256():
    return Grid(256)


@pytest.fixture(scope="session")
def boundary_x(shipped_family):
    return float(shipped_family.rho_inverse(0.0))


@pytest.fixture(scope="session")
def verify_problem(cutoff_b, params_verify):
    return EstimationProblem(cutoff_b, params_verify)


@pytest.fixture(scope="session")
def exp_class_report(verify_problem):
    return check_exp_I_class(verify_problem)


@pytest.fixture(scope="session")
def i_bound_reports(verify_problem):
    spec = SampleSpec()
    return (check_I_derivative_bounds(verify_problem, sample_spec=spec),
            check_I_derivative_bounds(verify_problem, sample_spec=spec.refined(4)))


@pytest.fixture(scope="session")
def z_uniform_reports(verify_problem):
    spec = SampleSpec()
    return (check_z_uniform_bounds(verify_problem, sample_spec=spec),
            check_z_uniform_bounds(verify_problem, sample_spec=spec.refined(4)))


@pytest.fixture(scope="session")
def jslope_data(cutoff_b, params_unit, grid256, boundary_x):
    """Relative errors of the damping parametrix against the direct solver
    on boundary-centered packets; reused by module and acceptance tests."""
    prob = IVPProblem(b_model=cutoff_b, params=params_unit, grid=grid256, dz=1e-3)
    builders = {J: build_parametrix(prob, J=J, quad_dz=1e-2) for J in (0, 1, 2)}
    bands = [8, 16, 32, 64]
    errs = {J: [] for J in builders}
    residuals = {}
    for K in bands:
        u = dealias_two_thirds(wave_packet(grid256, K, boundary_x))
        ud = evolve(prob, u, 1.0).fields[-1]
        nd = np.linalg.norm(ud.values)
        for J, ps in builders.items():
            v = parametrix_apply(ps, prob, u, 1.0)
            errs[J].append(float(np.linalg.norm(v.values - ud.values) / nd))
    return {"bands": bands, "errors": errs, "problem": prob, "builders": builders}
