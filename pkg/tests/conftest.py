import pytest

from spinres.dataio.scenario_loader import load_scenario
from spinres.fit.pipeline import AnalysisResult, analyze_sweep
from spinres.models.scenario import ScenarioConfig
from spinres.models.sweep import FieldSweep
from spinres.simulate import simulate_sweep


@pytest.fixture(scope="session")
def two_crossings_scenario() -> ScenarioConfig:
    return load_scenario("two_crossings")


@pytest.fixture(scope="session")
def two_crossings_sweep(two_crossings_scenario: ScenarioConfig) -> FieldSweep:
    return simulate_sweep(two_crossings_scenario.to_sweep_config())


@pytest.fixture(scope="session")
def two_crossings_analysis(
    two_crossings_sweep: FieldSweep, two_crossings_scenario: ScenarioConfig
) -> AnalysisResult:
    return analyze_sweep(two_crossings_sweep, two_crossings_scenario)


@pytest.fixture(scope="session")
def three_crossings_scenario() -> ScenarioConfig:
    return load_scenario("three_crossings")


@pytest.fixture(scope="session")
def three_crossings_analysis(three_crossings_scenario: ScenarioConfig) -> AnalysisResult:
    sweep = simulate_sweep(three_crossings_scenario.to_sweep_config())
    return analyze_sweep(sweep, three_crossings_scenario)
