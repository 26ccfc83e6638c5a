import logging
from pathlib import Path

import yaml

from spinres.models.scenario import ScenarioConfig
from spinres.utils.constants import BUNDLED_SCENARIO_DIR

logger = logging.getLogger(__name__)


def bundled_scenarios() -> list[str]:
    return sorted(p.stem for p in BUNDLED_SCENARIO_DIR.glob("*.yaml"))


def resolve_scenario_path(path_or_name: str | Path) -> Path:
    """A path to an existing file, or the name of a bundled scenario

    :raises FileNotFoundError: neither exists
    """
    path = Path(path_or_name)
    if path.is_file():
        return path
    bundled = BUNDLED_SCENARIO_DIR / f"{path_or_name}.yaml"
    if path.suffix == "" and len(path.parts) == 1 and bundled.is_file():
        return bundled
    raise FileNotFoundError(
        f"{path_or_name} is neither a scenario file nor a bundled scenario "
        + f"({', '.join(bundled_scenarios())})"
    )


def load_scenario(path_or_name: str | Path) -> ScenarioConfig:
    """
    :raises FileNotFoundError: no such file or bundled name
    :raises yaml.YAMLError: not YAML
    :raises pydantic.ValidationError: schema violations, with the key location
    """
    path = resolve_scenario_path(path_or_name)
    with open(path, encoding="utf-8") as f:
        document = yaml.safe_load(f)
    logger.debug(f"loaded scenario from {path}")
    return ScenarioConfig.model_validate(document)
