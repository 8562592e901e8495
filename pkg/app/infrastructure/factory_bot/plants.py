import pytest

from app.config import Config
from app.domain.model.plant import PlantState
from app.domain.model.servo import ObjectName, ServoConfig
from app.domain.service import plant_sim
from app.domain.service.servo_service import ServoService
from app.infrastructure.factory_bot.scripts import demo_script
from app.pkgs.injector import Container


@pytest.fixture(scope="session")
def cable_plant() -> PlantState:
    return plant_sim.make_cable()


@pytest.fixture(scope="session")
def contour_plant() -> PlantState:
    return plant_sim.make_contour()


@pytest.fixture(scope="session")
def sheet_plant() -> PlantState:
    return plant_sim.make_sheet()


@pytest.fixture
def cable_config() -> ServoConfig:
    return ServoConfig.for_object(ObjectName.cable)


@pytest.fixture
def contour_config() -> ServoConfig:
    return ServoConfig.for_object(ObjectName.contour)


@pytest.fixture
def sheet_config() -> ServoConfig:
    return ServoConfig.for_object(ObjectName.sheet)


@pytest.fixture(scope="session")
def store_container(tmp_path_factory) -> Container:
    """Services wired in test mode, writing under a temporary output directory"""
    from app.cmd.center_store import build_container
    config = Config('test')
    config.OUTPUT_DIR = str(tmp_path_factory.mktemp('runs'))
    return build_container(config)


@pytest.fixture(scope="session")
def cable_target(store_container):
    servo_service = store_container.get_singleton(ServoService)
    cfg = ServoConfig.for_object(ObjectName.cable)
    return servo_service.record_target(cfg, demo_script(ObjectName.cable))
