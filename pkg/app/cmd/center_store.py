from logging import Logger

from app.config import Config
from app.domain.service.benchmark_service import BenchmarkService
from app.domain.service.servo_service import ServoService
from app.infrastructure.persistence.corpus import CorpusRepository
from app.infrastructure.persistence.dataset import DatasetRepository
from app.infrastructure.persistence.file_store import FileStore
from app.infrastructure.persistence.report import ReportRepository
from app.infrastructure.persistence.target import TargetRepository
from app.pkgs.injector import Container
from app.pkgs.logger import create_timed_rotating_log


def build_container(config: Config) -> Container:
    container = Container()
    container.add_instance(config)
    logger: Logger = create_timed_rotating_log(path=config.LOG_FOLDER, level=config.LOG_LEVEL,
                                               to_console=config.LOG_TO_CONSOLE)
    container.add_instance(logger)

    # all container should be placed here
    container.add_singleton(FileStore)
    container.add_singleton(CorpusRepository)
    container.add_singleton(DatasetRepository)
    container.add_singleton(TargetRepository)
    container.add_singleton(ReportRepository)
    container.add_singleton(ServoService)
    container.add_singleton(BenchmarkService)
    container.build()
    return container
