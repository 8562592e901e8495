# path all pytest.fixture here
from app.infrastructure.factory_bot.setup_test import setup_before_tests
from app.infrastructure.factory_bot.plants import (cable_config, cable_plant, cable_target, contour_config,
                                                   contour_plant, sheet_config, sheet_plant, store_container)
