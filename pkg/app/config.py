import json
import os

from dotenv import load_dotenv

load_dotenv()


def read_config(file_name: str = "config.json") -> dict:
    with open(file_name, 'r') as json_file:
        cfg = json.load(json_file)
    return cfg


development_key = 'dev'
production_key = 'prod'
project_dir = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))


class Config(object):
    """Base config, used when nothing else is asked for."""
    DEBUG = False
    TESTING = False
    LOG_FOLDER = './logs'
    LOG_LEVEL = 'INFO'
    LOG_TO_CONSOLE = False
    OUTPUT_DIR = './runs'
    DEFAULT_CONFIG_FILE = f'{project_dir}/config.json'
    STEP_BUDGET_MS = 100.0  # 10 Hz servo loop

    def __init__(self, mode: str = 'default'):
        mode = mode.lower()
        if mode == 'production':
            self.LOG_FOLDER = os.environ.get('log-folder', './logs')
            self.OUTPUT_DIR = os.environ.get('output-dir', './runs')
            self.LOG_TO_CONSOLE = True
        elif mode == 'develop':
            self.DEBUG = True
            self.LOG_LEVEL = 'DEBUG'
            self.LOG_TO_CONSOLE = True
        elif mode == 'test':
            self.DEBUG = True
            self.TESTING = True
            self.LOG_FOLDER = os.environ.get('log-folder', './logs/test')
            self.OUTPUT_DIR = os.environ.get('output-dir', './runs/test')


if 'MODE' in os.environ:
    env = os.environ['MODE']
else:
    env = 'develop'

cli_config: Config = Config(env)
