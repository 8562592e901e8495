import logging
import os
import pathlib
from logging.handlers import TimedRotatingFileHandler


# ----------------------------------------------------------------------

def resolve_log_path(path='./logs', is_absolute_path=False) -> str:
    """Make the log folder if it does not exist and return its absolute path (relative paths start at the cwd)"""
    log_path = path if is_absolute_path else os.path.abspath(path)
    pathlib.Path(log_path).mkdir(parents=True, exist_ok=True)
    return log_path


def create_timed_rotating_log(path='./logs', is_absolute_path=False, logger_name="shape_servo",
                              file_log='servo.log', level=logging.INFO, to_console=False,
                              log_format="%(asctime)s - %(levelname)s - %(name)s - %(message)s"):
    """Init logging
    Arguments:
        path {string} -- path to log directory, relative to the working directory unless is_absolute_path
        logger_name {string} -- name handed to logging.getLogger
        to_console {bool} -- also echo records to stderr (used by the CLI)
    Returns:
        logger -- logger class. Use as logger.info('message')
    """
    log_path = resolve_log_path(path, is_absolute_path)
    log_file = os.path.join(log_path, file_log)
    logger = logging.getLogger(logger_name)
    logger.setLevel(level)
    formatter = logging.Formatter(log_format)

    # one rotating handler per file, building a second container must not double the lines
    if not any(isinstance(h, TimedRotatingFileHandler) and h.baseFilename == log_file for h in logger.handlers):
        handler = TimedRotatingFileHandler(log_file, when="d", interval=1, backupCount=5)
        handler.setFormatter(formatter)
        logger.addHandler(handler)

    if to_console and not any(type(h) is logging.StreamHandler for h in logger.handlers):
        console = logging.StreamHandler()
        console.setFormatter(formatter)
        logger.addHandler(console)
    return logger
