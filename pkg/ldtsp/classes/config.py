"""
Class for general configurations
"""

import logging
import os
from pathlib import Path
import sys

# Project root added to the sys.path, so that scripts can be run unpackaged as well as packaged.
sys.path.append(str(Path(__file__).resolve().parent.parent))

# Local libraries


class Config:
    """
    Configuration object, to share parameters across functions.
    Primarily for logging and for standardizing output locations across
    the solver, oracle and CLI layers.
    """

    def __init__(
        self,
        debug=False,
        log=None,
        verbose=False,
        output_dir="./output/",
    ):
        """
        Inputs:
         - debug (bool): Whether to set log.log at DEBUG level (default is INFO)
         - log (str or None): Relative or absolute path to directory for saving
            log files. None keeps logging in memory/terminal only.
         - verbose (bool): Whether to output to terminal (at INFO level)
         - output_dir (str): Default directory for CSV, SVG and model exports.

        Returns:
         - ldtsp.Config
        """

        self.debug = debug
        self.log = log
        self.verbose = verbose
        self.output_dir = output_dir
        self.logger = self._setup_logging()

    def _setup_logging(self):
        """
        Sets up: log.log, error.log, terminal stream.
        """

        # Clean attributes
        if self.log is not None and self.log.endswith("/") is False:
            self.log = self.log + "/"

        logger = logging.getLogger("ldtsp")

        # Skip set up if already set up
        if logger.handlers:
            return logger

        # Basic logger configurations
        if self.debug is True:
            logger.setLevel(logging.DEBUG)
        else:
            logger.setLevel(logging.INFO)
        logger.propagate = True
        formatter = logging.Formatter("%(asctime)s - %(levelname)s: %(message)s")

        if self.log is not None:
            # Create log dir, if it doesn't exist
            if not os.path.exists(self.log):
                os.makedirs(self.log)

            # File handler: log.log
            lh = logging.FileHandler(f"{self.log}log.log", "a")
            lh.setLevel(logger.level)
            lh.setFormatter(formatter)
            logger.addHandler(lh)

            # File handler: error.log
            eh = logging.FileHandler(f"{self.log}error.log", "a")
            eh.setLevel(logging.WARNING)
            eh.setFormatter(formatter)
            logger.addHandler(eh)

        # Stream handler: terminal
        sh = logging.StreamHandler()
        if self.verbose is True:
            sh.setLevel(logger.level)
        else:
            sh.setLevel(logging.WARNING)
        sh.setFormatter(formatter)
        logger.addHandler(sh)

        return logger
