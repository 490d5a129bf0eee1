"""
Configuration Loader for the weighted geometry verification toolkit
Reads numerical defaults from config.ini
"""
import configparser
import os
from functools import lru_cache
from pathlib import Path

DEFAULT_CONFIG_FILE = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'config.ini')


class AppConfig:
    """Application configuration manager"""

    def __init__(self, config_file=DEFAULT_CONFIG_FILE):
        """Initialize configuration from INI file"""
        self.config = configparser.ConfigParser()
        self.config_file = config_file

        # Check if config file exists
        if not os.path.exists(config_file):
            raise FileNotFoundError(f"Configuration file '{config_file}' not found!")

        self.config.read(config_file, encoding='utf-8')

        # Application settings
        self.APP_TITLE = self.config.get('Application', 'app_title', fallback='Weighted Metric Measure Space Verifier')
        self.VERSION = self.config.get('Application', 'version', fallback='1.0.0')
        self.ENVIRONMENT = self.config.get('Application', 'environment', fallback='Production')

        # Finite-difference policy
        self.FD_STEP = self.config.getfloat('Numerics', 'fd_step', fallback=1e-5)
        self.FD_SECOND_STEP = self.config.getfloat('Numerics', 'fd_second_step', fallback=1e-2)
        self.RICHARDSON = self.config.getboolean('Numerics', 'richardson', fallback=True)
        self.T_STEP = self.config.getfloat('Numerics', 't_step', fallback=1e-4)

        # Tolerances
        self.TOL_IDENTITY = self.config.getfloat('Tolerances', 'identity', fallback=1e-6)
        self.TOL_FD_IDENTITY = self.config.getfloat('Tolerances', 'fd_identity', fallback=1e-4)
        self.TOL_KERNEL_ANALYTIC = self.config.getfloat('Tolerances', 'kernel_analytic', fallback=1e-6)
        self.TOL_KERNEL_FD = self.config.getfloat('Tolerances', 'kernel_fd', fallback=1e-3)
        self.TOL_BOUNDARY = self.config.getfloat('Tolerances', 'boundary', fallback=1e-6)
        self.TOL_DUALITY = self.config.getfloat('Tolerances', 'duality', fallback=1e-6)
        self.TOL_HYPOTHESIS = self.config.getfloat('Tolerances', 'hypothesis', fallback=1e-6)
        self.SIGMA_THRESHOLD = self.config.getfloat('Tolerances', 'sigma_threshold', fallback=1e-8)
        self.GRAM_CONDITION = self.config.getfloat('Tolerances', 'gram_condition', fallback=1e12)

        # Quadrature
        self.NODES = self.config.getint('Quadrature', 'nodes', fallback=16)
        self.BOUNDARY_NODES = self.config.getint('Quadrature', 'boundary_nodes', fallback=32)
        self.TRUNCATION = self.config.getfloat('Quadrature', 'truncation', fallback=6.0)
        self.POLE_BAND = self.config.getfloat('Quadrature', 'pole_band', fallback=0.05)

        # Output
        self.OUTPUT_FORMAT = self.config.get('Output', 'format', fallback='json')
        self.LEDGER_PATH = self.config.get('Output', 'ledger_path', fallback='')

        self._create_directories()

    def _create_directories(self):
        """Create the ledger directory if a ledger is configured"""
        if self.LEDGER_PATH:
            directory = os.path.dirname(self.LEDGER_PATH)
            if directory:
                Path(directory).mkdir(parents=True, exist_ok=True)

    def step_policy(self):
        """Finite-difference policy built from the [Numerics] section"""
        from finite_differences import StepPolicy
        return StepPolicy(step=self.FD_STEP, second_step=self.FD_SECOND_STEP, richardson=self.RICHARDSON)

    def get_info_dict(self):
        """Get configuration information as a dictionary for display"""
        return {
            'Application': {
                'Title': self.APP_TITLE,
                'Version': self.VERSION,
                'Environment': self.ENVIRONMENT
            },
            'Numerics': {
                'FD Step': self.FD_STEP,
                'FD Second Step': self.FD_SECOND_STEP,
                'Richardson': self.RICHARDSON,
                'Variation Step': self.T_STEP
            },
            'Tolerances': {
                'Identity': self.TOL_IDENTITY,
                'FD Identity': self.TOL_FD_IDENTITY,
                'Kernel (analytic)': self.TOL_KERNEL_ANALYTIC,
                'Kernel (FD)': self.TOL_KERNEL_FD,
                'Boundary': self.TOL_BOUNDARY,
                'Duality': self.TOL_DUALITY,
                'Hypothesis': self.TOL_HYPOTHESIS,
                'Sigma Threshold': self.SIGMA_THRESHOLD,
                'Gram Condition': self.GRAM_CONDITION
            },
            'Quadrature': {
                'Nodes': self.NODES,
                'Boundary Nodes': self.BOUNDARY_NODES,
                'Truncation': self.TRUNCATION,
                'Pole Band': self.POLE_BAND
            }
        }


@lru_cache(maxsize=None)
def get_config(config_file=DEFAULT_CONFIG_FILE):
    """Get the global configuration instance (cached)"""
    return AppConfig(config_file)


def reload_config():
    """Reload configuration from file"""
    # Clear the cache to force reload
    get_config.cache_clear()
    return get_config()
