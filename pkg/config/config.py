import os
from typing import Dict, Any
from dotenv import load_dotenv

load_dotenv()


class Config:
    """Runtime configuration for the beable simulator."""

    VERSION: str = "1.0.0"

    # Logging / output
    LOG_LEVEL: str = os.getenv('LOG_LEVEL', 'INFO')
    LOG_DIR: str = os.getenv('LOG_DIR', 'logs')
    OUTPUT_DIR: str = os.getenv('OUTPUT_DIR', 'out')

    # Monte Carlo defaults
    DEFAULT_SEED: int = int(os.getenv('DEFAULT_SEED', '20160801'))
    DEFAULT_TRIALS: int = int(os.getenv('DEFAULT_TRIALS', '1000'))
    WORKERS: int = int(os.getenv('WORKERS', '1'))  # >1 fans trials out over processes

    # Beable time grid and transition histogram
    GRID_POINTS: int = int(os.getenv('GRID_POINTS', '512'))
    GRID_SPAN_LIFETIMES: float = float(os.getenv('GRID_SPAN_LIFETIMES', '10'))
    HISTOGRAM_BINS: int = int(os.getenv('HISTOGRAM_BINS', '64'))
    HISTOGRAM_SPAN_LIFETIMES: float = float(os.getenv('HISTOGRAM_SPAN_LIFETIMES', '8'))

    # Numerics
    EPS_CONE_FACTOR: float = float(os.getenv('EPS_CONE_FACTOR', '1e-9'))  # eps_cone = factor * c * T
    QUAD_EPSABS: float = float(os.getenv('QUAD_EPSABS', '1e-8'))
    QUAD_EPSREL: float = float(os.getenv('QUAD_EPSREL', '1e-6'))
    QUAD_LIMIT: int = int(os.getenv('QUAD_LIMIT', '200'))
    ANGULAR_NODES: int = int(os.getenv('ANGULAR_NODES', '64'))
    AZIMUTH_NODES: int = int(os.getenv('AZIMUTH_NODES', '32'))
    NEWTON_TOLERANCE: float = 1e-12

    # Statistics
    KS_ALPHA: float = 0.01
    KS_CRITICAL_COEFFICIENT: float = 1.63  # asymptotic D_crit * sqrt(N) at alpha = 0.01
    CI_SIGMAS: float = 3.0

    # Regime thresholds (warnings only)
    NARROW_LINE_RATIO: float = 1e-2   # gamma / omega below this is the narrow-line regime
    WELL_SEPARATED_WAVELENGTHS: float = 10.0
    SHELL_LIFETIME_FACTOR: float = 10.0

    @classmethod
    def validate(cls) -> bool:
        """Validate configuration parameters."""
        if cls.GRID_POINTS < 2:
            print("❌ ERROR: GRID_POINTS must be at least 2")
            return False

        if cls.HISTOGRAM_BINS < 1:
            print("❌ ERROR: HISTOGRAM_BINS must be positive")
            return False

        if cls.EPS_CONE_FACTOR <= 0 or cls.QUAD_EPSABS <= 0 or cls.QUAD_EPSREL <= 0:
            print("❌ ERROR: tolerances must be greater than 0")
            return False

        if cls.WORKERS < 1:
            print("❌ ERROR: WORKERS must be at least 1")
            return False

        return True

    @classmethod
    def to_dict(cls) -> Dict[str, Any]:
        """Convert configuration to dictionary."""
        return {
            'version': cls.VERSION,
            'log_level': cls.LOG_LEVEL,
            'output_dir': cls.OUTPUT_DIR,
            'default_seed': cls.DEFAULT_SEED,
            'default_trials': cls.DEFAULT_TRIALS,
            'workers': cls.WORKERS,
            'grid_points': cls.GRID_POINTS,
            'histogram_bins': cls.HISTOGRAM_BINS,
            'eps_cone_factor': cls.EPS_CONE_FACTOR,
            'quad_epsabs': cls.QUAD_EPSABS,
            'quad_epsrel': cls.QUAD_EPSREL,
            'angular_nodes': cls.ANGULAR_NODES,
            'azimuth_nodes': cls.AZIMUTH_NODES,
        }
