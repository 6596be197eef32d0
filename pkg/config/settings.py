"""
Configuration settings for the free-boundary solvers.
"""
import os
from dataclasses import dataclass
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()


@dataclass
class DppConfig:
    """
    Value-iteration defaults.

    log_every is the number of sweeps between progress lines.
    """
    tol: float = 1e-9
    max_iter: int = 1_000_000
    sweep: str = 'jacobi'
    log_every: int = 10_000


@dataclass
class PlapConfig:
    """
    p-Laplacian minimizer defaults.

    tol_grad is in PDE-residual units (energy gradient / h^N). The L-BFGS-B
    line search stalls once energy decreases fall below double-precision
    resolution of J, which leaves residuals near 1e-5 to 1e-4 on h = 1/64
    lattices; tol_grad must sit above that floor. max_restarts bounds the
    extra polish passes run while the residual is above tol_grad.
    """
    tol_grad: float = 1e-3
    max_iter: int = 50_000
    memory: int = 20
    max_polish_rounds: int = 25
    max_restarts: int = 3
    p_max: float = 128.0


@dataclass
class GameConfig:
    """Monte-Carlo game defaults."""
    max_steps: int = 1_000_000
    coin_block: int = 1024


@dataclass
class AnalysisConfig:
    """Free-boundary analysis defaults."""
    tol_pos_scale: float = 1e-8
    distance_chunk: int = 4096


@dataclass
class RuntimeConfig:
    """Process-level runtime configuration."""
    output_dir: str = os.getenv('OUTPUT', 'output')
    workers: int = 1
    log_file: str = 'freeboundary.log'


@dataclass
class Settings:
    """Application settings container."""
    dpp: DppConfig = None
    plap: PlapConfig = None
    game: GameConfig = None
    analysis: AnalysisConfig = None
    runtime: RuntimeConfig = None
    log_level: str = os.getenv('LOG_LEVEL', 'INFO')
    log_format: str = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

    def __post_init__(self):
        """Initialize config objects if not provided."""
        if self.dpp is None:
            self.dpp = DppConfig()
        if self.plap is None:
            self.plap = PlapConfig()
        if self.game is None:
            self.game = GameConfig()
        if self.analysis is None:
            self.analysis = AnalysisConfig()
        if self.runtime is None:
            self.runtime = RuntimeConfig()


# Global settings instance
settings = Settings()
