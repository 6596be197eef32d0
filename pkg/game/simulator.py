"""
Monte-Carlo play of the Pay-or-Leave Tug-of-War on a lattice.

At each step Player II either passes the turn (Player I then quits, ending
the game with payoff 0, or pays eps and moves) or plays Tug-of-War (a fair
coin picks who moves). The game ends when the token reaches the strip,
paying F there minus eps per bought turn.
"""
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from config.settings import settings
from game.rng import CoinStream
from game.strategy import DecisionTable, create_players
from lattice.domain import GridDomain
from lattice.fields import ScalarField
from models.dto import AuditClass, AuditReport, EpisodeRecord, EstimateReport
from models.exceptions import ConfigurationError, ContractViolation, EstimationFailure
from models.schema import GameBlock

logger = logging.getLogger(__name__)

# Episodes per lockstep block handed to a worker.
EPISODE_BLOCK = 4096


@dataclass(frozen=True, eq=False)
class GameConfig:
    """One game setup: grid, terminal payoff F (read on the strip), start node and budgets."""
    grid: GridDomain
    payoff: ScalarField
    episodes: int
    seed: int
    start_node: int
    max_steps: int = settings.game.max_steps
    strategy: str = 'greedy'
    include_truncated: bool = False

    def __post_init__(self):
        if self.payoff.grid is not self.grid:
            raise ContractViolation("payoff field does not live on the game grid")
        if self.episodes < 1:
            raise ConfigurationError(f"episodes must be >= 1, got {self.episodes}", key='episodes')
        if self.max_steps < 1:
            raise ConfigurationError(f"max_steps must be >= 1, got {self.max_steps}", key='max_steps')
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigurationError(f"seed {self.seed} is not a 64-bit unsigned integer", key='seed')
        if not 0 <= self.start_node < self.grid.node_count or not self.grid.is_interior[self.start_node]:
            raise ConfigurationError(f"start node {self.start_node} is not interior", key='start')

    @classmethod
    def from_block(cls, grid: GridDomain, payoff: ScalarField, block: GameBlock,
                   seed: Optional[int] = None) -> 'GameConfig':
        """Build from a validated `game` block; `seed` overrides the block's seed."""
        try:
            start = grid.node_at(block.start)
        except ContractViolation as e:
            raise ConfigurationError(str(e), key='game.start') from e
        return cls(
            grid=grid,
            payoff=payoff,
            episodes=block.episodes,
            seed=block.seed if seed is None else seed,
            start_node=start,
            max_steps=block.max_steps,
            strategy=block.strategy,
            include_truncated=block.include_truncated,
        )


def _check_value_field(config: GameConfig, value_field: ScalarField) -> None:
    if value_field.grid is not config.grid:
        raise ContractViolation("value field does not live on the game grid")


def _play(config: GameConfig, value_field: ScalarField, seed: int, episode: int,
          players, coins: Optional[CoinStream] = None) -> EpisodeRecord:
    grid = config.grid
    one, two = players
    one.reset(episode)
    two.reset(episode)
    coins = coins or CoinStream(seed, episode)
    eps = grid.epsilon
    payoff_values = config.payoff.values

    positions = [config.start_node]
    coin_flips: List[int] = []
    theta2: List[int] = []
    theta1: List[int] = []
    bought = 0
    terminal, final = 'truncated', 0.0
    for _ in range(config.max_steps):
        if two.passes(positions):
            theta2.append(1)
            if one.quits(positions):
                theta1.append(1)
                terminal = 'quit'
                break
            theta1.append(0)
            bought += 1
            nxt = one.move(positions)
        else:
            theta2.append(0)
            theta1.append(0)
            coin = coins.next()
            coin_flips.append(coin)
            nxt = one.move(positions) if coin else two.move(positions)
        positions.append(int(nxt))
        if not grid.is_interior[nxt]:
            terminal, final = 'strip', float(payoff_values[nxt])
            break

    return EpisodeRecord(
        positions=positions,
        coin_flips=coin_flips,
        theta2=theta2,
        theta1=theta1,
        bought_turns=bought,
        payoff=final - eps * bought,
        terminal=terminal,
        episode=episode,
    )


def run_episode(config: GameConfig, value_field: ScalarField, seed: Optional[int] = None,
                episode: int = 0, players=None) -> EpisodeRecord:
    """
    Play one game with the configured strategy.

    Args:
        config: Game setup.
        value_field: Converged PayOrLeave solution on the same grid.
        seed: Stream seed (defaults to config.seed).
        episode: Episode index selecting the substream.
        players: Optional prebuilt (Player I, Player II) pair.

    Returns:
        EpisodeRecord; a game still running after max_steps is marked
        'truncated' with payoff -eps * bought_turns.
    """
    _check_value_field(config, value_field)
    seed = config.seed if seed is None else seed
    players = players or create_players(config.strategy, value_field, seed)
    record = _play(config, value_field, seed, episode, players)
    if record.truncated:
        logger.warning(f"episode {episode} truncated after {config.max_steps} steps")
    return record


def simulate(config: GameConfig, value_field: ScalarField,
             episodes: Optional[Iterable[int]] = None) -> List[EpisodeRecord]:
    """Full records for a range of episodes (all of them by default), in episode order."""
    _check_value_field(config, value_field)
    indices = list(range(config.episodes) if episodes is None else episodes)
    blocks = [indices[i:i + EPISODE_BLOCK] for i in range(0, len(indices), EPISODE_BLOCK)]

    def work(block: List[int]) -> List[EpisodeRecord]:
        players = create_players(config.strategy, value_field, config.seed)
        return [_play(config, value_field, config.seed, e, players) for e in block]

    with ThreadPoolExecutor(max_workers=max(1, settings.runtime.workers)) as pool:
        records = [r for chunk in pool.map(work, blocks) for r in chunk]
    truncated = sum(r.truncated for r in records)
    if truncated:
        logger.warning(f"{truncated} of {len(records)} episodes truncated at {config.max_steps} steps")
    return records


def _lockstep(config: GameConfig, table: DecisionTable,
              episodes: Sequence[int]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Greedy play of many episodes at once.

    Returns (payoffs, truncated flags) matching `_play` with greedy players
    bit for bit: each episode consumes its own coin stream, one coin per
    Tug-of-War step.
    """
    grid = config.grid
    eps = grid.epsilon
    n = len(episodes)
    streams = [CoinStream(config.seed, int(e)) for e in episodes]
    block = streams[0].block
    coins = np.zeros((n, block), dtype=np.uint8)
    cursor = np.full(n, block)

    pos = np.full(n, config.start_node, dtype=np.int64)
    bought = np.zeros(n, dtype=np.int64)
    final = np.zeros(n)
    done = np.zeros(n, dtype=bool)
    active = np.arange(n)
    payoff_values = config.payoff.values

    for _ in range(config.max_steps):
        if not len(active):
            break
        rows = grid.interior_row[pos[active]]
        passed = table.passes[rows]
        quit_now = passed & table.quits[rows]
        buying = passed & ~quit_now
        tug = ~passed

        bought[active[buying]] += 1
        nxt = table.argmax[rows].copy()

        tuggers = active[tug]
        empty = tuggers[cursor[tuggers] >= block]
        for i in empty:
            coins[i] = streams[i].take_block()
            cursor[i] = 0
        flips = coins[tuggers, cursor[tuggers]]
        cursor[tuggers] += 1
        tug_rows = rows[tug]
        nxt[tug] = np.where(flips == 1, table.argmax[tug_rows], table.argmin[tug_rows])

        moving = ~quit_now
        movers = active[moving]
        pos[movers] = nxt[moving]
        done[active[quit_now]] = True

        arrived = movers[~grid.is_interior[pos[movers]]]
        final[arrived] = payoff_values[pos[arrived]]
        done[arrived] = True
        active = active[~done[active]]

    truncated = np.zeros(n, dtype=bool)
    truncated[active] = True
    return final - eps * bought, truncated


def episode_payoffs(config: GameConfig, value_field: ScalarField) -> Tuple[np.ndarray, np.ndarray]:
    """(payoff, truncated) for every episode, in episode order."""
    _check_value_field(config, value_field)
    indices = list(range(config.episodes))
    blocks = [indices[i:i + EPISODE_BLOCK] for i in range(0, len(indices), EPISODE_BLOCK)]

    if config.strategy == 'greedy':
        table = DecisionTable.from_field(value_field)

        def work(block):
            return _lockstep(config, table, block)
    else:
        def work(block):
            players = create_players(config.strategy, value_field, config.seed)
            records = [_play(config, value_field, config.seed, e, players) for e in block]
            return (np.array([r.payoff for r in records]),
                    np.array([r.truncated for r in records], dtype=bool))

    with ThreadPoolExecutor(max_workers=max(1, settings.runtime.workers)) as pool:
        parts = list(pool.map(work, blocks))
    return np.concatenate([p for p, _ in parts]), np.concatenate([t for _, t in parts])


def estimate_value(config: GameConfig, value_field: ScalarField) -> EstimateReport:
    """
    Sample mean and standard error of the episode payoffs.

    Truncated episodes are excluded unless config.include_truncated.
    Episode i always draws from substream (config.seed, i), so the estimate
    does not depend on the worker count.

    Raises:
        EstimationFailure: every episode was truncated.
    """
    start = time.perf_counter()
    payoffs, truncated = episode_payoffs(config, value_field)
    n_truncated = int(truncated.sum())
    sample = payoffs if config.include_truncated else payoffs[~truncated]
    if sample.size == 0:
        raise EstimationFailure(
            f"all {config.episodes} episodes hit max_steps={config.max_steps}",
            report={'episodes': config.episodes, 'truncated': n_truncated,
                    'max_steps': config.max_steps},
        )
    if n_truncated:
        logger.warning(f"{n_truncated} of {config.episodes} episodes truncated")
    mean = math.fsum(sample.tolist()) / sample.size
    stderr = float(np.std(sample, ddof=1) / math.sqrt(sample.size)) if sample.size > 1 else 0.0
    if config.episodes < 100:
        logger.warning(f"only {config.episodes} episodes; the standard error is unreliable")
    report = EstimateReport(mean=mean, stderr=stderr, episodes=int(sample.size), truncated=n_truncated)
    logger.info(f"{report} in {time.perf_counter() - start:.2f}s")
    return report


AUDIT_CLASSES = ('tug', 'buy', 'quit')


def martingale_audit(records: Iterable[EpisodeRecord], value_field: ScalarField,
                     atol: Optional[float] = None) -> AuditReport:
    """
    One-step increments of the value process per decision class.

    The increment of step k is u(x_{k+1}) - eps*[turn bought] - u(x_k); a quit
    ends the game at payoff 0, so its increment is -u(x_k). Classes are
    Player II's decision: 'tug', 'buy' (passed, Player I paid) and 'quit'
    (passed, Player I left). A class is flagged when its mean increment
    exceeds 3 standard errors plus `atol` (default the DPP tolerance).
    Truncated episodes are skipped.
    """
    grid = value_field.grid
    u = value_field.values
    eps = grid.epsilon
    atol = settings.dpp.tol if atol is None else atol
    samples: Dict[str, List[float]] = {name: [] for name in AUDIT_CLASSES}
    for record in records:
        if record.truncated:
            continue
        for k, (t2, t1) in enumerate(zip(record.theta2, record.theta1)):
            here = u[record.positions[k]]
            if t2 and t1:
                samples['quit'].append(0.0 - here)
            elif t2:
                samples['buy'].append(u[record.positions[k + 1]] - eps - here)
            else:
                samples['tug'].append(u[record.positions[k + 1]] - here)

    classes: Dict[str, AuditClass] = {}
    everything: List[float] = []
    for name, values in samples.items():
        if not values:
            continue
        arr = np.asarray(values)
        mean = math.fsum(values) / len(values)
        stderr = float(np.std(arr, ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else 0.0
        flagged = mean > 3.0 * stderr + atol
        classes[name] = AuditClass(steps=len(values), mean_increment=mean, stderr=stderr, flagged=flagged)
        everything.extend(values)
        if flagged:
            logger.warning(f"audit: class '{name}' drifts upward, mean {mean:.3e} +/- {stderr:.1e}")

    overall = math.fsum(everything) / len(everything) if everything else 0.0
    return AuditReport(classes=classes, overall_mean=overall, steps=len(everything))
