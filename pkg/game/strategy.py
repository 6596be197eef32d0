"""
Player strategies for the Pay-or-Leave Tug-of-War.

Strategies only see the history of token positions (node indices, the
current one last) and the value field fixed when they were built, so a
decision at step k never depends on later data.
"""
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from game.rng import auxiliary_generator
from lattice.domain import GridDomain
from lattice.fields import ScalarField
from models.exceptions import ConfigurationError, ContractViolation

logger = logging.getLogger(__name__)

History = Sequence[int]


@dataclass(frozen=True, eq=False)
class DecisionTable:
    """Greedy decisions per interior row, precomputed from a value field.

    argmax/argmin pick the lowest node index among ties (neighbor rows are
    sorted by index). Player II passes iff max{0, sup - eps} <= (sup + inf)/2;
    Player I quits a passed turn iff sup - eps < 0.
    """
    grid: GridDomain
    sup: np.ndarray
    inf: np.ndarray
    argmax: np.ndarray
    argmin: np.ndarray
    passes: np.ndarray
    quits: np.ndarray

    @classmethod
    def from_field(cls, value_field: ScalarField) -> 'DecisionTable':
        grid = value_field.grid
        neighbors = value_field.values[grid.neighbor_table]
        hi = np.argmax(neighbors, axis=1)
        lo = np.argmin(neighbors, axis=1)
        rows = np.arange(len(grid.neighbor_table))
        sup = neighbors[rows, hi]
        inf = neighbors[rows, lo]
        avg = 0.5 * (sup + inf)
        return cls(
            grid=grid,
            sup=sup,
            inf=inf,
            argmax=grid.neighbor_table[rows, hi],
            argmin=grid.neighbor_table[rows, lo],
            passes=np.maximum(0.0, sup - grid.epsilon) <= avg,
            quits=sup - grid.epsilon < 0,
        )

    def row(self, node: int) -> int:
        r = int(self.grid.interior_row[node])
        if r < 0:
            raise ContractViolation(f"node {node} is not an interior node")
        return r


class PlayerOneStrategy(ABC):
    """Player I: chooses a move when it controls the token and whether to quit a passed turn."""

    name = 'abstract'

    def reset(self, episode: int) -> None:
        """Called before every episode."""

    @abstractmethod
    def move(self, history: History) -> int:
        pass

    @abstractmethod
    def quits(self, history: History) -> bool:
        pass


class PlayerTwoStrategy(ABC):
    """Player II: chooses between passing the turn and playing Tug-of-War, and its moves."""

    name = 'abstract'

    def reset(self, episode: int) -> None:
        """Called before every episode."""

    @abstractmethod
    def passes(self, history: History) -> bool:
        pass

    @abstractmethod
    def move(self, history: History) -> int:
        pass


class GreedyPlayerOne(PlayerOneStrategy):
    """Moves to the argmax of the value field, quits when buying cannot pay off."""

    name = 'greedy'

    def __init__(self, table: DecisionTable):
        self.table = table

    def move(self, history: History) -> int:
        return int(self.table.argmax[self.table.row(history[-1])])

    def quits(self, history: History) -> bool:
        return bool(self.table.quits[self.table.row(history[-1])])


class GreedyPlayerTwo(PlayerTwoStrategy):
    """Takes the cheaper branch of the DPP (passing on ties) and moves to the argmin."""

    name = 'greedy'

    def __init__(self, table: DecisionTable):
        self.table = table

    def passes(self, history: History) -> bool:
        return bool(self.table.passes[self.table.row(history[-1])])

    def move(self, history: History) -> int:
        return int(self.table.argmin[self.table.row(history[-1])])


class RandomPlayerOne(GreedyPlayerOne):
    """Moves uniformly at random inside N(x); keeps the greedy quit rule."""

    name = 'random'

    def __init__(self, table: DecisionTable, seed: int):
        super().__init__(table)
        self.seed = seed
        self._rng: Optional[np.random.Generator] = None

    def reset(self, episode: int) -> None:
        self._rng = auxiliary_generator(self.seed, episode)

    def move(self, history: History) -> int:
        if self._rng is None:
            self.reset(0)
        row = self.table.grid.neighbor_table[self.table.row(history[-1])]
        return int(row[self._rng.integers(len(row))])


@dataclass
class StrategyState:
    """Backtracking bookkeeping for Player I.

    delta(x) = sup_N(x) u - u(x); X0 = {delta > delta0} with
    delta0 = min{delta(x0), eps}/2. `stack[0]` is the last X0 position the
    token visited and the rest of the stack the positions since then, so
    d = len(stack) - 1 is the number of backtrack moves needed to return.
    """
    delta0: float
    in_x0: np.ndarray
    stack: List[int] = field(default_factory=list)
    seen: int = 0

    @property
    def d(self) -> int:
        return max(len(self.stack) - 1, 0)

    def observe(self, history: History) -> None:
        for node in history[self.seen:]:
            node = int(node)
            if len(self.stack) >= 2 and node == self.stack[-2]:
                self.stack.pop()
            elif self.in_x0[node]:
                self.stack = [node]
            else:
                self.stack.append(node)
        self.seen = len(history)


class BacktrackingPlayerOne(GreedyPlayerOne):
    """Greedy inside X0; outside it, walks the token back along its path to the last X0 point."""

    name = 'backtracking'

    def __init__(self, table: DecisionTable, value_field: ScalarField):
        super().__init__(table)
        grid = table.grid
        delta = np.zeros(grid.node_count)
        delta[grid.interior_nodes] = table.sup - value_field.interior_values
        self.delta = delta
        self.state: Optional[StrategyState] = None

    def start(self, x0: int) -> StrategyState:
        delta0 = 0.5 * min(float(self.delta[x0]), self.table.grid.epsilon)
        in_x0 = self.table.grid.is_interior & (self.delta > delta0)
        self.state = StrategyState(delta0=delta0, in_x0=in_x0)
        return self.state

    def reset(self, episode: int) -> None:
        self.state = None

    def move(self, history: History) -> int:
        if self.state is None:
            self.start(int(history[0]))
        self.state.observe(history)
        x = int(history[-1])
        if self.state.in_x0[x] or len(self.state.stack) < 2:
            return super().move(history)
        return self.state.stack[-2]


STRATEGIES = ('greedy', 'random', 'backtracking')


def create_players(name: str, value_field: ScalarField, seed: int = 0,
                   table: Optional[DecisionTable] = None):
    """
    Build (Player I, Player II) for a strategy name; Player II is always greedy.

    Raises:
        ConfigurationError: unknown strategy name.
    """
    table = table or DecisionTable.from_field(value_field)
    if name == 'greedy':
        one = GreedyPlayerOne(table)
    elif name == 'random':
        one = RandomPlayerOne(table, seed)
    elif name == 'backtracking':
        one = BacktrackingPlayerOne(table, value_field)
    else:
        raise ConfigurationError(f"unknown strategy '{name}', expected one of {STRATEGIES}",
                                 key='strategy')
    logger.debug(f"players: {one.name} vs {GreedyPlayerTwo.name}")
    return one, GreedyPlayerTwo(table)
