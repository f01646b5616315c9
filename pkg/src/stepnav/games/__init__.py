from .world import CARDINALS, Cell, CoarseWorld, vis, visible_set
from .belief import belief_update, possible_reappearances, unsafe_cells
from .build import (
    ActionGameConfig,
    GameSpec,
    NAV_ACTIONS,
    build_action_game,
    build_belief_game,
    build_nav_game,
)
from .solve import (
    Strategy,
    Unrealizable,
    gr1_synthesize,
    strategy_step,
    validate_env_move,
)
