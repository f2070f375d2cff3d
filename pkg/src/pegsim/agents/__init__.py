from .base import Agent, Cancel, Convert, Observation, OrderView, RealTrade, Submit, Transfer
from .background import LocalMaker, LocalMakerParams, NoiseParams, NoiseTrader, Scripted, agent_rng
from .market_maker import MarketMaker, MMParams, Quote, mm_quote
from .miner import ArbParams, Assessment, Miner, assess
from .stability import (
    Plan,
    SpreadModel,
    case1_flow,
    case1_profit,
    case1_profitable,
    case1_threshold,
    case2_flow,
    case2_fraction,
    case2_profit,
    case2_profitable,
    case2_threshold,
    execute_case1,
    execute_case2,
    participant_fraction,
    spread,
    unwind_case1,
    unwind_case2,
)
