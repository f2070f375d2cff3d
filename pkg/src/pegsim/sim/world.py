"""The simulated world and its fixed per-step phase order.

Each step runs, in order: real-world price update (and scheduled shocks),
oracle round, agent decisions, the exchange batch, margin calls, and on swap
boundaries the swap, rate update and central bank accrual. A metrics frame
closes the step after the invariants are re-checked.
"""

from __future__ import annotations

import logging
from dataclasses import replace
from typing import Dict, List, Optional, Tuple

from ..agents import (
    ArbParams,
    Cancel,
    Convert,
    LocalMaker,
    LocalMakerParams,
    MarketMaker,
    Miner,
    MMParams,
    NoiseParams,
    NoiseTrader,
    Observation,
    OrderView,
    RealTrade,
    Scripted,
    Submit,
    Transfer,
    agent_rng,
)
from ..central_bank import CentralBank, RatePolicy
from ..currency import CurrencyService
from ..errors import ConfigInvalid, InsufficientReporters, NoVenueData, ProtocolError, StaleIndex
from ..exchange import Exchange, PairConfig
from ..fixed import SCALE, bps, fmt, fp, mul
from ..ledger import CURRENCY_SERVICE, EXM, FEE_SINK, RESERVE, USDE, Ledger
from ..margin import IndexQuote, MarginEngine, MarginParams, equity
from ..oracle import Oracle, ReporterSet
from ..swap import FundingParams, FundingState, execute_swap, funding_event, measure, update_rate
from .metrics import MetricsFrame
from .venue import PRICE_GRID, USD, RealVenue, make_process

log = logging.getLogger("pegsim")

PAIR = "USD/EXM"


def _dec(x) -> int:
    return fp(str(x)) if isinstance(x, float) else fp(x)


class World:
    def __init__(self, cfg: dict):
        self.cfg = cfg
        self.seed = int(cfg["seed"])
        self.steps = int(cfg["steps"])
        self.t = 0
        self.ledger = Ledger()
        self.ledger.record = bool(cfg.get("record", True))

        pc = cfg["pair"]
        self.pair_cfg = PairConfig(PAIR, tick=_dec(pc["tick"]), lot=_dec(pc["lot"]),
                                   taker_fee_bps=pc["taker_fee_bps"], maker_rebate_bps=pc["maker_rebate_bps"])
        mc = cfg["margin"]
        self.margin = MarginEngine(self.ledger, {PAIR: MarginParams(
            max_leverage=_dec(mc["max_leverage"]), maintenance_ratio=_dec(mc["maintenance_ratio"]),
            liquidation_slippage=_dec(mc["liquidation_slippage"]), staleness=mc["staleness"])})
        self.exchange = Exchange(self.ledger, self.margin, [self.pair_cfg])
        cc = cfg["controller"]
        self.funding = FundingState(PAIR, FundingParams(
            gain=_dec(cc["gain"]), r_min=_dec(cc["r_min"]), r_max=_dec(cc["r_max"]),
            swap_period=cc["swap_period"], measure_period=cc["measure_period"], haircut_bps=cc["haircut_bps"]))
        cb = cfg["central_bank"]
        self.cb = CentralBank(self.ledger, RatePolicy(cb["margin_bps"], cb["horizon"], cb["lock_period"]))
        self.cs = CurrencyService(self.ledger, self.exchange, fee_bps=cfg["currency_service"]["fee_bps"])
        rv = cfg["real_venue"]
        self.venue = RealVenue(self.ledger, make_process(rv, self.seed), rv["taker_fee_bps"],
                               rv["transfer_delay"], _dec(rv["volume"]))
        self.venue.process.price = self.venue.process.price // PRICE_GRID * PRICE_GRID
        self.ledger.genesis("RealVenue", USD, 10**12 * SCALE)
        self.ledger.genesis("RealVenue", EXM, 10**12 * SCALE)

        oc = cfg["oracle"]
        self.reporter_set = ReporterSet(oc["sample_size"], _dec(oc["tolerance"]), _dec(oc["reward"]),
                                        _dec(oc["slash"]), _dec(oc["deposit"]))
        self.oracle = Oracle(PAIR, self.reporter_set, self.seed)
        self.reporters = [f"rep{i}" for i in range(oc["reporters"])]
        self.bias = {a["id"]: _dec(a["bias"]) for a in oc["adversaries"]}
        for rep in self.reporters:
            self.ledger.register(rep)
            self.ledger.genesis(rep, EXM, self.reporter_set.min_deposit)
            self.cb.deposit(rep, self.reporter_set.min_deposit, 0, lock=True)

        self.mark = _dec(pc["initial_price"])
        self.index: Optional[IndexQuote] = None
        self.index_by_step: Dict[int, int] = {}
        self.agents = self._build_agents(cfg)
        self.account_of: Dict[str, str] = {a.id: getattr(a, "account", a.id) for a in self.agents}
        self.initial: Dict[str, Tuple[int, int]] = {}
        for acct, assets in cfg["accounts"].items():
            self.ledger.register(acct)
            for asset, amt in sorted(assets.items()):
                if asset not in (EXM, USD):
                    raise ProtocolError(f"genesis asset {asset} is not allocatable")
                if _dec(amt):
                    self.ledger.genesis(acct, asset, _dec(amt))
        self.miners = [a for a in self.agents if isinstance(a, Miner)]
        for m in self.miners:
            self.initial[m.id] = (self._exm_wealth(m.id), self.ledger.balance(f"{m.id}@real", USD).total)
        self.shocks: Dict[int, List[dict]] = {}
        for s in cfg["shocks"]:
            self.shocks.setdefault(int(s["step"]), []).append(s)
        self.frames: List[MetricsFrame] = []
        self.step_events: List[dict] = []
        self.liquidation_count = 0
        self.liquidations: List[dict] = []
        self.solvency_violated = False
        self.pnl_rows: List[list] = []
        self.rejections = 0

    # -- construction -------------------------------------------------------

    def _build_agents(self, cfg: dict) -> list:
        agents = []
        idx = 0
        for entry in cfg["agents"]:
            n = entry.get("count")
            ids = [entry["id"]] if n is None else [f"{entry['id']}{i}" for i in range(n)]
            params = dict(entry.get("params", {}))
            for aid in ids:
                idx += 1
                kind = entry["type"]
                if kind == "market_maker":
                    agent = MarketMaker(aid, MMParams(**_fixed_params(params, MMParams)))
                elif kind == "miner":
                    agent = Miner(aid, ArbParams(**_fixed_params(params, ArbParams)))
                elif kind == "noise":
                    agent = NoiseTrader(aid, agent_rng(self.seed, idx), NoiseParams(**_fixed_params(params, NoiseParams)))
                elif kind == "local_maker":
                    agent = LocalMaker(aid, LocalMakerParams(**_fixed_params(params, LocalMakerParams)))
                else:
                    agent = Scripted(aid, entry.get("script", []))
                acct = getattr(agent, "account", aid)
                self.ledger.register(acct)
                self.ledger.register(f"{aid}@real")
                if _dec(entry.get("exm", 0)):
                    self.ledger.genesis(acct, EXM, _dec(entry["exm"]))
                if _dec(entry.get("usd", 0)):
                    self.ledger.genesis(f"{aid}@real", USD, _dec(entry["usd"]))
                if _dec(entry.get("real_exm", 0)):
                    self.ledger.genesis(f"{aid}@real", EXM, _dec(entry["real_exm"]))
                agents.append(agent)
        return sorted(agents, key=lambda a: a.id)

    # -- helpers ------------------------------------------------------------

    @property
    def a(self) -> int:
        return self.venue.price

    def emit(self, event: dict) -> None:
        self.step_events.append(event)

    def _exm_wealth(self, aid: str) -> int:
        acct = self.account_of.get(aid, aid)
        real = f"{aid}@real"
        total = self.ledger.balance(acct, EXM).total + self.ledger.balance(real, EXM).total
        total += self.venue.in_transit(acct).get(EXM, 0) + self.venue.in_transit(real).get(EXM, 0)
        pos = self.margin.position(acct, PAIR)
        if pos is not None:
            total += equity(pos, self.index.price if self.index else self.mark)
        return total

    def miner_pnl(self) -> int:
        total = 0
        for m in self.miners:
            exm0, usd0 = self.initial[m.id]
            usd = self.ledger.balance(f"{m.id}@real", USD).total
            total += self._exm_wealth(m.id) - exm0 + mul(usd - usd0, self.a)
        return total

    def observe(self, agent) -> Observation:
        acct = self.account_of[agent.id]
        real = f"{agent.id}@real"
        orders = [OrderView(o.id, o.side, o.price, o.remaining, o.reduce_only, o.tag)
                  for o in self.exchange.orders_of(acct, PAIR)]
        return Observation(
            step=self.t, index=self.index, real_price=self.a, mark=self.mark,
            best_bid=self.exchange.best_bid(PAIR), best_ask=self.exchange.best_ask(PAIR),
            rate=self.funding.rate, cb_rate=self.cb.rate, swap_period=self.funding.params.swap_period,
            tick=self.pair_cfg.tick, lot=self.pair_cfg.lot, taker_fee_bps=self.pair_cfg.taker_fee_bps,
            free_exm=self.ledger.free(acct), position=self.margin.position(acct, PAIR), orders=orders,
            real_balances={USD: self.ledger.free(real, USD), EXM: self.ledger.free(real, EXM)},
            in_transit=self.venue.in_transit(acct),
            params={"held": self.exchange.reserved(acct)},
        )

    def apply(self, agent, action) -> None:
        acct = self.account_of[agent.id]
        real = f"{agent.id}@real"
        if isinstance(action, Submit):
            self.exchange.submit(acct, action.side, action.price, action.qty, PAIR, leverage=action.leverage,
                                 reduce_only=action.reduce_only, tag=action.tag)
        elif isinstance(action, Cancel):
            self.exchange.cancel_all(acct, PAIR, action.tag)
        elif isinstance(action, RealTrade):
            self.venue.trade(real, action.side, action.qty)
        elif isinstance(action, Transfer):
            src, dst = (real, acct) if action.to_exchange else (acct, real)
            amt = min(action.amount, self.ledger.free(src, action.asset))
            if amt > 0:
                self.venue.send(src, dst, action.asset, amt, self.t)
        elif isinstance(action, Convert):
            if action.direction == "issue":
                self.cs.issue(acct, action.amount, action.limit_price, action.deadline_step)
            else:
                self.cs.redeem(acct, action.amount, action.limit_price, action.deadline_step)
        else:
            raise TypeError(f"unknown action {action!r}")

    # -- the step -------------------------------------------------------------

    def step(self) -> MetricsFrame:
        t = self.t
        self.ledger.step = self.exchange.step = self.margin.step = t

        # 1. real-world price and shocks
        self.venue.advance(t)
        for shock in self.shocks.get(t, []):
            self._apply_shock(shock)
        self.venue.deliver(t)

        # 2. oracle
        eligible = [r for r in self.reporters if self.cb.deposit_of(r) >= self.reporter_set.min_deposit]
        try:
            quote, res = self.oracle.round(t, self.venue.quotes(), eligible, self._report, self.ledger,
                                           self.cb.slashed)
            self.index = quote
            self.emit(res.event(t, PAIR))
        except (InsufficientReporters, NoVenueData) as exc:
            self.emit({"type": "oracle_failed", "step": t, "error": type(exc).__name__, "message": str(exc)})
        if self.index is not None:
            self.index_by_step[t] = self.index.price

        # 3. agents, then queued conversions
        for agent in self.agents:
            for action in agent.decide(self.observe(agent)):
                try:
                    self.apply(agent, action)
                except ProtocolError as exc:
                    self.rejections += 1
                    self.emit({"type": "rejected", "step": t, "agent": agent.id, "action": type(action).__name__,
                               "error": type(exc).__name__, "message": str(exc)})
        try:
            self.cs.process_delayed(t)
        except ProtocolError as exc:
            self.emit({"type": "rejected", "step": t, "agent": CURRENCY_SERVICE, "action": "process_delayed",
                       "error": type(exc).__name__, "message": str(exc)})

        # 4. batch
        trades = self.exchange.run_batch(PAIR)
        for tr in trades:
            self.funding.record(tr.price, tr.qty, t)
        if trades:
            self.mark = trades[-1].price

        # 5. margin calls
        liqs = []
        if self.index is not None:
            try:
                liqs = self.margin.run_margin_calls(self.index, t)
            except StaleIndex as exc:
                self.emit({"type": "margin_calls_skipped", "step": t, "message": str(exc)})
        self.liquidation_count += len(liqs)
        self.liquidations += [l.event() for l in liqs]

        # 6-7. swap, rate update, central bank accrual
        S = self.funding.params.swap_period
        if (t + 1) % S == 0 and self.index is not None:
            self._swap_and_accrue(t)

        # 8. invariants and metrics
        self.ledger.check_conservation()
        self.margin.check_invariants()
        self.cs.check_backing()
        frame = self._frame(t, trades, len(liqs))
        self.frames.append(frame)
        if (t + 1) % S == 0 or t == self.steps - 1:
            self._pnl_rows(t)
        self.t += 1
        return frame

    def _report(self, reporter: str, true_price: int) -> int:
        bias = self.bias.get(reporter)
        return true_price if bias is None else mul(true_price, SCALE + bias)

    def _apply_shock(self, shock: dict) -> None:
        kind = shock["type"]
        if kind == "spread":
            d = _dec(shock["value"])
            new = (self.mark * SCALE // (SCALE + d)) // PRICE_GRID * PRICE_GRID
            self.venue.process.jump_to(new)
        elif kind == "price_jump":
            new = mul(self.a, _dec(shock["factor"])) // PRICE_GRID * PRICE_GRID
            self.venue.process.jump_to(new)
        elif kind == "max_leverage":
            # a schedule of leverage caps; only new orders are affected
            params = self.margin.params_for(PAIR)
            self.margin.params[PAIR] = replace(params, max_leverage=_dec(shock["value"]))
        else:
            for agent in self.agents:
                if agent.id == shock["agent"]:
                    agent.disable()
        self.emit({"type": "shock", "step": self.t, "kind": kind, "real_price": fmt(self.a),
                   **{k: v for k, v in shock.items() if k not in ("step", "type")}})

    def _swap_and_accrue(self, t: int) -> None:
        lookup = self.index_by_step.get
        sample = measure(self.funding.window_trades, lookup)
        self.funding = update_rate(self.funding, sample)
        cs_before = self.cs.position()
        cs_margin0 = cs_before.margin if cs_before is not None else 0
        transfers, shortfall, remainder = execute_swap(self.margin, PAIR, self.index.price, self.funding.rate,
                                                       self.funding.params.haircut_bps)
        cs_after = self.cs.position()
        cs_flow = (cs_after.margin if cs_after is not None else 0) - cs_margin0
        self.cs.rebalance()
        self.emit(funding_event(t, self.funding, sample, transfers, shortfall, remainder))

        self.cb.update_rate(self.funding.history)
        cs_pos = self.cs.position()
        extra = [(CURRENCY_SERVICE, cs_pos.margin)] if cs_pos is not None else []
        pay = self.cb.pay_interest(t, extra)
        self.emit(self.cb.events.pop())
        self.cb.record_currency_service(pay.accruals.get(CURRENCY_SERVICE, 0), -cs_flow)
        if self.cb.solvency().violation:
            self.solvency_violated = True

    def _frame(self, t: int, trades, n_liq: int) -> MetricsFrame:
        longs, shorts = self.margin.open_interest(PAIR)
        a = self.a
        return MetricsFrame(
            step=t, a=a, b=self.mark, d=MetricsFrame.spread(a, self.mark), r=self.funding.rate,
            R_E=self.cb.rate, index=self.index.price if self.index else 0, oi_long=longs, oi_short=shorts,
            trades=len(trades), volume=sum(tr.qty for tr in trades), miner_pnl=self.miner_pnl(),
            reserve=self.ledger.balance(RESERVE, EXM).total, fee_sink=self.ledger.balance(FEE_SINK, EXM).total,
            usde_outstanding=self.ledger.total_supply(USDE), cs_long=self.cs.long_qty(),
            exm_supply=self.ledger.total_supply(EXM), solvency_headroom=self.cb.solvency().headroom,
            liquidations=n_liq,
        )

    def _pnl_rows(self, t: int) -> None:
        mark = self.index.price if self.index else self.mark
        for agent in self.agents:
            acct = self.account_of[agent.id]
            pos = self.margin.position(acct, PAIR)
            qty = pos.qty * int(pos.side) if pos else 0
            realized = (pos.realized + pos.funding) if pos else 0
            unreal = (equity(pos, mark) - pos.margin) if pos else 0
            self.pnl_rows.append([t, agent.id, "virtual", fmt(qty), fmt(realized), fmt(unreal)])
            usd = self.ledger.balance(f"{agent.id}@real", USD).total
            if usd or agent.id in self.initial:
                usd0 = self.initial.get(agent.id, (0, usd))[1]
                self.pnl_rows.append([t, agent.id, "real", fmt(usd), "0", fmt(mul(usd - usd0, self.a))])

    def drain_events(self) -> List[dict]:
        out = self.step_events
        out += self.exchange.events
        out += self.margin.events
        out += self.cs.events
        self.step_events, self.exchange.events, self.margin.events, self.cs.events = [], [], [], []
        out += self.ledger.drain_journal()
        return out

    def run(self, on_step=None) -> List[MetricsFrame]:
        while self.t < self.steps:
            self.step()
            events = self.drain_events()
            if on_step is not None:
                on_step(self.frames[-1], events)
        return self.frames


def _fixed_params(raw: dict, cls) -> dict:
    """Coerce config values to the field types of ``cls`` (ints are fixed point unless marked)."""
    import dataclasses

    out = {}
    types = {f.name: f.type for f in dataclasses.fields(cls)}
    plain_int = {"levels", "staleness", "min_hold"}
    for k, v in raw.items():
        if k not in types:
            raise ConfigInvalid(f"unknown parameter {k!r} for {cls.__name__}")
        ty = str(types[k])
        if ty == "int" and k not in plain_int:
            out[k] = _dec(v)
        elif ty == "int":
            out[k] = int(v)
        elif ty == "float":
            out[k] = float(v)
        elif ty == "bool":
            out[k] = bool(v)
        else:
            out[k] = v
    return out
