"""Scenario configuration: JSON files validated against the packaged schema."""

from __future__ import annotations

import copy
import json
from decimal import Decimal, InvalidOperation
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Union

import jsonschema

from ..errors import ConfigInvalid
from ..ledger import SYSTEM_ACCOUNTS

DEFAULTS: Dict[str, Any] = {
    "name": "scenario",
    "record": True,
    "pair": {"tick": "0.01", "lot": "0.000001", "taker_fee_bps": 10, "maker_rebate_bps": 8,
             "initial_price": "100"},
    "margin": {"max_leverage": "10", "maintenance_ratio": "0", "liquidation_slippage": "0.05",
               "staleness": 1},
    "controller": {"gain": "0.1", "r_min": "-0.05", "r_max": "0.05", "swap_period": 16,
                   "measure_period": 16, "haircut_bps": 0},
    "central_bank": {"margin_bps": 10, "horizon": 100, "lock_period": 30},
    "currency_service": {"fee_bps": 10},
    "oracle": {"reporters": 9, "sample_size": 7, "tolerance": "0.01", "reward": "0.001",
               "slash": "10", "deposit": "100", "adversaries": []},
    "real_venue": {"process": "ou", "initial_price": "100", "mu": 0.0, "sigma": 0.0, "theta": 0.05,
                   "taker_fee_bps": 0, "transfer_delay": 1, "volume": "1000"},
    "accounts": {},
    "agents": [],
    "shocks": [],
    "metrics": {"epsilon": "0.01", "persistence": 10, "shock_step": 0},
}


def schema() -> dict:
    text = resources.files("pegsim.sim").joinpath("schema.json").read_text()
    return json.loads(text)


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def agent_ids(cfg: dict) -> List[str]:
    ids = []
    for entry in cfg.get("agents", []):
        n = entry.get("count")
        ids += [entry["id"]] if n is None else [f"{entry['id']}{i}" for i in range(n)]
    return ids


def validate(raw: dict) -> dict:
    try:
        jsonschema.validate(raw, schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigInvalid(f"{where}: {exc.message}") from None
    cfg = _merge(DEFAULTS, raw)
    ids = agent_ids(cfg)
    if len(set(ids)) != len(ids):
        raise ConfigInvalid("agent ids must be unique")
    known = set(ids) | set(SYSTEM_ACCOUNTS) | {f"rep{i}" for i in range(cfg["oracle"]["reporters"])}
    for acct in cfg["accounts"]:
        if acct not in known:
            raise ConfigInvalid(f"accounts: unknown account {acct!r}")
    for shock in cfg["shocks"]:
        if shock["type"] == "capital_removal" and shock.get("agent") not in ids:
            raise ConfigInvalid(f"shocks: capital_removal names unknown agent {shock.get('agent')!r}")
        if shock["type"] == "spread" and "value" not in shock:
            raise ConfigInvalid("shocks: spread shock needs a value")
        if shock["type"] == "price_jump" and "factor" not in shock:
            raise ConfigInvalid("shocks: price_jump shock needs a factor")
        if shock["type"] == "max_leverage" and "value" not in shock:
            raise ConfigInvalid("shocks: max_leverage shock needs a value")
    oc = cfg["oracle"]
    if oc["sample_size"] % 2 == 0 or oc["sample_size"] > oc["reporters"]:
        raise ConfigInvalid("oracle: sample_size must be odd and at most the reporter count")
    for adv in oc["adversaries"]:
        if adv["id"] not in {f"rep{i}" for i in range(oc["reporters"])}:
            raise ConfigInvalid(f"oracle: unknown adversary {adv['id']!r}")
    return cfg


def load_config(source: Union[str, Path, dict]) -> dict:
    if isinstance(source, dict):
        return validate(source)
    try:
        raw = json.loads(Path(source).read_text())
    except FileNotFoundError:
        raise ConfigInvalid(f"config file not found: {source}") from None
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"config is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigInvalid("config must be a JSON object")
    return validate(raw)


def golden_names() -> List[str]:
    root = resources.files("pegsim.scenarios")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def golden_path(name: str) -> Path:
    path = Path(str(resources.files("pegsim.scenarios").joinpath(f"{name}.json")))
    if not path.exists():
        raise ConfigInvalid(f"no golden scenario named {name!r}")
    return path


def set_path(cfg: dict, dotted: str, value: Any) -> dict:
    """Return a copy of ``cfg`` with ``a.b.c`` set (list items by integer index)."""
    out = copy.deepcopy(cfg)
    node: Any = out
    keys = dotted.split(".")
    for k in keys[:-1]:
        node = node[int(k)] if isinstance(node, list) else node.setdefault(k, {})
    last = keys[-1]
    if isinstance(node, list):
        node[int(last)] = value
    else:
        node[last] = value
    return out


def parse_range(text: str) -> List[str]:
    """``lo:hi:step`` (inclusive, decimal-exact) or a comma list."""
    try:
        if ":" in text:
            lo, hi, step = (Decimal(x) for x in text.split(":"))
            if step <= 0:
                raise ConfigInvalid("range step must be positive")
            vals, x = [], lo
            while x <= hi:
                vals.append(str(x))
                x += step
            return vals
        return [v.strip() for v in text.split(",") if v.strip()]
    except InvalidOperation:
        raise ConfigInvalid(f"bad range {text!r}") from None
