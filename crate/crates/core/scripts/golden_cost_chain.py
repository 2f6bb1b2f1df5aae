#!/usr/bin/env python3
"""Rebuilds the three-transaction cost chain from first principles and
writes it as a ledger file plus a summary of gas and fees.

Shares no code with the Rust crate: encoding, hashing, signing, gas and
state transitions are all re-derived here. Run from the crate root:

    python3 scripts/golden_cost_chain.py tests/fixtures
"""
import hashlib
import json
import sys
from pathlib import Path

from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

CHAIN_ID = 5
GAS_PRICE = 1_100_000_000
BASE_TX, ZERO_BYTE, NONZERO_BYTE = 21000, 4, 16
SSTORE_NEW, SSTORE_UPDATE = 20000, 5000
CREATE_BASE, CODE_BYTE, CODE_SIZE = 32000, 200, 2000
FAUCET_AMOUNT, FAUCET_COOLDOWN = 500_000_000_000_000_000, 86400
ONE_ETH = 10**18


def canon(value):
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode()


def sha(data):
    return hashlib.sha256(data).digest()


def hx(data):
    return "0x" + data.hex()


class Key:
    def __init__(self, fill):
        self.sk = Ed25519PrivateKey.from_private_bytes(bytes([fill]) * 32)
        self.pk = self.sk.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)
        self.address = hx(sha(self.pk)[-20:])

    def sign(self, msg):
        return self.sk.sign(msg)


authority, maker, consumer = Key(0xA1), Key(0x11), Key(0xC1)

gas_params = {
    "base_tx": BASE_TX,
    "calldata_zero_byte": ZERO_BYTE,
    "calldata_nonzero_byte": NONZERO_BYTE,
    "sstore_new": SSTORE_NEW,
    "sstore_update": SSTORE_UPDATE,
    "create_base": CREATE_BASE,
    "code_byte": CODE_BYTE,
    "default_code_size": CODE_SIZE,
    "default_gas_price": GAS_PRICE,
    "layout": {"register_new": 3, "transfer_update": 1, "transfer_new": 1, "sell_update": 2, "sell_new": 1},
}

genesis = {
    "chain_id": CHAIN_ID,
    "authorities": [{"address": authority.address, "public_key": hx(authority.pk)}],
    "roles": {maker.address: "manufacturer", consumer.address: "consumer"},
    "initial_balances": {maker.address: ONE_ETH},
    "gas_params": gas_params,
    "faucet_amount": FAUCET_AMOUNT,
    "faucet_cooldown": FAUCET_COOLDOWN,
}


def account(addr, role, balance):
    return {"address": addr, "role": role, "balance": balance, "nonce": 0, "last_faucet_claim": None}


state = {
    "chain_id": CHAIN_ID,
    "contract": None,
    "accounts": {
        maker.address: account(maker.address, "manufacturer", ONE_ETH),
        consumer.address: account(consumer.address, "consumer", 0),
        authority.address: account(authority.address, "authority", 0),
    },
    "products": {},
}

kinds = [
    {"deploy": {"code_size": CODE_SIZE}},
    {"register": {"product_id": "P-001", "name": "Genuine Product", "metadata": ""}},
    {"sell": {"product_id": "P-001", "consumer": consumer.address}},
]
storage = {
    "deploy": CREATE_BASE + CODE_BYTE * CODE_SIZE,
    "register": 3 * SSTORE_NEW,
    "sell": 2 * SSTORE_UPDATE + 1 * SSTORE_NEW,
}


def header_hash(h):
    return sha(canon(h))


blocks = []
genesis_header = {
    "index": 0,
    "timestamp": 0,
    "prev_hash": hx(bytes(32)),
    "tx_root": hx(sha(b"")),
    "sealer": authority.address,
    "state_root": hx(sha(canon(state))),
}
blocks.append({"header": genesis_header, "txs": [], "seal": hx(bytes(64))})

gas_by_kind = {}
for nonce, kind in enumerate(kinds):
    name = next(iter(kind))
    payload = {"chain_id": CHAIN_ID, "sender": maker.address, "nonce": nonce, "kind": kind, "gas_price": GAS_PRICE}
    tx = {
        "sender": maker.address,
        "public_key": hx(maker.pk),
        "nonce": nonce,
        "kind": kind,
        "gas_price": GAS_PRICE,
        "signature": hx(maker.sign(canon(payload))),
    }
    calldata = canon(kind)
    gas = BASE_TX + sum(ZERO_BYTE if b == 0 else NONZERO_BYTE for b in calldata) + storage[name]
    fee = gas * GAS_PRICE
    gas_by_kind[name] = gas

    index = nonce + 1
    acct = state["accounts"][maker.address]
    acct["nonce"] += 1
    acct["balance"] -= fee
    state["accounts"][authority.address]["balance"] += fee
    body = kind[name]
    if name == "deploy":
        addr = sha(bytes.fromhex(maker.address[2:]) + nonce.to_bytes(8, "big"))[-20:]
        state["contract"] = {"address": hx(addr), "deployer": maker.address}
    elif name == "register":
        state["products"][body["product_id"]] = {
            "product_id": body["product_id"],
            "name": body["name"],
            "metadata": body["metadata"],
            "manufacturer": maker.address,
            "current_owner": maker.address,
            "status": "Available",
            "history": [maker.address],
            "registered_at": index,
        }
    else:
        p = state["products"][body["product_id"]]
        p["current_owner"] = body["consumer"]
        p["history"].append(body["consumer"])
        p["status"] = "Unavailable"

    parent = blocks[-1]["header"]
    header = {
        "index": index,
        "timestamp": parent["timestamp"] + 1,
        "prev_hash": hx(header_hash(parent)),
        "tx_root": hx(sha(sha(b"") + sha(canon(tx)))),
        "sealer": authority.address,
        "state_root": hx(sha(canon(state))),
    }
    blocks.append({"header": header, "txs": [tx], "seal": hx(authority.sign(header_hash(header)))})

total_gas = sum(gas_by_kind.values())
total_fee = total_gas * GAS_PRICE
summary = {
    "gas": gas_by_kind,
    "total_gas": total_gas,
    "gas_price": GAS_PRICE,
    "total_fee_wei": total_fee,
    "tip_hash": hx(header_hash(blocks[-1]["header"])),
    "final_state_root": blocks[-1]["header"]["state_root"],
}

out = Path(sys.argv[1] if len(sys.argv) > 1 else ".")
out.mkdir(parents=True, exist_ok=True)
(out / "cost_chain.log").write_bytes(b"".join(canon(b) + b"\n" for b in blocks))
(out / "cost_chain_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
print(json.dumps(summary, indent=2, sort_keys=True))
