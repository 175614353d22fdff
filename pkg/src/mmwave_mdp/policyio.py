"""Versioned on-disk format for converged policy profiles.

A policy file is JSON: a header binding the exact problem instance
(L, K, N, solver parameters, handover cost, channel-matrix digest) plus
one action array per UE indexed by canonical state index. The cache
filename carries the same key so stale policies are never picked up
silently.
"""

import json
import os
from dataclasses import dataclass

import numpy as np

from .channel import ChannelMatrix
from .errors import ValidationError

FORMAT_VERSION = 1
FILE_KIND = "mmwave-mdp-policy-profile"

CACHE_ENV_VAR = "MMWAVE_MDP_CACHE"
DEFAULT_CACHE_DIR = "policy-cache"


@dataclass(frozen=True)
class PolicyFileHeader:
    bss: int
    channel_states: int
    ues: int
    omega: float
    epsilon: float
    oh: float
    channel_digest: str
    converged: bool
    iterations: int
    policy_seed: int


def cache_filename(header: PolicyFileHeader) -> str:
    h = header
    return (
        f"policy_L{h.bss}_K{h.channel_states}_N{h.ues}"
        f"_oh{h.oh!r}_w{h.omega!r}_e{h.epsilon!r}_{h.channel_digest[:12]}.json"
    )


def cache_dir(explicit: str | None = None) -> str:
    return explicit or os.environ.get(CACHE_ENV_VAR) or DEFAULT_CACHE_DIR


def save_policy_file(path, header: PolicyFileHeader, policies, channel: ChannelMatrix) -> None:
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": FILE_KIND,
        "bss": header.bss,
        "channel_states": header.channel_states,
        "ues": header.ues,
        "omega": header.omega,
        "epsilon": header.epsilon,
        "oh": header.oh,
        "channel_digest": header.channel_digest,
        "channel_matrix": [list(row) for row in channel.p],
        "converged": header.converged,
        "iterations": header.iterations,
        "policy_seed": header.policy_seed,
        "policies": [np.asarray(p).tolist() for p in policies],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_policy_file(path) -> tuple[PolicyFileHeader, list[np.ndarray]]:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("kind") != FILE_KIND:
        raise ValidationError(f"{path} is not a policy profile file")
    if doc.get("format_version") != FORMAT_VERSION:
        raise ValidationError(
            f"{path} has format version {doc.get('format_version')}, expected {FORMAT_VERSION}"
        )
    header = PolicyFileHeader(
        bss=int(doc["bss"]),
        channel_states=int(doc["channel_states"]),
        ues=int(doc["ues"]),
        omega=float(doc["omega"]),
        epsilon=float(doc["epsilon"]),
        oh=float(doc["oh"]),
        channel_digest=str(doc["channel_digest"]),
        converged=bool(doc["converged"]),
        iterations=int(doc["iterations"]),
        policy_seed=int(doc["policy_seed"]),
    )
    policies = [np.asarray(p, dtype=np.int64) for p in doc["policies"]]
    if len(policies) != header.ues:
        raise ValidationError(f"{path}: expected {header.ues} policies, found {len(policies)}")
    stored = ChannelMatrix(doc["channel_matrix"])
    if stored.digest() != header.channel_digest:
        raise ValidationError(f"{path}: channel matrix does not match its digest")
    return header, policies
