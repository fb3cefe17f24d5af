"""Generation records: one entry per decoded definition, JSONL on disk."""

from __future__ import annotations

import json
from dataclasses import dataclass, field


@dataclass
class GenerationRecord:
    node_id: str
    terminology: list[str]
    reference: list[str]
    generated: list[str]
    token_logprobs: list[float] = field(default_factory=list)
    decode_mode: str = "greedy"
    model: str = ""

    def to_dict(self) -> dict:
        return {"node_id": self.node_id, "terminology": self.terminology,
                "reference": self.reference, "generated": self.generated,
                "token_logprobs": self.token_logprobs,
                "decode_mode": self.decode_mode, "model": self.model}

    @classmethod
    def from_dict(cls, d: dict) -> "GenerationRecord":
        return cls(d["node_id"], list(d["terminology"]), list(d["reference"]),
                   list(d["generated"]), list(d.get("token_logprobs", [])),
                   d.get("decode_mode", "greedy"), d.get("model", ""))


def write_records(path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")


def read_records(path) -> list[GenerationRecord]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(GenerationRecord.from_dict(json.loads(line)))
    return out
