"""JSON-lines dataset manifests."""
import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

HOME_VAR = "CFGDRIFT_HOME"


def workspace_root():
    """Root for relative paths: $CFGDRIFT_HOME if set, else the current directory."""
    return Path(os.environ.get(HOME_VAR) or os.getcwd())


@dataclass
class ManifestRecord:
    sample_id: str
    path: str = ""
    label: int = 0
    family: str = ""
    timestamp: str = None
    domain: str = None
    cluster: int = None
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        out = {k: v for k, v in asdict(self).items() if v is not None and k != "extra"}
        out.update(self.extra)
        return out

    @classmethod
    def from_dict(cls, obj):
        known = {"sample_id", "path", "label", "family", "timestamp", "domain", "cluster"}
        if "sample_id" not in obj:
            raise ValueError("manifest record without sample_id")
        kw = {k: obj[k] for k in known if k in obj}
        kw["label"] = int(kw.get("label", 0))
        return cls(extra={k: v for k, v in obj.items() if k not in known}, **kw)


def validate(records):
    seen = set()
    for r in records:
        if r.sample_id in seen:
            raise ValueError(f"duplicate sample_id {r.sample_id!r}")
        seen.add(r.sample_id)
    return records


def read_manifest(path):
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(ManifestRecord.from_dict(json.loads(line)))
            except (ValueError, json.JSONDecodeError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
    return validate(records)


def write_manifest(records, path):
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            d = r.to_dict() if isinstance(r, ManifestRecord) else r
            fh.write(json.dumps(d, sort_keys=True) + "\n")


def resolve_path(record, base=None):
    p = Path(record.path)
    if not p.is_absolute():
        p = Path(base) / p if base is not None else workspace_root() / p
    if not p.exists():
        raise FileNotFoundError(f"{record.sample_id}: {p} does not exist")
    return p
