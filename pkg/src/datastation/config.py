"""Station configuration.

The on-disk format is flat `key = value` lines (# comments allowed). User
identities are declared with dotted keys:

    user.alice.secret = s3cret
    user.alice.roles = contributor,owner
    user.alice.key = <hex fingerprint>
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

from .errors import StationError

# Column names treated as personally identifying by default. Owners can
# replace the list via pii_dictionary_path (one name per line).
DEFAULT_PII_NAMES = frozenset(
    {
        "ssn",
        "social_security_number",
        "dob",
        "date_of_birth",
        "email",
        "phone",
        "address",
        "first_name",
        "last_name",
        "full_name",
        "passport_number",
        "credit_card",
    }
)


@dataclass
class UserIdentity:
    user_id: str
    secret: str = ""
    roles: tuple[str, ...] = ("user",)
    key_fingerprint: str = ""

    def has_role(self, role: str) -> bool:
        return role in self.roles


@dataclass
class StationConfig:
    store_root: Path = Path("station-data")
    key_file: Path | None = None  # station HMAC secret; created if absent
    weight_keyword: float = 0.3
    weight_coverage: float = 0.4
    weight_overlap: float = 0.3
    join_threshold: float = 0.5
    tie_tolerance: float = 0.05
    match_fraction: float = 0.8
    max_candidates: int = 25
    max_seconds: float = 60.0
    price_disambiguation: int = 30
    price_why_profile: int = 50
    claim_ttl_seconds: float = 24 * 3600.0
    dp_seed: int | None = None
    rng_seed: int | None = None  # deterministic ids/clock for reproducible runs
    pii_dictionary_path: Path | None = None
    users: dict[str, UserIdentity] = field(default_factory=dict)

    def __post_init__(self):
        self.store_root = Path(self.store_root)
        if self.key_file is None:
            self.key_file = self.store_root / "station.key"
        self.key_file = Path(self.key_file)
        for name in ("weight_keyword", "weight_coverage", "weight_overlap"):
            w = getattr(self, name)
            if not 0.0 <= w <= 1.0:
                raise StationError(f"{name} out of range [0,1]: {w}")
        if not 0.0 < self.join_threshold <= 1.0:
            raise StationError(f"join_threshold out of range (0,1]: {self.join_threshold}")
        if not 0.0 < self.match_fraction <= 1.0:
            raise StationError(f"match_fraction out of range (0,1]: {self.match_fraction}")
        if self.tie_tolerance < 0:
            raise StationError("tie_tolerance must be >= 0")
        if self.max_candidates < 1:
            raise StationError("max_candidates must be >= 1")

    def pii_names(self) -> frozenset[str]:
        if self.pii_dictionary_path is None:
            return DEFAULT_PII_NAMES
        path = Path(self.pii_dictionary_path)
        if not path.exists():
            raise StationError(f"pii dictionary not found: {path}")
        names = {
            line.strip().lower()
            for line in path.read_text().splitlines()
            if line.strip() and not line.startswith("#")
        }
        return frozenset(names)

    def station_secret(self) -> bytes:
        """Load (or create on first use) the 32-byte HMAC secret."""
        if self.key_file.exists():
            secret = self.key_file.read_bytes()
            if len(secret) != 32:
                raise StationError(f"station key file must hold 32 bytes: {self.key_file}")
            return secret
        self.key_file.parent.mkdir(parents=True, exist_ok=True)
        secret = os.urandom(32)
        self.key_file.write_bytes(secret)
        return secret


_BOOL = {"true": True, "false": False, "yes": True, "no": False}

_FLOAT_KEYS = {
    "weight_keyword",
    "weight_coverage",
    "weight_overlap",
    "join_threshold",
    "tie_tolerance",
    "match_fraction",
    "max_seconds",
    "claim_ttl_seconds",
}
_INT_KEYS = {"max_candidates", "price_disambiguation", "price_why_profile", "dp_seed", "rng_seed"}
_PATH_KEYS = {"store_root", "key_file", "pii_dictionary_path"}


def load_config(path: str | Path) -> StationConfig:
    """Parse a flat key=value config file into a StationConfig."""
    kwargs: dict = {}
    users: dict[str, dict] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise StationError(f"{path}:{lineno}: expected key = value")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key.startswith("user."):
            parts = key.split(".")
            if len(parts) != 3:
                raise StationError(f"{path}:{lineno}: user keys look like user.<id>.<field>")
            _, user_id, attr = parts
            users.setdefault(user_id, {})[attr] = value
            continue
        if key in _FLOAT_KEYS:
            kwargs[key] = float(value)
        elif key in _INT_KEYS:
            kwargs[key] = int(value)
        elif key in _PATH_KEYS:
            kwargs[key] = Path(value)
        else:
            raise StationError(f"{path}:{lineno}: unknown config key {key!r}")
    cfg = StationConfig(**kwargs)
    for user_id, attrs in users.items():
        roles = tuple(r.strip() for r in attrs.get("roles", "user").split(",") if r.strip())
        cfg.users[user_id] = UserIdentity(
            user_id=user_id,
            secret=attrs.get("secret", ""),
            roles=roles or ("user",),
            key_fingerprint=attrs.get("key", ""),
        )
    return cfg
