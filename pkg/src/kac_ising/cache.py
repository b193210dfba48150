"""
Caching system for experiment results
"""

import json
import logging
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, Optional

logger = logging.getLogger(__name__)


@dataclass
class CacheEntry:
    """A cached experiment payload"""
    experiment: str
    key: str
    payload: Dict[str, Any]
    timestamp: float
    access_count: int = 0
    last_accessed: float = 0.0

    def is_expired(self, max_age_seconds: float) -> bool:
        return time.time() - self.timestamp > max_age_seconds


class ResultCache:
    """
    JSON-on-disk cache of experiment results, one file per experiment

    Entries are keyed by the experiment's cache key (an md5 of its name and
    parameters). Expired entries are skipped on load; when the cache grows
    past max_entries the least recently used tenth is evicted.
    """

    def __init__(self, cache_dir: str, max_entries: int = 256, max_age_seconds: float = 30 * 24 * 3600):
        self.cache_dir = Path(cache_dir)
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        self.max_entries = max_entries
        self.max_age_seconds = max_age_seconds
        self.entries: Dict[str, CacheEntry] = {}
        self.hits = 0
        self.misses = 0
        self.load_from_disk()

    def get(self, key: str) -> Optional[Dict[str, Any]]:
        entry = self.entries.get(key)
        if entry is None or entry.is_expired(self.max_age_seconds):
            self.misses += 1
            return None
        entry.access_count += 1
        entry.last_accessed = time.time()
        self.hits += 1
        return entry.payload

    def put(self, experiment: str, key: str, payload: Dict[str, Any]):
        now = time.time()
        self.entries[key] = CacheEntry(
            experiment=experiment,
            key=key,
            payload=payload,
            timestamp=now,
            access_count=1,
            last_accessed=now,
        )
        logger.debug(f"  → cached {experiment} result under {key}")
        self._cleanup_if_needed()
        self.save_to_disk()

    def clear(self):
        self.entries.clear()
        for cache_file in self.cache_dir.glob("*.json"):
            cache_file.unlink()

    def get_stats(self) -> Dict[str, Any]:
        lookups = self.hits + self.misses
        return {
            'total_entries': len(self.entries),
            'expired_entries': sum(1 for e in self.entries.values() if e.is_expired(self.max_age_seconds)),
            'total_accesses': sum(e.access_count for e in self.entries.values()),
            'hits': self.hits,
            'misses': self.misses,
            'cache_hit_rate': self.hits / lookups if lookups else 0.0,
        }

    def _cleanup_if_needed(self):
        """Evict the least recently used entries once the cache is full"""
        if len(self.entries) > self.max_entries:
            ordered = sorted(self.entries.items(), key=lambda item: (item[1].last_accessed, item[1].access_count))
            to_remove = max(1, int(self.max_entries * 0.1))
            for key, _ in ordered[:to_remove]:
                del self.entries[key]

    def _file_for(self, experiment: str) -> Path:
        safe = ''.join(c if c.isalnum() or c in '-_' else '_' for c in experiment)
        return self.cache_dir / f"{safe}.json"

    def save_to_disk(self):
        by_experiment: Dict[str, Dict[str, Any]] = {}
        for key, entry in self.entries.items():
            by_experiment.setdefault(entry.experiment, {})[key] = asdict(entry)
        for cache_file in self.cache_dir.glob("*.json"):
            if cache_file.stem not in {self._file_for(name).stem for name in by_experiment}:
                cache_file.unlink()
        for experiment, data in by_experiment.items():
            with open(self._file_for(experiment), 'w') as f:
                json.dump(data, f, indent=2, sort_keys=True)

    def load_from_disk(self):
        for cache_file in sorted(self.cache_dir.glob("*.json")):
            try:
                with open(cache_file, 'r') as f:
                    data = json.load(f)
                loaded = 0
                for key, entry_data in data.items():
                    entry = CacheEntry(**entry_data)
                    if not entry.is_expired(self.max_age_seconds):
                        self.entries[key] = entry
                        loaded += 1
                logger.debug(f"  → loaded {loaded} cache entries from {cache_file.name}")
            except (OSError, ValueError, TypeError) as e:
                logger.warning(f"Failed to load cache file {cache_file}: {e}")
