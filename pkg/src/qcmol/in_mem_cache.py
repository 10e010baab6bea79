from typing import Hashable, Optional, Dict
from itertools import count
from operator import itemgetter


class InMemCache:

    def __init__(self, max_size: int):
        self._max_size = max_size
        self._cache: Dict[Hashable, bytes] = {}
        self._lru: Dict[Hashable, int] = {}
        self._clock = count()
        self.hits = 0
        self.misses = 0

    def __contains__(self, key: Hashable) -> bool:
        return key in self._cache

    def __len__(self):
        return len(self._cache)

    def get(self, key: Hashable) -> Optional[bytes]:
        if key in self._cache:
            self._lru[key] = next(self._clock)
            self.hits += 1
            return self._cache[key]
        self.misses += 1
        return None

    @property
    def size(self) -> int:
        return sum(map(len, self._cache.values()))

    @property
    def max_size(self):
        return self._max_size

    @max_size.setter
    def max_size(self, max_size: int):
        self._max_size = max_size
        self._drop()

    def store(self, key: Hashable, value: bytes):
        self._cache[key] = value
        self._lru[key] = next(self._clock)
        self._drop()

    def _drop(self):
        size = self.size
        usage = sorted(self._lru.items(), key=itemgetter(1))
        while size > self.max_size:
            k = usage.pop(0)[0]
            size -= len(self._cache[k])
            del self._lru[k]
            del self._cache[k]
