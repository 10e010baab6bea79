from typing import Dict, NewType, Optional
from pathlib import Path
from time import time
from operator import itemgetter
import logging
import pickle
import humanize
import numpy.typing as npt

from .in_mem_cache import InMemCache
from .utils import digest, dfs_gen, array_encode, array_decode

log = logging.getLogger(__name__)

LRU_INFO = Path("lru.pickle")
Stamp = NewType("Stamp", float)


class GramCache:
    def __init__(self, path: Path, max_in_mem: int = 64 * 1024 * 1024,
                 max_size: int = 1024 * 1024 * 1024):
        self._base = path.absolute()
        self._base.mkdir(exist_ok=True, parents=True)
        self._max_size = max_size
        self._in_mem = InMemCache(max_in_mem)
        self._lru: Dict[Path, Stamp] = {}
        self._size = 0
        self.hits = 0
        self.misses = 0

        lru = self._base / LRU_INFO
        if lru.exists():
            with lru.open("rb") as f:
                self._lru = pickle.load(f)
            log.debug("loaded %d cache entries", len(self._lru))
        self.scan()

    def __enter__(self):
        return self

    def __exit__(self, *args):
        self.save()

    @property
    def size(self) -> int:
        return self._size

    def key(self, *digests: str) -> str:
        return digest(*digests)

    def _path(self, k: str) -> Path:
        return self._base / k[:2] / k[2:]

    def _remember(self, k: str, data: bytes):
        if len(data) <= self._in_mem.max_size:
            self._in_mem.store(k, data)

    def get(self, k: str) -> Optional[npt.NDArray]:
        p = self._path(k)
        if not p.exists():
            self.misses += 1
            return None
        data = self._in_mem.get(k)
        if data is None:
            data = p.read_bytes()
            self._remember(k, data)
        self._lru[p.relative_to(self._base)] = Stamp(time())
        self.hits += 1
        return array_decode(data)

    def store(self, k: str, value: npt.NDArray):
        p = self._path(k)
        data = array_encode(value)
        p.parent.mkdir(exist_ok=True, parents=True)
        existed = p.exists()
        if existed:
            self._size -= p.stat().st_size
        with p.open("wb") as f:
            f.write(data)
        self._remember(k, data)
        self._lru[p.relative_to(self._base)] = Stamp(time())
        self._size += len(data)
        self.cleanup()

    def scan(self):
        self._size = 0
        for rel in dfs_gen(self._base):
            p = self._base / rel
            if rel == LRU_INFO:
                continue
            if p.is_dir():
                if not any(p.iterdir()):
                    p.rmdir()
            elif rel in self._lru:
                self._size += p.stat().st_size
            else:
                log.debug("removing orphan %s", rel)
                p.unlink()
        for rel in [r for r in self._lru if not (self._base / r).exists()]:
            del self._lru[rel]

    def cleanup(self):
        order = sorted(self._lru.items(), key=itemgetter(1))
        while self._size > self._max_size and order:
            rel, _ = order.pop(0)
            p = self._base / rel
            self._size -= p.stat().st_size
            p.unlink()
            del self._lru[rel]
            log.debug("evicted %s", rel)

    def save(self):
        with (self._base / LRU_INFO).open("wb") as f:
            pickle.dump(self._lru, f)
        log.info("gram cache: %d entries, %s, %d hits, %d misses",
                 len(self._lru), humanize.naturalsize(self._size),
                 self.hits, self.misses)
