from typing import Iterable, List, Sequence, Union, Dict, Optional
from pathlib import Path
from hashlib import md5
from binascii import hexlify
from io import BytesIO
import csv
import numpy as np
import numpy.typing as npt


SeedPart = Union[int, str]


def digest(*parts: Union[bytes, str]) -> str:
    h = md5()
    for p in parts:
        h.update(p.encode() if isinstance(p, str) else p)
        h.update(b"\x00")
    return hexlify(h.digest()).decode()


def array_digest(arr: npt.ArrayLike) -> str:
    a = np.ascontiguousarray(np.asarray(arr, dtype=np.float64))
    return digest(str(a.shape), a.tobytes())


def _seed_int(part: SeedPart) -> int:
    if isinstance(part, str):
        return int(part[:16], 16)
    return int(part)


def derive_seed(seed: int, *parts: SeedPart) -> int:
    ss = np.random.SeedSequence([_seed_int(seed)] + [_seed_int(p)
                                                     for p in parts])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def array_encode(arr: npt.NDArray) -> bytes:
    rv = BytesIO()
    np.save(rv, arr, allow_pickle=False)
    return rv.getvalue()


def array_decode(buf: bytes) -> npt.NDArray:
    return np.load(BytesIO(buf), allow_pickle=False)


def dfs_gen(path: Path, base=None):
    if base is None:
        base = path
    for child in sorted(path.iterdir()):
        assert(not child.is_symlink())
        if child.is_dir():
            for grand in dfs_gen(child, base):
                yield grand
            yield child.relative_to(base)
        else:
            yield child.relative_to(base)


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (np.integer,)):
        return str(int(value))
    return str(value)


def write_csv(path: Path, header: Sequence[str],
              rows: Iterable[Sequence]):
    path.parent.mkdir(exist_ok=True, parents=True)
    with path.open("w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def read_csv(path: Path) -> List[Dict[str, str]]:
    with path.open("r", newline="") as f:
        return list(csv.DictReader(f))


def parse_float(text: str) -> Optional[float]:
    return float(text) if text not in ("", None) else None
