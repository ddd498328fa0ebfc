"""On-disk formats for per-sample feature directories and dataset manifests.

Binary matrices (``lips.npyish``, ``scene.bin``, ``mel.bin``) are a 16-byte
header of four little-endian uint32 dimensions followed by float32 values in
row-major order.  Arrays with fewer than four axes pad the header with 1s.
"""

import csv
import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .errors import InvalidFeature, MissingFeature, ValidationError

HEADER = np.dtype("<u4")
VALUES = np.dtype("<f4")

SPLITS = ("train", "val", "test")


def write_matrix(path, array):
    array = np.asarray(array)
    if array.ndim > 4 or array.ndim == 0:
        raise ValidationError(f"binary matrices hold 1-4 axes, got {array.ndim}")
    dims = list(array.shape) + [1] * (4 - array.ndim)
    with open(path, "wb") as fh:
        fh.write(np.asarray(dims, dtype=HEADER).tobytes())
        fh.write(np.ascontiguousarray(array, dtype=VALUES).tobytes())


def read_matrix(path, ndim=None):
    raw = Path(path).read_bytes()
    if len(raw) < 16:
        raise InvalidFeature(f"{path}: truncated header")
    dims = tuple(int(d) for d in np.frombuffer(raw[:16], dtype=HEADER))
    count = int(np.prod(dims))
    if len(raw) != 16 + 4 * count:
        raise InvalidFeature(f"{path}: header says {dims} but payload has {(len(raw) - 16) // 4} values")
    values = np.frombuffer(raw[16:], dtype=VALUES).reshape(dims)
    if ndim is not None:
        if any(d != 1 for d in dims[ndim:]):
            raise InvalidFeature(f"{path}: expected {ndim} axes, header is {dims}")
        values = values.reshape(dims[:ndim])
    return values.astype(np.float32)


def write_affect(path, valence, arousal):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame", "valence", "arousal"])
        for i, (v, a) in enumerate(zip(valence, arousal)):
            writer.writerow([i, f"{v:.6f}", f"{a:.6f}"])


def read_affect(path):
    path = Path(path)
    if not path.exists():
        raise MissingFeature(f"missing affect file {path}")
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or not {"frame", "valence", "arousal"} <= set(rows[0]):
        raise MissingFeature(f"{path}: needs columns frame,valence,arousal")
    rows.sort(key=lambda r: int(r["frame"]))
    valence = np.array([float(r["valence"]) for r in rows])
    arousal = np.array([float(r["arousal"]) for r in rows])
    return valence, arousal


def write_series(path, columns):
    """Write equal-length named columns with a leading ``frame`` index."""
    names = list(columns)
    length = len(columns[names[0]])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame"] + names)
        for i in range(length):
            writer.writerow([i] + [_fmt(columns[n][i]) for n in names])


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return int(value)
    return f"{float(value):.7g}"


def read_series(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise MissingFeature(f"{path}: empty series")
    return {k: np.array([float(r[k]) for r in rows]) for k in rows[0] if k != "frame"}


def _read_int(path):
    try:
        return int(Path(path).read_text().strip())
    except FileNotFoundError as exc:
        raise MissingFeature(f"missing {path}") from exc
    except ValueError as exc:
        raise InvalidFeature(f"{path}: not an integer") from exc


def write_sample(directory, sample):
    """Write a sample mapping (see :func:`read_sample` for keys) as a feature directory."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    if "text" in sample:
        (d / "text.txt").write_text(sample["text"] + "\n")
    (d / "tokens.txt").write_text(" ".join(sample["symbols"]) + "\n")
    write_matrix(d / "lips.npyish", sample["lips"])
    write_affect(d / "affect.csv", sample["valence"], sample["arousal"])
    write_matrix(d / "scene.bin", sample["scene"])
    (d / "speaker.txt").write_text(f"{int(sample['speaker'])}\n")
    (d / "emotion.txt").write_text(f"{int(sample['emotion'])}\n")
    if "speaker_vector" in sample:
        write_matrix(d / "speaker_vector.bin", sample["speaker_vector"])
    if "mel" in sample:
        write_matrix(d / "mel.bin", sample["mel"])
    if "pitch" in sample:
        write_series(d / "pitch.csv", {"log_f0": sample["pitch"], "f0_hz": sample["f0_hz"],
                                       "voiced": sample["voiced"]})
    if "energy" in sample:
        write_series(d / "energy.csv", {"energy": sample["energy"]})


def read_sample(directory, require_targets=True):
    """Load a feature directory into a dict of numpy arrays and ints.

    Keys: ``symbols``, ``lips`` (T_v, W, H, C), ``valence``, ``arousal``,
    ``scene`` (T_s, D_s), ``speaker``, ``emotion``, optional ``speaker_vector``,
    and when targets are present ``mel`` (T_y, n_mels), ``pitch``, ``f0_hz``,
    ``voiced``, ``energy``.
    """
    d = Path(directory)
    if not d.is_dir():
        raise MissingFeature(f"no sample directory {d}")
    try:
        symbols = (d / "tokens.txt").read_text().split()
    except FileNotFoundError as exc:
        raise MissingFeature(f"missing {d / 'tokens.txt'}") from exc
    out = {"id": d.name, "symbols": symbols}
    if (d / "text.txt").exists():
        out["text"] = (d / "text.txt").read_text().strip()
    lips_path = d / "lips.npyish"
    if not lips_path.exists():
        raise MissingFeature(f"missing {lips_path}")
    out["lips"] = read_matrix(lips_path)
    out["valence"], out["arousal"] = read_affect(d / "affect.csv")
    scene_path = d / "scene.bin"
    if not scene_path.exists():
        raise MissingFeature(f"missing {scene_path}")
    out["scene"] = read_matrix(scene_path, ndim=2)
    out["speaker"] = _read_int(d / "speaker.txt")
    out["emotion"] = _read_int(d / "emotion.txt")
    if (d / "speaker_vector.bin").exists():
        out["speaker_vector"] = read_matrix(d / "speaker_vector.bin", ndim=1)
    if require_targets or (d / "mel.bin").exists():
        if not (d / "mel.bin").exists():
            raise MissingFeature(f"missing {d / 'mel.bin'}")
        out["mel"] = read_matrix(d / "mel.bin", ndim=2)
        pitch = read_series(d / "pitch.csv")
        out["pitch"] = pitch["log_f0"]
        out["f0_hz"] = pitch.get("f0_hz")
        out["voiced"] = pitch.get("voiced", np.ones_like(pitch["log_f0"])).astype(bool)
        out["energy"] = read_series(d / "energy.csv")["energy"]
    return out


# -- manifest ---------------------------------------------------------------

def write_manifest(path, entries, meta):
    """Line-oriented index: ``# key: value`` header lines, then ``id<TAB>split<TAB>path``."""
    lines = [f"# {k}: {v}" for k, v in meta.items()]
    lines += [f"{e['id']}\t{e['split']}\t{e['path']}" for e in entries]
    Path(path).write_text("\n".join(lines) + "\n")


def read_manifest(path):
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.txt"
    if not path.exists():
        raise MissingFeature(f"no manifest at {path}")
    meta, entries = {}, []
    for line in path.read_text().splitlines():
        if not line.strip():
            continue
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            meta[key.strip()] = value.strip()
            continue
        sid, split, rel = line.split("\t")
        if split not in SPLITS:
            raise ValidationError(f"unknown split {split!r} for {sid}")
        entries.append({"id": sid, "split": split, "path": rel})
    return meta, entries


def sample_dirs(root, split=None):
    root = Path(root)
    _, entries = read_manifest(root)
    return [root / e["path"] for e in entries if split is None or e["split"] == split]


def directory_digest(root):
    """SHA-256 over every file's relative path and bytes, in sorted order."""
    root = Path(root)
    h = hashlib.sha256()
    for p in sorted(q for q in root.rglob("*") if q.is_file()):
        h.update(str(p.relative_to(root)).encode())
        h.update(p.read_bytes())
    return h.hexdigest()


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())


# -- tensor containers --------------------------------------------------------
# magic (8 bytes), uint32 version, uint64 header length, JSON header, raw arrays

def write_tensor_file(path, magic, version, header, arrays):
    """Write named numpy arrays after a JSON header; ``header["tensors"]`` is filled in."""
    index, blobs, offset = [], [], 0
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr)
        arr = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
        raw = arr.tobytes()
        index.append({"name": name, "shape": list(arr.shape), "dtype": arr.dtype.str,
                      "offset": offset, "nbytes": len(raw)})
        blobs.append(raw)
        offset += len(raw)
    header = dict(header, version=version, tensors=index)
    blob = json.dumps(header, sort_keys=True).encode()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(magic)
        fh.write(struct.pack("<IQ", version, len(blob)))
        fh.write(blob)
        for raw in blobs:
            fh.write(raw)


def read_tensor_header(path, magic, max_version):
    with open(path, "rb") as fh:
        if fh.read(len(magic)) != magic:
            raise ValidationError(f"{path} is not a {magic.rstrip(bytes(1)).decode()} file")
        version, size = struct.unpack("<IQ", fh.read(12))
        if version > max_version:
            raise ValidationError(f"{path}: version {version} is newer than supported {max_version}")
        return json.loads(fh.read(size)), fh.tell()


def read_tensor_file(path, magic, max_version):
    """Inverse of :func:`write_tensor_file`; returns ``(header, {name: array})``."""
    header, start = read_tensor_header(path, magic, max_version)
    raw = Path(path).read_bytes()[start:]
    arrays = {}
    for item in header["tensors"]:
        chunk = raw[item["offset"]:item["offset"] + item["nbytes"]]
        arrays[item["name"]] = np.frombuffer(chunk, dtype=np.dtype(item["dtype"])).reshape(item["shape"]).copy()
    return header, arrays
