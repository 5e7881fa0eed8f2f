"""PLY (ASCII, binary little-endian) and OBJ reading and writing.

Only vertex positions and triangle connectivity are kept. Polygons with more
than three corners are fan-triangulated; faces that repeat a vertex are
dropped with a warning.
"""
import logging
import os

import numpy as np

from .mesh import MeshError, TriangleMesh

logger = logging.getLogger(__name__)


class MeshParseError(MeshError):
    def __init__(self, path, where, message):
        super().__init__(f"{path}:{where}: {message}")
        self.path = path
        self.where = where


_PLY_TYPES = {
    "char": "i1", "int8": "i1", "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2", "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4", "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4", "double": "f8", "float64": "f8",
}


def _finish(path, vertices, polys):
    if isinstance(polys, np.ndarray):
        faces = polys.reshape(-1, 3)
    elif polys and all(len(p) == 3 for p in polys):
        faces = np.asarray(polys, dtype=np.int64).reshape(-1, 3)
    else:
        tris = []
        for poly in polys:
            for q in range(1, len(poly) - 1):
                tris.append((poly[0], poly[q], poly[q + 1]))
        faces = np.asarray(tris, dtype=np.int64).reshape(-1, 3)
    vertices = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
    if vertices.shape[0] == 0:
        raise MeshError(f"{path}: mesh has no vertices")
    if faces.size and (faces.min() < 0 or faces.max() >= vertices.shape[0]):
        bad = int(np.argmax((faces < 0).any(1) | (faces >= vertices.shape[0]).any(1)))
        raise MeshError(f"{path}: face {bad} references vertex outside 0..{vertices.shape[0] - 1}: {faces[bad].tolist()}")
    degenerate = (faces[:, 0] == faces[:, 1]) | (faces[:, 1] == faces[:, 2]) | (faces[:, 0] == faces[:, 2])
    if degenerate.any():
        logger.warning("%s: dropping %d degenerate faces", path, int(degenerate.sum()))
        faces = faces[~degenerate]
    return TriangleMesh(vertices, faces)


# --------------------------------------------------------------------------
# PLY


def _read_ply_header(fh, path):
    magic = fh.readline()
    if magic.strip() != b"ply":
        raise MeshParseError(path, "line 1", "missing 'ply' magic")
    fmt = None
    elements = []
    lineno = 1
    while True:
        raw = fh.readline()
        lineno += 1
        if not raw:
            raise MeshParseError(path, f"line {lineno}", "header has no end_header")
        tok = raw.decode("ascii", "replace").split()
        if not tok or tok[0] in ("comment", "obj_info"):
            continue
        if tok[0] == "format":
            fmt = tok[1]
            if fmt not in ("ascii", "binary_little_endian"):
                raise MeshParseError(path, f"line {lineno}", f"unsupported PLY format {fmt!r}")
        elif tok[0] == "element":
            elements.append({"name": tok[1], "count": int(tok[2]), "props": []})
        elif tok[0] == "property":
            if not elements:
                raise MeshParseError(path, f"line {lineno}", "property before any element")
            try:
                if tok[1] == "list":
                    elements[-1]["props"].append((tok[4], _PLY_TYPES[tok[2]], _PLY_TYPES[tok[3]]))
                else:
                    elements[-1]["props"].append((tok[2], _PLY_TYPES[tok[1]], None))
            except (KeyError, IndexError):
                raise MeshParseError(path, f"line {lineno}", f"bad property line {raw.strip()!r}") from None
        elif tok[0] == "end_header":
            break
        else:
            raise MeshParseError(path, f"line {lineno}", f"unexpected header keyword {tok[0]!r}")
    if fmt is None:
        raise MeshParseError(path, "header", "no format line")
    return fmt, elements, lineno


def _xyz_columns(element, path):
    names = [p[0] for p in element["props"]]
    try:
        return [names.index(c) for c in ("x", "y", "z")]
    except ValueError:
        raise MeshParseError(path, "header", "vertex element lacks x/y/z properties") from None


def _face_prop(element, path):
    for q, p in enumerate(element["props"]):
        if p[2] is not None and p[0] in ("vertex_indices", "vertex_index"):
            return q
    raise MeshParseError(path, "header", "face element lacks a vertex_indices list")


def _read_ply_ascii(fh, path, elements, lineno):
    vertices, polys = [], []
    for el in elements:
        for _ in range(el["count"]):
            raw = fh.readline()
            lineno += 1
            if not raw:
                raise MeshParseError(path, f"line {lineno}", f"unexpected end of file in element {el['name']!r}")
            tok = raw.split()
            try:
                values, pos = [], 0
                for name, typ, item in el["props"]:
                    if item is None:
                        values.append(tok[pos])
                        pos += 1
                    else:
                        k = int(tok[pos])
                        values.append([int(t) for t in tok[pos + 1:pos + 1 + k]])
                        if len(values[-1]) != k:
                            raise IndexError
                        pos += 1 + k
                if el["name"] == "vertex":
                    cols = _xyz_columns(el, path)
                    vertices.append([float(values[c]) for c in cols])
                elif el["name"] == "face":
                    polys.append(values[_face_prop(el, path)])
            except (ValueError, IndexError):
                raise MeshParseError(path, f"line {lineno}", f"malformed {el['name']} record {raw.strip()!r}") from None
    return vertices, polys


def _read_ply_binary(fh, path, elements):
    data = fh.read()
    offset = 0
    vertices = np.zeros((0, 3))
    polys = []
    for el in elements:
        if all(item is None for _, _, item in el["props"]):
            dt = np.dtype([(name, "<" + typ) for name, typ, _ in el["props"]])
            need = dt.itemsize * el["count"]
            if offset + need > len(data):
                raise MeshParseError(path, f"byte {offset}", f"truncated {el['name']} block")
            arr = np.frombuffer(data, dtype=dt, count=el["count"], offset=offset)
            offset += need
            if el["name"] == "vertex":
                _xyz_columns(el, path)
                vertices = np.column_stack([arr["x"], arr["y"], arr["z"]]).astype(np.float64)
            continue
        fq = _face_prop(el, path) if el["name"] == "face" else -1
        if fq == 0 and len(el["props"]) == 1:
            # fast path: a pure triangle list
            _, ctyp, ityp = el["props"][0]
            dt = np.dtype([("n", "<" + ctyp), ("i", "<" + ityp, (3,))])
            need = dt.itemsize * el["count"]
            if offset + need <= len(data):
                arr = np.frombuffer(data, dtype=dt, count=el["count"], offset=offset)
                if np.all(arr["n"] == 3) and not len(polys):
                    polys = arr["i"].astype(np.int64)
                    offset += need
                    continue
        for _ in range(el["count"]):
            for q, (name, typ, item) in enumerate(el["props"]):
                try:
                    if item is None:
                        size = np.dtype(typ).itemsize
                        if offset + size > len(data):
                            raise IndexError
                        offset += size
                    else:
                        k = int(np.frombuffer(data, "<" + typ, 1, offset)[0])
                        offset += np.dtype(typ).itemsize
                        vals = np.frombuffer(data, "<" + item, k, offset)
                        offset += k * np.dtype(item).itemsize
                        if q == fq:
                            polys.append(vals.astype(np.int64).tolist())
                except (ValueError, IndexError):
                    raise MeshParseError(path, f"byte {offset}", f"truncated {el['name']} record") from None
    return vertices, polys


def read_ply(path):
    with open(path, "rb") as fh:
        fmt, elements, lineno = _read_ply_header(fh, path)
        if fmt == "ascii":
            vertices, polys = _read_ply_ascii(fh, path, elements, lineno)
        else:
            vertices, polys = _read_ply_binary(fh, path, elements)
    return _finish(path, vertices, polys)


def write_ply(mesh, path, binary=False):
    v, f = mesh.vertices, mesh.faces
    header = ["ply", "format " + ("binary_little_endian 1.0" if binary else "ascii 1.0"),
              f"element vertex {v.shape[0]}",
              "property double x", "property double y", "property double z",
              f"element face {f.shape[0]}",
              "property list uchar int vertex_indices", "end_header"]
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        if binary:
            fh.write(v.astype("<f8").tobytes())
            rec = np.zeros(f.shape[0], dtype=[("n", "u1"), ("i", "<i4", 3)])
            rec["n"] = 3
            rec["i"] = f
            fh.write(rec.tobytes())
        else:
            lines = [f"{x!r} {y!r} {z!r}" for x, y, z in v.tolist()]
            lines += [f"3 {a} {b} {c}" for a, b, c in f.tolist()]
            fh.write(("\n".join(lines) + "\n").encode("ascii"))


# --------------------------------------------------------------------------
# OBJ


def read_obj(path):
    vertices, polys = [], []
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        for lineno, line in enumerate(fh, 1):
            tok = line.split()
            if not tok or tok[0].startswith("#"):
                continue
            try:
                if tok[0] == "v":
                    vertices.append([float(t) for t in tok[1:4]])
                    if len(vertices[-1]) != 3:
                        raise ValueError
                elif tok[0] == "f":
                    poly = []
                    for t in tok[1:]:
                        idx = int(t.split("/")[0])
                        poly.append(idx - 1 if idx > 0 else len(vertices) + idx)
                    if len(poly) < 3:
                        raise ValueError
                    polys.append(poly)
            except ValueError:
                raise MeshParseError(path, f"line {lineno}", f"malformed record {line.strip()!r}") from None
    return _finish(path, vertices, polys)


def write_obj(mesh, path):
    with open(path, "w") as fh:
        for x, y, z in mesh.vertices.tolist():
            fh.write(f"v {x!r} {y!r} {z!r}\n")
        for a, b, c in (mesh.faces + 1).tolist():
            fh.write(f"f {a} {b} {c}\n")


def _format_of(path, fmt):
    if fmt is not None:
        return fmt.upper()
    ext = os.path.splitext(str(path))[1].lower()
    return {".ply": "PLY", ".obj": "OBJ"}.get(ext, ext.lstrip(".").upper())


def load_surface(path, format=None):
    """Read a PLY or OBJ triangle mesh; the format defaults to the extension."""
    fmt = _format_of(path, format)
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    if fmt == "PLY":
        return read_ply(path)
    if fmt == "OBJ":
        return read_obj(path)
    raise MeshParseError(path, "-", f"unsupported mesh format {fmt!r}")


def save_surface(mesh, path, format=None, binary=False):
    fmt = _format_of(path, format)
    if fmt == "PLY":
        write_ply(mesh, path, binary=binary)
    elif fmt == "OBJ":
        write_obj(mesh, path)
    else:
        raise ValueError(f"unsupported mesh format {fmt!r}")

