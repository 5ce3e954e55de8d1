"""CSV / JSON writers.  Every file is written to a temporary sibling and renamed into place."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path

import numpy as np


def atomic_write(path, data):
    """Write ``data`` (str or bytes) so readers never see a partial file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    blob = data.encode() if isinstance(data, str) else bytes(data)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return hashlib.sha256(blob).hexdigest()


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def content_hash(obj):
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()


def _g(v):
    return f"{float(v):.17g}"


def trace_csv(path) -> str:
    """``t,x1,x2,v1,v2`` rows of a traced geodesic."""
    lines = ["t,x1,x2,v1,v2"]
    for t, x, v in zip(path.t, path.x, path.v):
        lines.append(",".join(_g(u) for u in (t, x[0], x[1], v[0], v[1])))
    return "\n".join(lines) + "\n"


def sinogram_csv(sino) -> str:
    """``beta,alpha,tau,comp,re,im``: one row per ray and component (row-major for matrices)."""
    vals = np.asarray(sino.values)
    flat = vals.reshape(len(sino.fan), -1)
    lines = ["beta,alpha,tau,comp,re,im"]
    for z, tau, row in zip(sino.fan, sino.tau, flat):
        for c, v in enumerate(row):
            lines.append(f"{_g(z.beta)},{_g(z.alpha)},{_g(tau)},{c},{_g(v.real)},{_g(v.imag)}")
    return "\n".join(lines) + "\n"


def read_sinogram_csv(path):
    """``(beta, alpha, tau, comp, values)`` arrays from a sinogram CSV."""
    arr = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3].astype(int), arr[:, 4] + 1j * arr[:, 5]


def write_sinogram(sino, directory, config=None, seed=None, stem="sinogram"):
    """Sinogram CSV plus a JSON manifest embedding input and output hashes."""
    directory = Path(directory)
    digest = atomic_write(directory / f"{stem}.csv", sinogram_csv(sino))
    manifest = {"file": f"{stem}.csv", "sha256": digest, "columns": "beta,alpha,tau,comp,re,im",
                "n_rays": len(sino.fan), "components": int(np.prod(np.shape(sino.values)[1:])),
                "hashes": dict(sino.metadata)}
    if config is not None:
        manifest["config_sha256"] = content_hash(config)
    if seed is not None:
        manifest["seed"] = seed
    atomic_write(directory / f"{stem}.manifest.json", canonical_json(manifest))
    return manifest


def write_json(path, obj):
    return atomic_write(path, canonical_json(obj))
