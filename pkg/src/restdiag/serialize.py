"""JSON encodings of the domain values (schema ``restdiag/1``)."""

import numpy as np

from .operators import (DiagonalizableOperator, IdentityDecomposition, Projection, Tail,
                        TruncOperator)
from .seq_ideal import SeqProfile

SCHEMA = "restdiag/1"


def encode_matrix(m) -> dict:
    m = np.asarray(m, dtype=complex)
    return {"re": m.real.tolist(), "im": m.imag.tolist()}


def decode_matrix(d) -> np.ndarray:
    if isinstance(d, list):
        return np.asarray(d, dtype=complex)
    re = np.asarray(d["re"], dtype=float)
    im = np.asarray(d["im"], dtype=float) if "im" in d else np.zeros_like(re)
    return re + 1j * im


def encode_complex_list(vals):
    return [[float(np.real(v)), float(np.imag(v))] for v in vals]


def decode_complex_list(vals):
    out = []
    for v in vals:
        out.append(complex(v[0], v[1]) if isinstance(v, (list, tuple)) else complex(v))
    return out


def encode_projection(p: Projection) -> dict:
    d = {"dim": p.dim, "tail": p.tail.to_json()}
    if p.coords is not None:
        d["coords"] = list(p.coords)
    else:
        d["basis"] = encode_matrix(p.basis)
    return d


def decode_projection(d) -> Projection:
    tail = Tail.from_json(d.get("tail", "zero"))
    if "coords" in d:
        return Projection.coordinate(int(d["dim"]), d["coords"], tail)
    if "basis" in d:
        b = decode_matrix(d["basis"])
        if b.ndim == 1:
            b = b[:, None]
        return Projection.from_basis(b, tail)
    if "matrix" in d:
        return Projection.from_matrix(decode_matrix(d["matrix"]), tail)
    raise ValueError("projection needs one of 'coords', 'basis', 'matrix'")


def encode_decomposition(fam: IdentityDecomposition) -> dict:
    return {"parts": [encode_projection(p) for p in fam],
            "defect": None if fam.defect is None else fam.defect.to_dict()}


def decode_decomposition(d, check=True) -> IdentityDecomposition:
    defect = d.get("defect")
    return IdentityDecomposition([decode_projection(p) for p in d["parts"]],
                                 None if defect is None else SeqProfile.from_dict(defect),
                                 check=check)


def encode_diagonalizable(a: DiagonalizableOperator) -> dict:
    return {"eigenvalues": encode_complex_list(a.eigenvalues),
            "spectral": encode_decomposition(a.spectral)}


def decode_diagonalizable(d) -> DiagonalizableOperator:
    return DiagonalizableOperator(decode_complex_list(d["eigenvalues"]),
                                  decode_decomposition(d["spectral"]))


def encode_operator(op: TruncOperator) -> dict:
    return op.to_dict()


def decode_operator(d) -> TruncOperator:
    return TruncOperator.from_dict(d)
