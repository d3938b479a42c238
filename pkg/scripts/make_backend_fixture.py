#!/usr/bin/env python3
"""
Backend Snapshot Fixture Generator

Writes a snapshot JSON for a linear-chain device (0-1-2-...-n) with error rates
spread over fixed ranges. Rates follow the additive sequence frac(seed + k * phi'),
phi' = 0.618..., so regenerating with the same seed reproduces the file exactly.

Usage:
    python scripts/make_backend_fixture.py --out backends/manila.json
    python scripts/make_backend_fixture.py --n-qubits 7 --name chain7 --out backends/chain7.json
"""

import os
import sys
import json
import argparse
from logzero import logger

# Add the parent directory to the path to allow imports from src
current_dir = os.path.dirname(os.path.abspath(__file__))
parent_dir = os.path.dirname(current_dir)
sys.path.append(parent_dir)

from src.models import BASIS_GATE_NAMES, BackendSnapshotDocument

GOLDEN_STEP = 0.6180339887498949

SINGLE_QUBIT_RANGE = (2e-4, 5e-4)
CX_RANGE = (6e-3, 1.2e-2)
READOUT_RANGE = (2e-2, 4e-2)


def weyl_rates(count, lo, hi, seed=0.5, start=0):
    """count rates in [lo, hi] from the additive golden-ratio sequence, rounded to 8 decimals."""
    return [round(lo + (hi - lo) * ((seed + (start + k) * GOLDEN_STEP) % 1.0), 8) for k in range(count)]


def make_snapshot(name="manila", n_qubits=5, seed=0.5):
    """
    Build the snapshot document of a linear chain.

    Args:
        name: Backend name
        n_qubits: Number of physical qubits
        seed: Offset of the rate sequence in [0, 1)

    Returns:
        dict: Validated snapshot document
    """
    coupling = []
    for q in range(n_qubits - 1):
        coupling += [[q, q + 1], [q + 1, q]]

    single = weyl_rates(n_qubits, *SINGLE_QUBIT_RANGE, seed=seed)
    cx = weyl_rates(len(coupling), *CX_RANGE, seed=seed, start=n_qubits)
    readout = weyl_rates(n_qubits, *READOUT_RANGE, seed=seed, start=n_qubits + len(coupling))

    gate_errors = []
    for q in range(n_qubits):
        for gate in ("ID", "RZ", "SX", "X"):
            gate_errors.append({"gate": gate, "qubits": [q], "error": 0.0 if gate == "RZ" else single[q]})
    for pair, error in zip(coupling, cx):
        gate_errors.append({"gate": "CX", "qubits": pair, "error": error})

    document = {
        "format": 1,
        "name": name,
        "n_qubits": n_qubits,
        "coupling_map": coupling,
        "basis_gates": list(BASIS_GATE_NAMES),
        "gate_errors": gate_errors,
        "readout_errors": readout,
    }
    BackendSnapshotDocument.model_validate(document)
    return document


def main():
    parser = argparse.ArgumentParser(description="Generate a linear-chain backend snapshot")
    parser.add_argument('--name', type=str, default='manila', help='Backend name')
    parser.add_argument('--n-qubits', type=int, default=5, help='Number of physical qubits')
    parser.add_argument('--seed', type=float, default=0.5, help='Sequence offset in [0, 1)')
    parser.add_argument('--out', type=str, default=os.path.join(parent_dir, 'backends', 'manila.json'),
                        help='Output path')
    args = parser.parse_args()

    if args.n_qubits < 2 or not 0.0 <= args.seed < 1.0:
        logger.error("❌ need at least 2 qubits and a seed in [0, 1)")
        sys.exit(1)

    document = make_snapshot(args.name, args.n_qubits, args.seed)
    os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
    with open(args.out, 'w') as f:
        json.dump(document, f, indent=2)
        f.write("\n")
    logger.info(f"✅ Wrote {args.name} ({args.n_qubits} qubits) to {args.out}")


if __name__ == "__main__":
    main()
