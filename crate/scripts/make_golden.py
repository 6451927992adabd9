"""Regenerate the RHF/STO-3G reference values used by the test suite.

Requires pyscf. Geometries are in Bohr. Output is written to
crates/core/tests/golden/rhf_sto3g.json.
"""
import json
import pathlib

from pyscf import gto, scf

SYSTEMS = {
    "h2": (["H", "H"], [[0, 0, 0], [0, 0, 1.4]], 0),
    "heh+": (["He", "H"], [[0, 0, 0], [0, 0, 1.4632]], 1),
    "h2o": (["O", "H", "H"], [[0, 0, 0], [0, 1.4305, 1.1083], [0, -1.4305, 1.1083]], 0),
}

out = {"program": "pyscf " + __import__("pyscf").__version__, "basis": "sto-3g", "systems": {}}
for name, (symbols, coords, charge) in SYSTEMS.items():
    atom = [[s, c] for s, c in zip(symbols, coords)]
    mol = gto.M(atom=atom, basis="sto-3g", unit="Bohr", charge=charge, verbose=0)
    mf = scf.RHF(mol)
    mf.conv_tol = 1e-13
    mf.conv_tol_grad = 1e-9
    energy = mf.kernel()
    out["systems"][name] = {
        "symbols": symbols,
        "positions_bohr": coords,
        "charge": charge,
        "energy": energy,
        "nuclear_repulsion": mol.energy_nuc(),
        "orbital_energies": mf.mo_energy.tolist(),
        "overlap": mol.intor("int1e_ovlp").tolist(),
        "kinetic": mol.intor("int1e_kin").tolist(),
        "nuclear_attraction": mol.intor("int1e_nuc").tolist(),
        "eri": mol.intor("int2e").reshape(-1).tolist(),
    }

path = pathlib.Path(__file__).resolve().parent.parent / "crates/core/tests/golden/rhf_sto3g.json"
path.write_text(json.dumps(out, indent=1))
print("wrote", path)
